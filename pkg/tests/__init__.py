"""Tests for balanced-lab."""
