"""Tests for shooting_resample."""
