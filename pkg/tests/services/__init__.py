"""Tests for thermolim services."""
