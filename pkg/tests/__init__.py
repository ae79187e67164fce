"""Test suite for thermolim."""
