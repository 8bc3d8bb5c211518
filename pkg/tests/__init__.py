"""Tests for LocalCowork."""
