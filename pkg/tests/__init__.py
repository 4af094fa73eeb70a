"""Tests for omtherm."""
