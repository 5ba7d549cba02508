"""Tests for the ssjoin command-line interface."""
