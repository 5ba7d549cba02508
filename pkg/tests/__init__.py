"""Shared test data for the ssjoin packages."""
