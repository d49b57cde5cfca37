"""Maintenance scripts for bdsim runs."""
