"""Command-line interfaces for bdsim."""
