"""Replicate-level estimators built on `bdsim.simulation`."""
