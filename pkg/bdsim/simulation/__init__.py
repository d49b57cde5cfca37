"""Exact sampling kernel, particle systems, couplings and free branching Brownian motion."""
