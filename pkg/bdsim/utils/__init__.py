"""Shared parsing and table helpers."""
