"""Desk-scale simulator for a succinct, compiled two-prover QMA argument."""

__version__ = "0.1.0"
