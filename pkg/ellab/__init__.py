"""Elliptic curve L-series laboratory."""
