"""Doubly-resonant saddle-nodes in three complex variables."""
