"""Diversity-steered regex-constrained generation."""
