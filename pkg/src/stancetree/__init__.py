"""Rumour stance classification over tree-structured conversation threads."""

__version__ = "0.1.0"
