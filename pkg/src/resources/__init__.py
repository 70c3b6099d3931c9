"""Bundled data files (bootstrap patterns, scenario texts, search corpus)."""
