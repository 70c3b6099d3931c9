"""Metrics, statistics, experiment harness and reports."""
