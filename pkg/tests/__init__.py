"""
Tests for thoughtrec.
"""
