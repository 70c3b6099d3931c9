"""
CLI entry points for thoughtrec.
"""
