"""Query generation and simulated-user judging."""
