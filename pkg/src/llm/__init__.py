"""LLM access: gateway, providers and prompt templates."""
