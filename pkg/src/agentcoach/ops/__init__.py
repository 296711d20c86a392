"""Operational layer: round orchestration, CLI, and the REST service."""
