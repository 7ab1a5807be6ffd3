"""Scenario-driven agent simulation of the economy."""
