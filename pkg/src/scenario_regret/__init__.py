"""Scenario-based regret-optimal control for uncertain linear time-varying systems."""

__version__ = "0.1.0"
