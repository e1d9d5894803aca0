"""Unattended reinforcement-learning harness for a headless omnidrive robot simulator."""

__version__ = "0.1.0"
