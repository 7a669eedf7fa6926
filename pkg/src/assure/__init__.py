"""Assurance monitors built from networks of source, fusion, prediction and
check-violation agents, with a drone-navigation and a clock-drift scenario."""

__version__ = "0.1.0"
