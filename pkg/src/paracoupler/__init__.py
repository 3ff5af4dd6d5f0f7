"""Pulse-level simulator and control stack for two transmons coupled by a
flux-pumped SQUID."""

__version__ = "0.1.0"
