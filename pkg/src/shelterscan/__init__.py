"""Shelter-access analytics: chronic and episodic detection, referral impact, design search."""

__version__ = "0.1.0"
