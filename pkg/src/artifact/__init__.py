"""Offline audio-to-score alignment toolkit."""
