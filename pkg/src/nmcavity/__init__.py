"""Decay and lasing threshold of a microcavity coupled to a structured continuum."""

__version__ = "0.1.0"
