"""Discourse-marker data augmentation for imbalanced binary sentiment classification."""

__version__ = "0.1.0"
