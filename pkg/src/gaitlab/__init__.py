"""Desk-scale benchmark of lifetime gait learners (BO, NIPES, RevDE) on modular robots."""

__version__ = "0.1.0"
