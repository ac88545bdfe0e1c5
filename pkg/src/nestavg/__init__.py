"""Nested model selection versus model averaging: oracle risks and simulations."""

__version__ = "0.1.0"
