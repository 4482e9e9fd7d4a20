"""Generalized sufficiency, deformed Rao-Blackwell estimation and generalized
Cramer-Rao bounds for power-law (M^(alpha), B^(alpha)) families."""

__version__ = "0.1.0"
