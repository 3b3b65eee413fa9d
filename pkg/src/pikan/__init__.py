"""KAN-based Deep Energy Method solver for 2D multi-material linear elasticity."""

__version__ = "0.1.0"
