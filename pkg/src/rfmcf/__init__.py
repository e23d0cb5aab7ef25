"""Mean curvature flow in Ricci flow backgrounds: simulation and identity checks."""

__version__ = "0.1.0"
