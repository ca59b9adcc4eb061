"""Full symbols of pseudodifferential projections for elliptic matrix operators."""

__version__ = "0.1.0"
