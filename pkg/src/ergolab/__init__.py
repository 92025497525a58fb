"""ergolab: Kingman-type limits for non-invariant measures, on finite maps and flows."""
__version__ = "0.1.0"
