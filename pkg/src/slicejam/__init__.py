"""Network-slicing simulator with transfer-learned slicing agents under jamming."""

__version__ = "0.1.0"
