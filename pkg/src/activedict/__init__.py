"""Dictionary learning with sparse activations under active example selection."""

__version__ = "0.1.0"
