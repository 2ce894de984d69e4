"""EIT regional ventilation features and healthy/non-healthy classification."""

__version__ = "0.1.0"
