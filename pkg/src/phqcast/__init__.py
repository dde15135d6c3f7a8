"""Depression (PHQ-9) diagnosis and forecasting from passive smartphone sensing."""

__version__ = "0.1.0"
