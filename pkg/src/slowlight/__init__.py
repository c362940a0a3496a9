"""Self-induced slow light in a hole-burning medium and its switching by population control."""

__version__ = "0.1.0"
