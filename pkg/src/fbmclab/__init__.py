"""MIMO-FBMC link-level simulation with filter output truncation and
interference compensation."""

__version__ = "0.1.0"
