"""Time maps, invariant tori and periodic-orbit continuation for planar central forces."""

__version__ = "0.1.0"
