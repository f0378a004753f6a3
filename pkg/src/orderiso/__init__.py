"""orderiso: constructive order isomorphisms via entire interpolation series."""

__version__ = "0.1.0"
