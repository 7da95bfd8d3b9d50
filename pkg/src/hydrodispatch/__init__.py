"""Hydropower dispatch modeling: historical hydrology coupled with electrical
unit data to produce realistic unit-level MW dispatches for planning cases."""

__version__ = "0.1.0"
