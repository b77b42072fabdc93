"""Embryo implantation prediction from time-lapse frames, with its evaluation protocol."""

__version__ = "0.1.0"
