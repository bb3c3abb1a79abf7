"""Squeezed-light readout of a thermally driven membrane: model, synthesis and fits."""

__version__ = "0.1.0"
