"""dualperm: dual-scale permeability prediction for fibrous porous media."""

__version__ = "0.1.0"
