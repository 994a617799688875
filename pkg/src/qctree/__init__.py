"""Quasiarcs from dyadic diameter functions, their Lipschitz function theory,
and decompositions of quasiconformal trees."""

__version__ = "0.1.0"
