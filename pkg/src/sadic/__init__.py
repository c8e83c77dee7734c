"""Numerics for S-adic translation-flow models: substitutions, Rauzy
induction, renormalization cocycles, twisted Birkhoff integrals and the
lattice tracking behind quantitative weak-mixing bounds."""

__version__ = "0.1.0"
