"""Groundstate reconstruction from synthetic Pauli-basis measurements.

Complex RBM and RNN wavefunctions, fixed-point maximum-likelihood tomography
and uniform classical shadows, plus the sweep machinery used to measure how
their energy error and infidelity scale with the number of shots.
"""

__version__ = "0.1.0"
