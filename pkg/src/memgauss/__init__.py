"""Analog Gaussian-filter workbench.

Rational transfer-function analysis, a small modified-nodal-analysis circuit
simulator with memristor support, circuit synthesis for lumped Gaussian
ladders and Sallen-Key cascades, and the logarithmic fit of a tabulated
magnitude response.
"""

__version__ = "0.1.0"
