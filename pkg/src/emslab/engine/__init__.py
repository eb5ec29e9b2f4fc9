"""Numerical core: protocol simulation, analytic evaluation and the dynamic programs."""
