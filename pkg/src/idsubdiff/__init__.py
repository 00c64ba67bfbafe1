"""Monte Carlo and numerical tools for diffusions subordinated to inverse
subordinators with general Laplace exponents."""

__version__ = "0.1.0"
