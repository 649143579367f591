"""Bell-type inequalities on quantum networks of arbitrary topology."""

__version__ = "0.1.0"
