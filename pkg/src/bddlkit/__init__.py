"""Parse, validate, instantiate, simulate and evaluate BDDL activity definitions."""

__version__ = "0.1.0"
