"""Local fermion-to-qubit circuits for the 2D t-V model, with verification tools."""

__version__ = "0.1.0"
