"""Clock Hamiltonians and history states checked by exact simulation."""

__version__ = "0.1.0"
