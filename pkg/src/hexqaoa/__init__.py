"""QAOA angle training and transfer on heavy-hex Ising models with cubic terms."""

__version__ = "0.1.0"
