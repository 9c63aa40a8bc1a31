"""Strategy logic toolkit: formulas, games, oracle semantics, automata, solver."""

__version__ = "0.1.0"
