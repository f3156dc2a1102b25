"""Early risk detection lab: corpora, text preparation, risk scorers, the
historic decision rule, a mock round-based evaluation server and client, and
early-detection / ranking metrics."""

__version__ = "0.1.0"
