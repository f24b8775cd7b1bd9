"""Paper-style figure rendering for surfpinn field dumps."""

__version__ = "0.1.0"
