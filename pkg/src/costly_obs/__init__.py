"""Mountain Car control when observing the state has a price."""

__version__ = "0.1.0"
