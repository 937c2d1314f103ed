"""Static figures from the model pipeline's CSV suites."""

__version__ = "0.1.0"
