class StanceError(Exception):
    """Base class for all errors raised by stancetree."""
