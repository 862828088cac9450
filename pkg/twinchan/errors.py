"""
errors.py
---------

Root exceptions shared by every twinchan module.

Each module derives its own hierarchy from these two classes so that the
command line can tell bad input (exit code 2) from internal failures
(exit code 1) without knowing every concrete error type.
"""


class TwinchanError(Exception):
    """Base exception for all twinchan errors."""
    pass


class ValidationError(TwinchanError, ValueError):
    """Raised when an input or a contract precondition is violated."""
    pass
