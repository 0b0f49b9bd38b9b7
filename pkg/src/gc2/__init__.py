"""Decision procedures for the guarded two-variable fragment with counting."""

__version__ = "0.1.0"
