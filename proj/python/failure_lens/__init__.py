"""Distill model failure modes as directions in embedding space."""

from ._failure_lens import *  # noqa: F401,F403
from ._failure_lens import __doc__  # noqa: F401

__version__ = "0.1.0"
