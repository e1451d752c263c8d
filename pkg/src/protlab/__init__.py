"""protlab: a self-evolving multi-agent workflow engine for protein discovery
and directed evolution, runnable entirely at desk scale."""

__version__ = "0.1.0"

from .errors import ProtlabError

__all__ = ["ProtlabError", "__version__"]
