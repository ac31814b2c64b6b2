"""Blade: a self-hosted federated-services node.

Self-sovereign identities resolved through a registry state machine, a signed
HTTP server-to-server protocol, installable service modules with a
marketplace, a reference contact-sharing module, and a deterministic
multi-node simulation harness.
"""

__version__ = "0.1.0"

from blade.errors import BladeError

__all__ = ["BladeError", "__version__"]
