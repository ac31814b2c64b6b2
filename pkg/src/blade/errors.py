"""Shared error hierarchy.

Every error carries a machine-readable ``code`` that travels over the wire in
signed error responses and in C2S error bodies.  Subsystems define their own
subclasses next to the code that raises them; this module holds the base class
plus the handful of codes shared across subsystems.
"""

from __future__ import annotations


class BladeError(Exception):
    """Base class for all errors raised by this package.

    ``code`` is the stable machine-readable identifier; it defaults to the
    class name so subclasses normally need no body at all.
    """

    code: str = "Error"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if "code" not in cls.__dict__:
            cls.code = cls.__name__

    def to_wire(self) -> dict:
        """Error payload as carried in the `data` claim of error responses."""
        return {"code": self.code, "message": str(self)}


class NotFound(BladeError):
    """A name, address, or record could not be resolved."""


class Unauthorized(BladeError):
    """The signer is not allowed to perform the requested mutation."""


class Denied(BladeError):
    """An access-control rule (or the default-deny policy) blocked access."""


class DispatchFailed(BladeError):
    """An outbound request could not be delivered to the peer."""


_CODE_INDEX: dict[str, type[BladeError]] = {}


def _index(cls: type[BladeError]) -> None:
    _CODE_INDEX[cls.code] = cls
    for sub in cls.__subclasses__():
        _index(sub)


def error_for_code(code: str, message: str = "") -> BladeError:
    """Rebuild an error instance from a wire-level ``{code, message}`` pair.

    Unknown codes come back as a plain BladeError so remote peers running a
    newer build cannot crash the local error path.
    """
    _index(BladeError)
    cls = _CODE_INDEX.get(code)
    if cls is None:
        err = BladeError(message or code)
        err.code = code
        return err
    return cls(message or code)
