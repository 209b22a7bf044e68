"""Exception hierarchy shared by every component.

Each class carries the HTTP status the REST layer answers with, so a handler
can raise domain errors and let the router translate them.
"""

from __future__ import annotations


class IaaSError(Exception):
    status = 500

    def to_body(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class UsageError(IaaSError, ValueError):
    status = 400


class DescriptorError(UsageError):
    pass


class ParseError(DescriptorError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class ValidationError(DescriptorError):
    def __init__(self, message: str, label: str | None = None):
        super().__init__(message)
        self.label = label

    def to_body(self) -> dict:
        body = super().to_body()
        if self.label is not None:
            body["label"] = self.label
        return body


class RangeError(ValidationError):
    pass


class NotFound(IaaSError, LookupError):
    status = 404


class Conflict(IaaSError):
    status = 409


class Busy(Conflict):
    pass


class LeaseConflict(Conflict):
    pass


class Forbidden(IaaSError):
    status = 403


class Unsatisfiable(IaaSError):
    status = 422

    def __init__(self, missing):
        self.missing = tuple(sorted(missing))
        super().__init__("no feasible coalition, missing capabilities: " + ", ".join(self.missing))

    def to_body(self) -> dict:
        body = super().to_body()
        body["missing"] = list(self.missing)
        return body


class RoutingError(IaaSError):
    status = 502


class DeliveryError(IaaSError):
    status = 504


class TransportError(IaaSError):
    """Raised when a transport cannot reach the target endpoint."""

    status = 503


_BY_NAME = {
    cls.__name__: cls
    for cls in (
        UsageError, DescriptorError, ValidationError, RangeError, NotFound, Conflict,
        Busy, LeaseConflict, Forbidden, RoutingError, DeliveryError, TransportError,
    )
}


def error_from_body(status: int, body) -> IaaSError:
    """Rebuild a domain error from a REST error body (best effort)."""
    if isinstance(body, dict):
        name = body.get("error", "")
        message = body.get("message", "")
        if name == "Unsatisfiable":
            return Unsatisfiable(body.get("missing", ()))
        if name in ("ValidationError", "RangeError"):
            return _BY_NAME[name](message, body.get("label"))
        if name in _BY_NAME:
            return _BY_NAME[name](message)
        if message:
            return IaaSError(message)
    return IaaSError(f"status {status}: {body!r}")
