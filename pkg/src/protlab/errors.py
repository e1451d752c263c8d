"""Shared exception base for all protlab modules."""


class ProtlabError(Exception):
    """Base class; carries a stable machine-readable code."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def __str__(self) -> str:  # noqa: D105
        base = super().__str__()
        if self.details:
            extras = ", ".join(f"{k}={v!r}" for k, v in sorted(self.details.items()))
            return f"{base} ({extras})"
        return base
