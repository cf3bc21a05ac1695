"""Command line and HTTP surfaces over training, evaluation and inference."""

from dataclasses import dataclass
from typing import Optional


@dataclass
class ApiError(Exception):
    """Machine-readable error carried by every non-success response."""

    code: str
    message: str
    detail: Optional[dict] = None

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": self.message}
        if self.detail is not None:
            out["detail"] = self.detail
        return out
