"""HTTP service exposing the inference functions over a single loaded
checkpoint. The model is read-only: identical requests produce identical
payloads, and requests may be served concurrently.
"""

from __future__ import annotations

import base64
import io
import logging
from concurrent.futures import ThreadPoolExecutor, TimeoutError as FutureTimeout
from typing import List, Optional

import numpy as np
import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel

from colorcode.core import DomainError, denormalize_image, normalize_image
from colorcode.data import load_paired_dataset
from colorcode.gateway import ApiError
from colorcode.inference import (AdaptationRequest, InferenceError,
                                 InferenceSession, InterpolationRequest)
from colorcode.metrics import code_histograms

log = logging.getLogger(__name__)

MAX_IMAGE_BYTES = 8 * 1024 * 1024


class EnhanceBody(BaseModel):
    image: str


class AdaptBody(BaseModel):
    image: str
    guidance: str
    alpha: float = 0.0
    mask: Optional[str] = None


class InterpolateBody(BaseModel):
    image: str
    z: List[float]
    alpha: float = 0.5


class GridBody(BaseModel):
    image: str
    steps: int = 11
    lo: float = -5.0
    hi: float = 5.0
    alpha: float = 0.5


def decode_image_b64(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
    except Exception:
        raise ApiError("bad_image", "image is not valid base64")
    if len(raw) > MAX_IMAGE_BYTES:
        raise ApiError("image_too_large", f"image exceeds {MAX_IMAGE_BYTES} bytes")
    try:
        with Image.open(io.BytesIO(raw)) as img:
            return np.asarray(img.convert("RGB"))
    except Exception:
        raise ApiError("bad_image", "payload does not decode as an image")


def encode_image_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _error_response(status: int, err: ApiError) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": err.to_dict()})


def create_app(checkpoint_path, deadline_s: float = 30.0) -> FastAPI:
    session = InferenceSession.from_checkpoint(checkpoint_path)
    app = FastAPI(title="colorcode", version="1")
    executor = ThreadPoolExecutor(max_workers=4)

    def run(fn):
        """Run a handler under the response deadline."""
        future = executor.submit(fn)
        try:
            return future.result(timeout=deadline_s)
        except FutureTimeout:
            raise ApiError("timeout", f"request exceeded the {deadline_s}s deadline")

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, err: ApiError):
        status = {"grid_needs_2d_code": 409, "timeout": 500}.get(err.code, 400)
        return _error_response(status, err)

    @app.exception_handler(RequestValidationError)
    async def _validation(request: Request, err: RequestValidationError):
        problems = [f"{e.get('msg', 'invalid')} at {e.get('loc', ())}"
                    for e in err.errors()[:5]]
        return _error_response(400, ApiError("validation", "invalid request body",
                                             detail={"errors": problems}))

    @app.exception_handler(Exception)
    async def _unexpected(request: Request, err: Exception):
        log.exception("unhandled error")
        return _error_response(500, ApiError("internal", str(err)))

    def _normalize(b64: str):
        try:
            return normalize_image(decode_image_b64(b64))
        except DomainError as err:
            raise ApiError("bad_image", str(err))

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "k_m": session.config.code_length,
            "checkpoint_digest": getattr(session, "checkpoint_digest", ""),
        }

    @app.post("/v1/enhance")
    def enhance(body: EnhanceBody):
        x = _normalize(body.image)
        out = run(lambda: session.enhance(x))
        return {"image": encode_image_b64(denormalize_image(out))}

    @app.post("/v1/adapt")
    def adapt(body: AdaptBody):
        x = _normalize(body.image)
        g = _normalize(body.guidance)
        mask = None
        if body.mask is not None:
            arr = decode_image_b64(body.mask)
            mask = torch.from_numpy((arr.mean(axis=-1) > 127).astype(np.float32))
        try:
            req = AdaptationRequest(x=x, guidance=g, alpha=body.alpha, mask=mask)
            out = run(lambda: session.adapt(req))
        except InferenceError as err:
            raise ApiError("bad_request", str(err))
        return {"image": encode_image_b64(denormalize_image(out))}

    @app.post("/v1/interpolate")
    def interpolate(body: InterpolateBody):
        x = _normalize(body.image)
        try:
            req = InterpolationRequest(x=x, z=torch.tensor(body.z, dtype=torch.float32),
                                       alpha=body.alpha)
            out = run(lambda: session.interpolate(req))
        except InferenceError as err:
            raise ApiError("bad_request", str(err))
        return {"image": encode_image_b64(denormalize_image(out))}

    @app.post("/v1/grid")
    def grid(body: GridBody):
        if session.config.code_length != 2:
            raise ApiError("grid_needs_2d_code",
                           f"grid requires a 2-D color code model, this checkpoint "
                           f"has k_m={session.config.code_length}")
        x = _normalize(body.image)
        try:
            result = run(lambda: session.interpolation_grid(
                x, body.steps, (body.lo, body.hi), body.alpha))
        except InferenceError as err:
            raise ApiError("bad_request", str(err))
        images = [[encode_image_b64(denormalize_image(img)) for img in row]
                  for row in result.images]
        return {"images": images, "center": list(result.center) if result.center else None}

    @app.get("/v1/codes/histogram")
    def histogram(dataset: str, bins: int = 30, limit: int = 256):
        try:
            ds = load_paired_dataset(dataset, split="test")
        except Exception as err:
            raise ApiError("bad_dataset", str(err))
        codes = _dataset_codes(session, ds, limit)
        hist = code_histograms(codes, bins=bins)
        return {
            "bin_edges": hist.bin_edges, "counts": hist.counts,
            "mean": hist.mean, "std": hist.std, "n_samples": hist.n_samples,
        }

    return app


def _dataset_codes(session: InferenceSession, dataset, limit: int):
    from colorcode.data import _load_rgb, _resize_short_side
    from colorcode.metrics import _center_square

    size = session.config.image_size
    codes = []
    for inp_path, _ in dataset.pairs[:limit]:
        arr = _center_square(_resize_short_side(_load_rgb(inp_path), size), size)
        codes.append(session.encode_color(normalize_image(arr)).numpy())
    return codes


def serve(checkpoint_path, host: str = "127.0.0.1", port: int = 8000,
          deadline_s: float = 30.0) -> None:
    import uvicorn

    app = create_app(checkpoint_path, deadline_s=deadline_s)
    uvicorn.run(app, host=host, port=port, log_level="info")
