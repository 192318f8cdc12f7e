"""HTTP inference service consumed by the companion UI.

Endpoints:
  GET  /api/health    -> {status, checkpoint_id}; 503 until the model loads
  POST /api/generate  -> stylized title + skeleton + composite (base64 PNG)

Requests carry a cover raster, a target box in model space (256x256), and
the desired text; either JSON with base64 images or multipart form data.
"""

from __future__ import annotations

import base64
import io
import threading
import time
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .batching import from_chw, to_chw
from .data import COVER_H, COVER_W, TITLE_H, TITLE_W, render_plain_text
from .errors import InvalidArgumentError
from .imtensor import ImageTensor, make_location_mask, normalize, quantize, to_unit
from .networks import load_checkpoint
from .thinning import stroke_mask_from_title

MAX_REQUEST_BYTES = 8 * 1024 * 1024


class ModelHost:
    """Holds the served bundle behind a swap lock."""

    def __init__(self, checkpoint_path=None):
        self.checkpoint_path = checkpoint_path
        self._lock = threading.Lock()
        self._bundle = None
        self.checkpoint_id = None

    @property
    def ready(self) -> bool:
        return self._bundle is not None

    def load(self, checkpoint_path=None):
        path = Path(checkpoint_path or self.checkpoint_path)
        bundle, _ = load_checkpoint(path)
        bundle.eval()
        with self._lock:
            self._bundle = bundle
            self.checkpoint_id = path.name

    def load_async(self):
        threading.Thread(target=self.load, daemon=True).start()

    def bundle(self):
        with self._lock:
            return self._bundle


def _png_b64(img: ImageTensor) -> str:
    byte = np.rint(np.clip(to_unit(img) * 255.0, 0, 255)).astype(np.uint8)
    if byte.shape[2] == 1:
        pil = Image.fromarray(byte[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(byte, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _decode_cover(raw: bytes) -> ImageTensor:
    try:
        pil = Image.open(io.BytesIO(raw)).convert("RGB")
    except Exception as e:
        raise InvalidArgumentError(f"cover is not a decodable raster: {e}") from e
    # aspect-fill to the model's fixed cover size
    scale = max(COVER_W / pil.width, COVER_H / pil.height)
    nw, nh = max(1, round(pil.width * scale)), max(1, round(pil.height * scale))
    pil = pil.resize((nw, nh), Image.BILINEAR)
    left, top = (nw - COVER_W) // 2, (nh - COVER_H) // 2
    pil = pil.crop((left, top, left + COVER_W, top + COVER_H))
    byte = np.asarray(pil, dtype=np.float32)
    return normalize(ImageTensor(byte, "byte", "rgb"))


def _parse_box(box) -> tuple[int, int, int, int]:
    try:
        vals = tuple(int(v) for v in box)
    except (TypeError, ValueError) as e:
        raise InvalidArgumentError(f"box must be four integers, got {box!r}") from e
    if len(vals) != 4:
        raise InvalidArgumentError(f"box must be four integers, got {box!r}")
    return vals


def _composite(cover: ImageTensor, title: ImageTensor, box) -> ImageTensor:
    """Blend the title's strokes into the box region of the cover."""
    x0, y0, x1, y1 = box
    bw, bh = x1 - x0, y1 - y0
    alpha = stroke_mask_from_title(title).data[:, :, 0]
    title_unit = to_unit(title).astype(np.float32)
    alpha_im = Image.fromarray((alpha * 255).astype(np.uint8), "L").resize((bw, bh), Image.BILINEAR)
    title_im = Image.fromarray((title_unit * 255).astype(np.uint8), "RGB").resize((bw, bh), Image.BILINEAR)
    a = np.asarray(alpha_im, dtype=np.float32)[:, :, None] / 255.0
    t = np.asarray(title_im, dtype=np.float32) / 255.0
    out = to_unit(cover).astype(np.float32)
    region = out[y0:y1, x0:x1]
    out[y0:y1, x0:x1] = (1.0 - a) * region + a * t
    return ImageTensor(np.clip(out, 0, 1), "unit", "rgb")


def generate_title(bundle, cover: ImageTensor, box, text: str) -> dict:
    t0 = time.time()
    box = _parse_box(box)
    if not text or not text.strip():
        raise InvalidArgumentError("text must be non-empty")
    mask = make_location_mask(box, COVER_H, COVER_W)
    i_t = quantize(normalize(render_plain_text(text)))
    with torch.no_grad():
        o_t, o_sk = bundle.generate(
            to_chw(i_t)[None], to_chw(cover)[None], to_chw(mask)[None]
        )
    title = from_chw(o_t[0], "unit_signed", "rgb")
    skeleton = ImageTensor(
        o_sk[0].detach().cpu().numpy().transpose(1, 2, 0).clip(0, 1), "unit", "gray"
    )
    return {
        "title_image": _png_b64(title),
        "skeleton_image": _png_b64(skeleton),
        "composite": _png_b64(_composite(cover, title, box)),
        "latency_ms": round((time.time() - t0) * 1000.0, 2),
    }


def create_app(checkpoint_path=None, frontend_dir=None, defer_load: bool = False) -> FastAPI:
    """App factory. With ``defer_load`` the caller triggers the model load."""
    app = FastAPI(title="fontfits")
    host = ModelHost(checkpoint_path)
    app.state.host = host

    @app.middleware("http")
    async def limit_size(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > MAX_REQUEST_BYTES:
            return JSONResponse({"error": "request too large"}, status_code=413)
        return await call_next(request)

    @app.on_event("startup")
    def startup():
        if checkpoint_path and not defer_load:
            host.load_async()

    @app.get("/api/health")
    def health():
        if not host.ready:
            return JSONResponse({"status": "loading"}, status_code=503)
        return {"status": "ok", "checkpoint_id": host.checkpoint_id}

    @app.post("/api/generate")
    async def generate(request: Request):
        if not host.ready:
            return JSONResponse({"error": "model is still loading"}, status_code=503)
        try:
            content_type = request.headers.get("content-type", "")
            if content_type.startswith("multipart/form-data"):
                form = await request.form()
                if "cover" not in form:
                    raise InvalidArgumentError("multipart field 'cover' is required")
                raw = await form["cover"].read()
                import json as _json

                box = _json.loads(form.get("box", "null"))
                text = form.get("text", "")
            else:
                body = await request.json()
                raw = base64.b64decode(body.get("cover", ""), validate=False)
                box = body.get("box")
                text = body.get("text", "")
            if len(raw) > MAX_REQUEST_BYTES:
                return JSONResponse({"error": "cover too large"}, status_code=413)
            cover = _decode_cover(raw)
            payload = generate_title(host.bundle(), cover, box, text)
        except InvalidArgumentError as e:
            return JSONResponse({"error": str(e)}, status_code=400)
        except Exception as e:  # malformed JSON and friends
            return JSONResponse({"error": f"bad request: {e}"}, status_code=400)
        return payload

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app


def serve(host: str, port: int, checkpoint: str, frontend_dir=None):
    import uvicorn

    app = create_app(checkpoint, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port)
