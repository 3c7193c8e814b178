"""PNG import/export for panoramas and faces.

Interchange format is 8-bit RGB PNG plus a JSON sidecar recording the image
size and that the projection is equirectangular.  Quantisation to 8 bits
happens exactly once, at export; :func:`quantize`/:func:`dequantize` are the
shared helpers so wire transports stay bit-exact in the 8-bit domain.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DomainError

SIDECAR_SUFFIX = ".meta.json"


def quantize(img: np.ndarray) -> np.ndarray:
    """Float [0,1] -> uint8, round-half-even."""
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def dequantize(img8: np.ndarray) -> np.ndarray:
    """uint8 -> float64 in [0,1]."""
    return img8.astype(np.float64) / 255.0


def encode_png(img: np.ndarray) -> bytes:
    """Encode a float panorama (or face) as 8-bit RGB PNG bytes."""
    arr = img if img.dtype == np.uint8 else quantize(img)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes to a float64 image in [0,1]."""
    with Image.open(io.BytesIO(data)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return dequantize(arr)


def save_panorama(path, img: np.ndarray, projection: str = "equirectangular") -> Path:
    """Write an 8-bit PNG and its metadata sidecar; returns the image path."""
    path = Path(path)
    path.write_bytes(encode_png(img))
    meta = {
        "schema": "panorama-meta/1",
        "width": int(img.shape[1]),
        "height": int(img.shape[0]),
        "projection": projection,
        "bit_depth": 8,
    }
    Path(str(path) + SIDECAR_SUFFIX).write_text(json.dumps(meta, indent=2))
    return path


def load_panorama(path):
    """Read a PNG (and sidecar, if present) back to float64; returns (img, meta)."""
    path = Path(path)
    img = decode_png(path.read_bytes())
    sidecar = Path(str(path) + SIDECAR_SUFFIX)
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else None
    if meta is not None:
        if meta.get("width") != img.shape[1] or meta.get("height") != img.shape[0]:
            raise DomainError(f"sidecar size mismatch for {path}")
    return img, meta
