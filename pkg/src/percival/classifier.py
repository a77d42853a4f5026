"""Per-image detection unit: decode, preprocess, classify.

Decoding leans on Pillow for the actual codecs; format sniffing happens on
magic bytes first so "format we don't handle" and "stream that claims a
supported format but is broken" raise distinct errors. Classification is a
pure function of (bitmap, model, threshold) and is safe to run from many
threads over one shared model.
"""

import io
import time
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from percival.nn.backend import kernels
from percival.nn.ops import network_forward
from percival.nn.tensor import Tensor

# class order of the network head
AD_CLASS = 0
NON_AD_CLASS = 1

# frames strictly below this size in either dimension skip classification
BYPASS_EDGE = 100


class DecodeError(Exception):
    """Base class; the pipeline treats any decode failure as fail-open."""


class UnsupportedFormatError(DecodeError):
    """The byte stream is not one of the formats we decode (PNG/JPEG/GIF)."""


class CorruptImageError(DecodeError):
    """The stream claims a supported format but cannot be decoded."""


@dataclass
class Bitmap:
    """Decoded RGBA pixels, 8 bits per channel, row-major [height, width, 4]."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"bitmap dims must be positive, got {self.width}x{self.height}")
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width, 4):
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape} != "
                f"({self.height}, {self.width}, 4)"
            )


@dataclass(frozen=True)
class Verdict:
    is_ad: bool
    p_ad: float
    bypassed: bool
    inference_micros: int


_SUPPORTED = {"png", "jpeg", "gif"}

_HINT_ALIASES = {
    "png": "png", "image/png": "png",
    "jpeg": "jpeg", "jpg": "jpeg", "image/jpeg": "jpeg", "image/jpg": "jpeg",
    "gif": "gif", "image/gif": "gif",
    "webp": "webp", "image/webp": "webp",
    "bmp": "bmp", "image/bmp": "bmp",
    "tiff": "tiff", "image/tiff": "tiff",
    "avif": "avif", "image/avif": "avif",
    "ico": "ico", "image/x-icon": "ico", "image/vnd.microsoft.icon": "ico",
}


def sniff_format(data):
    """Magic-byte detection. Returns a format name or None when unknown."""
    if data.startswith(b"\x89PNG\r\n\x1a\n"):
        return "png"
    if data.startswith(b"\xff\xd8\xff"):
        return "jpeg"
    if data.startswith((b"GIF87a", b"GIF89a")):
        return "gif"
    if len(data) >= 12 and data[:4] == b"RIFF" and data[8:12] == b"WEBP":
        return "webp"
    if data.startswith(b"BM"):
        return "bmp"
    if data.startswith((b"II*\x00", b"MM\x00*")):
        return "tiff"
    if data.startswith(b"\x00\x00\x01\x00"):
        return "ico"
    if len(data) >= 12 and data[4:8] == b"ftyp" and data[8:12] in (b"avif", b"avis"):
        return "avif"
    return None


def _pil_decode(data, fmt):
    try:
        img = Image.open(io.BytesIO(data))
        img.load()  # force full decode so truncation surfaces here
        rgba = img.convert("RGBA")
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise CorruptImageError(f"cannot decode {fmt} stream: {exc}") from exc
    pixels = np.asarray(rgba, dtype=np.uint8)
    return Bitmap(width=rgba.width, height=rgba.height, pixels=pixels)


def decode_image(data, hinted_format=None):
    """bytes -> Bitmap. PNG, JPEG, GIF (first frame); alpha filled with 255
    for formats without it. A content-type hint stands in when the stream has
    no recognizable signature.
    """
    fmt = sniff_format(data)
    if fmt is None and hinted_format:
        fmt = _HINT_ALIASES.get(hinted_format.strip().lower())
    if fmt in _SUPPORTED:
        return _pil_decode(data, fmt)
    if fmt is not None:
        raise UnsupportedFormatError(f"{fmt} is not a supported image format")
    raise UnsupportedFormatError("unrecognized image format")


def encode_png(bitmap):
    """Bitmap -> PNG bytes (used when a blocked body needs a real image)."""
    buf = io.BytesIO()
    Image.fromarray(bitmap.pixels, "RGBA").save(buf, "PNG")
    return buf.getvalue()


def should_bypass(width, height):
    """True when the frame is too small to classify (paint it untouched)."""
    return width < BYPASS_EDGE or height < BYPASS_EDGE


def preprocess(bitmap):
    """Bitmap -> Tensor[4,224,224]: bilinear resize with half-pixel sample
    centers (no aspect preservation), split into R,G,B,A planes, /255.
    The trainer mirrors this exactly; change nothing here without it.
    """
    resized = kernels.bilinear_resize_rgba(bitmap.pixels, 224, 224)
    planes = np.ascontiguousarray(resized.transpose(2, 0, 1))
    planes /= np.float32(255.0)
    return Tensor(planes)


def classify(bitmap, model, threshold=0.5, bypass=True):
    """Run the detection unit on one bitmap.

    inference_micros covers preprocess + forward pass (decode excluded).
    bypass=False classifies regardless of size (dataset labeling wants a
    verdict for every image; the size bypass is a paint-latency policy).
    """
    if bypass and should_bypass(bitmap.width, bitmap.height):
        return Verdict(is_ad=False, p_ad=0.0, bypassed=True, inference_micros=0)
    t0 = time.perf_counter_ns()
    probs = network_forward(preprocess(bitmap), model)
    micros = (time.perf_counter_ns() - t0) // 1000
    p_ad = float(probs.array[AD_CLASS])
    return Verdict(
        is_ad=p_ad >= threshold,
        p_ad=p_ad,
        bypassed=False,
        inference_micros=int(micros),
    )
