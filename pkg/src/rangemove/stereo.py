"""Stereo matching energies from rectified image pairs.

Left pixel ``(x, y)`` at disparity ``d`` is matched against right pixel
``(x - d, y)``.  Matching costs use the Birchfield-Tomasi dissimilarity,
which compares each pixel against the linearly interpolated half-sample
range of the other image and is therefore insensitive to sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from .energy import EnergyModel, GraphTopology, LabelSpace
from .errors import ContractViolation
from .priors import make_prior


@dataclass(frozen=True)
class ImagePair:
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self):
        left = np.asarray(self.left, dtype=float)
        right = np.asarray(self.right, dtype=float)
        if left.ndim != 2 or left.shape != right.shape:
            raise ContractViolation(f"images must be 2-D and equal in size, got {left.shape} and {right.shape}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    @property
    def height(self) -> int:
        return self.left.shape[0]

    @property
    def width(self) -> int:
        return self.left.shape[1]


@dataclass(frozen=True)
class StereoParams:
    """Energy parameters.  With ``weight_low`` set, edges whose left-image
    intensity difference exceeds ``grad_threshold`` get ``weight_low``."""

    labels: int
    trunc: int
    weight: float
    prior: str = "tq"
    weight_low: Optional[float] = None
    grad_threshold: float = 10.0
    min_disparity: int = 0

    def __post_init__(self):
        if self.labels < 2 or self.trunc < 1:
            raise ContractViolation("need at least 2 disparities and T >= 1")
        if self.weight < 0 or (self.weight_low is not None and self.weight_low < 0):
            raise ContractViolation("weights must be nonnegative")

    @property
    def disparities(self) -> np.ndarray:
        return np.arange(self.labels) + self.min_disparity

    def edge_weights(self, grad: np.ndarray) -> np.ndarray:
        if self.weight_low is None:
            return np.full(len(grad), float(self.weight))
        return np.where(grad <= self.grad_threshold, float(self.weight), float(self.weight_low))


PRESETS = {
    "map": StereoParams(labels=30, trunc=6, weight=4.0),
    "venus": StereoParams(labels=20, trunc=3, weight=50.0),
    "sawtooth": StereoParams(labels=20, trunc=3, weight=20.0),
    "teddy": StereoParams(labels=60, trunc=8, weight=30.0, weight_low=10.0, grad_threshold=10.0),
    "cones": StereoParams(labels=60, trunc=8, weight=10.0),
    "kitti": StereoParams(labels=40, trunc=8, weight=20.0),
}


def preset(name: str, **overrides) -> StereoParams:
    try:
        base = PRESETS[name.lower()]
    except KeyError:
        raise ContractViolation(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(base, **overrides)


def _half_samples(row: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-pixel min and max over the pixel and its two half-sample neighbours."""
    left = np.concatenate([row[:, :1], row[:, :-1]], axis=1)
    right = np.concatenate([row[:, 1:], row[:, -1:]], axis=1)
    minus = 0.5 * (row + left)
    plus = 0.5 * (row + right)
    lo = np.minimum(np.minimum(minus, plus), row)
    hi = np.maximum(np.maximum(minus, plus), row)
    return lo, hi


def bt_cost_volume(pair: ImagePair, disparities) -> Tuple[np.ndarray, np.ndarray]:
    """BT dissimilarity for every pixel and disparity.

    Returns ``(cost, valid)``, both ``(height, width, len(disparities))``;
    ``valid`` is False where the matched right pixel falls outside the image.
    """
    L, R = pair.left, pair.right
    h, w = L.shape
    lmin, lmax = _half_samples(L)
    rmin, rmax = _half_samples(R)
    ds = np.asarray(disparities, dtype=np.int64)
    cost = np.zeros((h, w, len(ds)))
    valid = np.zeros((h, w, len(ds)), dtype=bool)
    xs = np.arange(w)
    for k, d in enumerate(ds):
        xr = xs - d
        ok = (xr >= 0) & (xr < w)
        if not ok.any():
            continue
        xl, xr = xs[ok], xr[ok]
        il, ir = L[:, xl], R[:, xr]
        d_lr = np.maximum(0.0, np.maximum(il - rmax[:, xr], rmin[:, xr] - il))
        d_rl = np.maximum(0.0, np.maximum(ir - lmax[:, xl], lmin[:, xl] - ir))
        cost[:, xl, k] = np.minimum(d_lr, d_rl)
        valid[:, xl, k] = True
    return cost, valid


def apply_boundary_rule(cost: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Give out-of-frame disparities the pixel's largest in-frame cost (0 if none)."""
    masked = np.where(valid, cost, -np.inf)
    worst = masked.max(axis=-1, keepdims=True)
    worst = np.where(np.isfinite(worst), worst, 0.0)
    return np.where(valid, cost, worst)


def bt_unary(pair: ImagePair, pixel: Tuple[int, int], d: int, disparities=None) -> float:
    """BT cost of left pixel ``(x, y)`` at disparity ``d``.

    Out-of-frame disparities get the largest in-frame cost over
    ``disparities`` (default ``0 .. width - 1``), which must contain ``d``.
    """
    x, y = pixel
    ds = np.arange(pair.width) if disparities is None else np.asarray(disparities, dtype=np.int64)
    hit = np.flatnonzero(ds == d)
    if not len(hit):
        raise ContractViolation(f"disparity {d} not in the disparity set")
    band = ImagePair(pair.left[y:y + 1], pair.right[y:y + 1])
    cost, valid = bt_cost_volume(band, ds)
    return float(apply_boundary_rule(cost, valid)[0, x, hit[0]])


def unary_table(pair: ImagePair, params: StereoParams) -> np.ndarray:
    cost, valid = bt_cost_volume(pair, params.disparities)
    return apply_boundary_rule(cost, valid).reshape(pair.height * pair.width, params.labels)


def build_stereo_model(pair: ImagePair, params: StereoParams) -> EnergyModel:
    """4-connected grid energy with BT unaries and weights from ``params``."""
    if pair.width <= int(params.disparities.max()):
        raise ContractViolation(f"image width {pair.width} must exceed the largest disparity")
    topo = GraphTopology.grid4(pair.width, pair.height)
    flat = pair.left.ravel()
    grad = np.abs(flat[topo.edges[:, 0]] - flat[topo.edges[:, 1]])
    prior = make_prior(params.prior, params.trunc, params.labels)
    return EnergyModel(topo, LabelSpace(params.labels), unary_table(pair, params), prior,
                       params.edge_weights(grad))


# --- synthetic pairs ---------------------------------------------------------


def shifted_ramp_pair(width: int = 64, height: int = 48, shift: int = 3) -> ImagePair:
    """Left image ``3x + y``; the right image is the left moved ``shift`` pixels left.

    The ramp continues past the right border, so every left pixel with
    ``x >= shift`` has an exact match at disparity ``shift``.
    """
    yy, xx = np.mgrid[0:height, 0:width]
    left = 3 * xx + yy
    right = 3 * (xx + shift) + yy
    top = max(int(left.max()), int(right.max()))
    if top > 255:
        raise ContractViolation("image too large for an 8-bit ramp")
    return ImagePair(left.astype(np.uint8), right.astype(np.uint8))


# --- image IO ---------------------------------------------------------------


def _pnm_tokens(data: bytes, count: int):
    vals, pos = [], 2
    while len(vals) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        vals.append(int(data[start:pos]))
    return vals, pos + 1


def to_luma(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=float)
    return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114


def read_pnm(path: Union[str, Path]) -> np.ndarray:
    """Read binary PGM (P5) or PPM (P6, converted to luma) with 8-bit samples."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise ContractViolation(f"{path}: only binary P5/P6 images are supported")
    (w, h, maxval), start = _pnm_tokens(data, 3)
    if maxval > 255:
        raise ContractViolation(f"{path}: only 8-bit images are supported")
    channels = 3 if magic == b"P6" else 1
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=start)
    img = raw.reshape(h, w, channels).astype(float)
    if maxval != 255:
        img *= 255.0 / maxval
    return img[..., 0] if channels == 1 else to_luma(img)


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Grayscale image as float array; PNG and friends need Pillow."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".ppm", ".pnm"):
        return read_pnm(path)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise ContractViolation(f"{path}: reading {path.suffix} files needs Pillow") from exc
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=float)
    return to_luma(arr)


def write_pgm(path: Union[str, Path], img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ContractViolation("PGM output must be 2-D")
    a = np.clip(img, 0, 255).astype(np.uint8)
    h, w = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(a.tobytes())


def disparity_image(labeling: np.ndarray, width: int, height: int, labels: int) -> np.ndarray:
    """Labels scaled by ``255 // (labels - 1)`` for viewing."""
    return (np.asarray(labeling).reshape(height, width) * (255 // (labels - 1))).astype(np.uint8)


def write_disparity(path, labeling, width: int, height: int, labels: int) -> None:
    write_pgm(path, disparity_image(labeling, width, height, labels))


def load_pair(left_path, right_path) -> ImagePair:
    return ImagePair(read_image(left_path), read_image(right_path))
