"""Numeric conditioning artifacts consumed by the generation tools.

Cross-attention bias grids carry a positive constant inside each object's
box region and a large negative constant elsewhere; region masks split
the latent grid into per-object inner/outer partitions for the
box-constrained update loss; concept embeddings are averaged into one
subject embedding.  Grids rasterize boxes by the cell-center rule and
masks downsample by >= 50% coverage.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, EmptyMask, LengthMismatch, ZeroAreaAtResolution
from .layout import BBox, SceneLayout

ALPHA_PLUS_DEFAULT = 2.5
ALPHA_MINUS_DEFAULT = -10000.0
LATENT_DOWNSAMPLE_DEFAULT = 8


@dataclass(frozen=True)
class GuidanceConfig:
    alpha_plus: float = ALPHA_PLUS_DEFAULT
    alpha_minus: float = ALPHA_MINUS_DEFAULT
    latent_downsample: int = LATENT_DOWNSAMPLE_DEFAULT

    def __post_init__(self) -> None:
        if not (self.alpha_plus > 0 > self.alpha_minus):
            raise ValueError("alpha_plus must be positive and alpha_minus negative")
        if self.latent_downsample < 1:
            raise ValueError("latent_downsample must be >= 1")

    def to_dict(self) -> dict:
        return {
            "alpha_plus": self.alpha_plus,
            "alpha_minus": self.alpha_minus,
            "latent_downsample": self.latent_downsample,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GuidanceConfig":
        return cls(
            alpha_plus=data.get("alpha_plus", ALPHA_PLUS_DEFAULT),
            alpha_minus=data.get("alpha_minus", ALPHA_MINUS_DEFAULT),
            latent_downsample=data.get("latent_downsample", LATENT_DOWNSAMPLE_DEFAULT),
        )


@dataclass(frozen=True)
class CharSpan:
    """Character range into the prompt; tokenizer mapping is the tool's job."""

    start: int
    end: int

    def to_list(self) -> list[int]:
        return [self.start, self.end]


@dataclass
class AttentionBias:
    """A bias grid shared by one object's word spans.

    Every cell is exactly alpha_plus (inside the box region) or
    alpha_minus (outside).  ``step_range`` optionally limits which
    denoising steps a tool server applies the bias at; None means all.
    """

    grid: np.ndarray
    spans: list[CharSpan] = field(default_factory=list)
    alpha_plus: float = ALPHA_PLUS_DEFAULT
    alpha_minus: float = ALPHA_MINUS_DEFAULT
    downsample: int = LATENT_DOWNSAMPLE_DEFAULT
    step_range: tuple[int, int] | None = None

    @property
    def foreground_cells(self) -> int:
        return int(np.count_nonzero(self.grid == self.alpha_plus))

    def to_payload(self) -> dict:
        data = self.grid.astype("<f4").tobytes(order="C")
        return {
            "kind": "attention_bias",
            "height": int(self.grid.shape[0]),
            "width": int(self.grid.shape[1]),
            "downsample": self.downsample,
            "alpha_plus": self.alpha_plus,
            "alpha_minus": self.alpha_minus,
            "spans": [s.to_list() for s in self.spans],
            "step_range": list(self.step_range) if self.step_range else None,
            "data": base64.b64encode(data).decode("ascii"),
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AttentionBias":
        if payload.get("kind") != "attention_bias":
            raise ValueError("payload is not an attention bias artifact")
        raw = base64.b64decode(payload["data"])
        grid = np.frombuffer(raw, dtype="<f4").reshape(payload["height"], payload["width"])
        step_range = payload.get("step_range")
        return cls(
            grid=grid.astype(np.float32),
            spans=[CharSpan(s, e) for s, e in payload.get("spans", [])],
            alpha_plus=payload["alpha_plus"],
            alpha_minus=payload["alpha_minus"],
            downsample=payload["downsample"],
            step_range=tuple(step_range) if step_range else None,
        )


def _cell_center_mask(box: BBox, canvas: tuple[int, int], downsample: int) -> np.ndarray:
    """Boolean grid: True where the cell center falls inside the box."""
    cw, ch = canvas
    grid_w, grid_h = cw // downsample, ch // downsample
    if grid_w < 1 or grid_h < 1:
        raise ValueError(f"canvas {canvas} too small for downsample {downsample}")
    centers_x = (np.arange(grid_w) + 0.5) * downsample
    centers_y = (np.arange(grid_h) + 0.5) * downsample
    inside_x = (centers_x >= box.x) & (centers_x < box.right)
    inside_y = (centers_y >= box.y) & (centers_y < box.bottom)
    return inside_y[:, None] & inside_x[None, :]


def attention_bias_for(
    box: BBox,
    canvas: tuple[int, int],
    config: GuidanceConfig,
    spans: list[CharSpan] | None = None,
) -> AttentionBias:
    """Bias grid for one box: alpha_plus where cell centers fall inside it.

    Object words and their attribute words share the same box, so one
    grid serves all the spans passed in.
    """
    cw, ch = canvas
    if box.x < 0 or box.y < 0 or box.right > cw or box.bottom > ch:
        raise ValueError(f"box {box} outside canvas {canvas}")
    mask = _cell_center_mask(box, canvas, config.latent_downsample)
    if not mask.any():
        raise ZeroAreaAtResolution(
            f"box {box} covers no cell at downsample {config.latent_downsample}"
        )
    grid = np.where(mask, config.alpha_plus, config.alpha_minus).astype(np.float32)
    return AttentionBias(
        grid=grid,
        spans=list(spans or []),
        alpha_plus=config.alpha_plus,
        alpha_minus=config.alpha_minus,
        downsample=config.latent_downsample,
    )


def edit_guidance_from_mask(mask: np.ndarray, config: GuidanceConfig) -> AttentionBias:
    """Downsample a pixel mask into a bias grid: a cell is foreground iff
    at least half its pixels are masked (ties keep the cell)."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError("mask must be a 2D array")
    if not mask.any():
        raise EmptyMask("edit mask has no foreground pixels")
    ds = config.latent_downsample
    h, w = mask.shape
    grid_h, grid_w = h // ds, w // ds
    trimmed = mask[: grid_h * ds, : grid_w * ds].astype(bool)
    blocks = trimmed.reshape(grid_h, ds, grid_w, ds)
    coverage = blocks.sum(axis=(1, 3)) / (ds * ds)
    cells = coverage >= 0.5
    grid = np.where(cells, config.alpha_plus, config.alpha_minus).astype(np.float32)
    return AttentionBias(
        grid=grid,
        alpha_plus=config.alpha_plus,
        alpha_minus=config.alpha_minus,
        downsample=ds,
    )


@dataclass
class RegionMasks:
    """Per-object inner/outer binary partitions of the latent grid."""

    resolution: tuple[int, int]  # (width, height) in cells
    inner: list[np.ndarray] = field(default_factory=list)
    captions: list[str] = field(default_factory=list)

    def outer(self, index: int) -> np.ndarray:
        return ~self.inner[index]

    def to_payload(self) -> dict:
        return {
            "kind": "region_masks",
            "width": self.resolution[0],
            "height": self.resolution[1],
            "captions": list(self.captions),
            "inner": [encode_bitmask(mask) for mask in self.inner],
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "RegionMasks":
        if payload.get("kind") != "region_masks":
            raise ValueError("payload is not a region mask artifact")
        shape = (payload["height"], payload["width"])
        return cls(
            resolution=(payload["width"], payload["height"]),
            inner=[decode_bitmask(m, shape) for m in payload["inner"]],
            captions=list(payload.get("captions", [])),
        )


def box_constraint_regions(layout: SceneLayout, resolution: int | tuple[int, int]) -> RegionMasks:
    """Inner/outer masks per layout entry at the requested grid resolution."""
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    grid_w, grid_h = resolution
    cw, ch = layout.canvas
    # express the grid as a downsample of the canvas; non-integer ratios use
    # the continuous cell-center test directly
    inner: list[np.ndarray] = []
    centers_x = (np.arange(grid_w) + 0.5) * (cw / grid_w)
    centers_y = (np.arange(grid_h) + 0.5) * (ch / grid_h)
    for entry in layout.entries:
        box = entry.box
        inside_x = (centers_x >= box.x) & (centers_x < box.right)
        inside_y = (centers_y >= box.y) & (centers_y < box.bottom)
        inner.append(inside_y[:, None] & inside_x[None, :])
    return RegionMasks(
        resolution=resolution,
        inner=inner,
        captions=[e.caption for e in layout.entries],
    )


# --- binary mask wire encoding ----------------------------------------------------


def encode_bitmask(mask: np.ndarray) -> str:
    """Pack a boolean mask into base64 row-major bits."""
    packed = np.packbits(np.asarray(mask, dtype=bool), axis=None)
    return base64.b64encode(packed.tobytes()).decode("ascii")


def decode_bitmask(data: str, shape: tuple[int, int]) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(data), dtype=np.uint8)
    bits = np.unpackbits(raw)[: shape[0] * shape[1]]
    return bits.reshape(shape).astype(bool)


def mask_payload(mask: np.ndarray) -> dict:
    mask = np.asarray(mask, dtype=bool)
    return {
        "kind": "mask",
        "height": int(mask.shape[0]),
        "width": int(mask.shape[1]),
        "data": encode_bitmask(mask),
    }


def mask_from_payload(payload: dict) -> np.ndarray:
    if payload.get("kind") != "mask":
        raise ValueError("payload is not a mask artifact")
    return decode_bitmask(payload["data"], (payload["height"], payload["width"]))


# --- embeddings --------------------------------------------------------------------


def average_embeddings(vectors: list) -> list[float]:
    """Element-wise arithmetic mean of equal-length embedding vectors."""
    if not vectors:
        raise EmptyInput("average_embeddings requires at least one vector")
    arrays = [np.asarray(v, dtype=np.float64) for v in vectors]
    length = arrays[0].shape
    if len(length) != 1 or length[0] == 0:
        raise ValueError("embeddings must be non-empty 1D vectors")
    for arr in arrays[1:]:
        if arr.shape != length:
            raise LengthMismatch(f"embedding lengths differ: {arr.shape[0]} vs {length[0]}")
    stacked = np.stack(arrays)
    if not np.isfinite(stacked).all():
        raise ValueError("embeddings must contain finite values")
    return np.mean(stacked, axis=0).tolist()


def serialize_guidance(artifact: AttentionBias | RegionMasks) -> str:
    """One-line JSON sidecar form of a guidance artifact."""
    return json.dumps(artifact.to_payload(), sort_keys=True, separators=(",", ":"))


def deserialize_guidance(text: str) -> AttentionBias | RegionMasks:
    payload = json.loads(text)
    kind = payload.get("kind")
    if kind == "attention_bias":
        return AttentionBias.from_payload(payload)
    if kind == "region_masks":
        return RegionMasks.from_payload(payload)
    raise ValueError(f"unknown guidance artifact kind {kind!r}")
