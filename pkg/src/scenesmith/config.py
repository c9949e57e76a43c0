"""Engine configuration: canvas, thresholds, endpoints, storage, seeds.

Configs load from a flat YAML document; any scalar key can be overridden
through environment variables prefixed ``SCENESMITH_`` (upper-cased key).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .guidance import GuidanceConfig
from .layout import DELTA_NEAR, EPS_CONTACT, TAU_OVERLAP
from .lexicon import Lexicons
from .policy import DEFAULT_IMAGES_PER_CONCEPT, DEFAULT_MAX_EDIT_ROUNDS
from .protocol import ToolEndpoint, ToolKind

ENV_PREFIX = "SCENESMITH_"


@dataclass
class EngineConfig:
    canvas: tuple[int, int] = (512, 512)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    trivial_attributes_path: str | None = None
    trivial_relations_path: str | None = None
    endpoints: dict[str, ToolEndpoint] = field(default_factory=dict)
    max_edit_rounds: int = DEFAULT_MAX_EDIT_ROUNDS
    images_per_concept: int = DEFAULT_IMAGES_PER_CONCEPT
    tau_overlap: float = TAU_OVERLAP
    eps_contact: int = EPS_CONTACT
    delta_near: int = DELTA_NEAR
    mock_mode: bool = True
    mock_suite_name: str = "default"
    mock_fault_colors: dict[int, str] = field(default_factory=dict)
    storage_root: Path = Path("./sessions")
    seed: int = 0
    fan_out: int = 4
    image_transport: str = "b64"  # b64 | path
    region_mask_resolution: int = 64

    def __post_init__(self) -> None:
        self.storage_root = Path(self.storage_root)
        if self.image_transport not in ("b64", "path"):
            raise ValueError("image_transport must be 'b64' or 'path'")
        if not self.mock_mode:
            missing = [k.value for k in ToolKind if k.value not in self.endpoints]
            if missing:
                raise ValueError(f"non-mock config is missing endpoints for: {', '.join(missing)}")

    def lexicons(self) -> Lexicons:
        if self.trivial_attributes_path and self.trivial_relations_path:
            return Lexicons.from_files(self.trivial_attributes_path, self.trivial_relations_path)
        return Lexicons.default()

    def endpoint_for(self, kind: str | ToolKind) -> ToolEndpoint:
        kind = ToolKind(kind)
        if kind.value in self.endpoints:
            return self.endpoints[kind.value]
        if self.mock_mode:
            return ToolEndpoint(kind=kind, target=f"mock:{self.mock_suite_name}", backoff_s=(0.0,))
        raise ValueError(f"no endpoint configured for tool kind {kind.value}")

    def with_storage(self, storage_root: str | Path) -> "EngineConfig":
        return replace(self, storage_root=Path(storage_root))

    def to_dict(self) -> dict:
        return {
            "canvas_width": self.canvas[0],
            "canvas_height": self.canvas[1],
            "alpha_plus": self.guidance.alpha_plus,
            "alpha_minus": self.guidance.alpha_minus,
            "latent_downsample": self.guidance.latent_downsample,
            "trivial_attributes_path": self.trivial_attributes_path,
            "trivial_relations_path": self.trivial_relations_path,
            "endpoints": {
                k: {
                    "target": e.target,
                    "timeout_ms": e.timeout_ms,
                    "max_retries": e.max_retries,
                    "backoff_s": list(e.backoff_s),
                }
                for k, e in self.endpoints.items()
            },
            "max_edit_rounds": self.max_edit_rounds,
            "images_per_concept": self.images_per_concept,
            "tau_overlap": self.tau_overlap,
            "eps_contact": self.eps_contact,
            "delta_near": self.delta_near,
            "mock_mode": self.mock_mode,
            "mock_suite_name": self.mock_suite_name,
            "mock_fault_colors": {str(k): v for k, v in self.mock_fault_colors.items()},
            "storage_root": str(self.storage_root),
            "seed": self.seed,
            "fan_out": self.fan_out,
            "image_transport": self.image_transport,
            "region_mask_resolution": self.region_mask_resolution,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        endpoints = {}
        for kind_value, spec in (data.get("endpoints") or {}).items():
            endpoints[kind_value] = ToolEndpoint(
                kind=ToolKind(kind_value),
                target=spec["target"],
                timeout_ms=spec.get("timeout_ms", 10_000),
                max_retries=spec.get("max_retries", 2),
                backoff_s=tuple(spec.get("backoff_s", (0.05, 0.2, 0.5))),
            )
        return cls(
            canvas=(data.get("canvas_width", 512), data.get("canvas_height", 512)),
            guidance=GuidanceConfig(
                alpha_plus=data.get("alpha_plus", 2.5),
                alpha_minus=data.get("alpha_minus", -10000.0),
                latent_downsample=data.get("latent_downsample", 8),
            ),
            trivial_attributes_path=data.get("trivial_attributes_path"),
            trivial_relations_path=data.get("trivial_relations_path"),
            endpoints=endpoints,
            max_edit_rounds=data.get("max_edit_rounds", DEFAULT_MAX_EDIT_ROUNDS),
            images_per_concept=data.get("images_per_concept", DEFAULT_IMAGES_PER_CONCEPT),
            tau_overlap=data.get("tau_overlap", TAU_OVERLAP),
            eps_contact=data.get("eps_contact", EPS_CONTACT),
            delta_near=data.get("delta_near", DELTA_NEAR),
            mock_mode=data.get("mock_mode", True),
            mock_suite_name=data.get("mock_suite_name", "default"),
            mock_fault_colors={
                int(k): v for k, v in (data.get("mock_fault_colors") or {}).items()
            },
            storage_root=Path(data.get("storage_root", "./sessions")),
            seed=data.get("seed", 0),
            fan_out=data.get("fan_out", 4),
            image_transport=data.get("image_transport", "b64"),
            region_mask_resolution=data.get("region_mask_resolution", 64),
        )


def _coerce(value: str, like) -> object:
    if isinstance(like, bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def apply_env_overrides(data: dict, environ: dict | None = None) -> dict:
    """Override flat scalar keys from SCENESMITH_* environment variables."""
    environ = environ if environ is not None else dict(os.environ)
    defaults = EngineConfig().to_dict()
    for key, default in defaults.items():
        if isinstance(default, (dict, list)) or default is None:
            continue
        env_key = ENV_PREFIX + key.upper()
        if env_key in environ:
            data[key] = _coerce(environ[env_key], default)
    return data


def load_config(path: str | Path | None = None, environ: dict | None = None) -> EngineConfig:
    data: dict = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded is not None:
            if not isinstance(loaded, dict):
                raise ValueError("config file must contain a key/value mapping")
            data = loaded
    data = apply_env_overrides(data, environ)
    return EngineConfig.from_dict(data)
