"""Run configuration: defaults, flat-text load/emit, hashing, manifests.

The canonical form is a key-sorted ``key = value`` document; the config hash
is the SHA-256 of those bytes. Defaults reproduce the reference parameter
set: tau = -3 dB, eps = 1e-6, n_max = 20, k = 9, sigma = 1, loss weight 1,
and DoG (1.0, 1.6, |D| > 5, top 30).
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decouple import DecoupleParams
from .errors import BadConfigField
from .keypoints import DogParams
from .supervision import SupervisionParams

MANIFEST_NAME = "run-manifest.txt"


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of the pipeline in one immutable bundle."""

    decouple: DecoupleParams = field(default_factory=DecoupleParams)
    dog: DogParams = field(default_factory=DogParams)
    supervision: SupervisionParams = field(default_factory=SupervisionParams)
    keypoint_k: int = 9
    pool: str = "max"
    window_nbar: int = 4
    window_sidelobe_db: float = -35.0
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.keypoint_k < 1:
            raise ValueError(f"keypoint_k must be >= 1, got {self.keypoint_k}")
        if self.pool not in ("max", "avg"):
            raise ValueError(f"pool must be 'max' or 'avg', got {self.pool!r}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")


# flat key -> (section attr or None, field name, type)
_FIELDS: dict[str, tuple[str | None, str, type]] = {
    "decouple.tau_db": ("decouple", "tau_db", float),
    "decouple.eps": ("decouple", "eps", float),
    "decouple.n_max": ("decouple", "n_max", int),
    "decouple.grow_floor_db": ("decouple", "grow_floor_db", float),
    "decouple.min_peak_ratio": ("decouple", "min_peak_ratio", float),
    "dog.sigma1": ("dog", "sigma1", float),
    "dog.sigma2": ("dog", "sigma2", float),
    "dog.threshold": ("dog", "threshold", float),
    "dog.top_n": ("dog", "top_n", int),
    "supervision.sigma": ("supervision", "sigma", float),
    "supervision.loss_weight": ("supervision", "loss_weight", float),
    "supervision.levels": ("supervision", "levels", int),
    "keypoint_k": (None, "keypoint_k", int),
    "pool": (None, "pool", str),
    "window.nbar": (None, "window_nbar", int),
    "window.sidelobe_db": (None, "window_sidelobe_db", float),
    "master_seed": (None, "master_seed", int),
    "threads": (None, "threads", int),
}


def _get(config: RunConfig, key: str):
    section, name, _ = _FIELDS[key]
    obj = getattr(config, section) if section else config
    return getattr(obj, name)


def _canon_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def canonical_text(config: RunConfig) -> str:
    """Key-sorted flat rendering; identical configs render identically."""
    lines = [f"{key} = {_canon_value(_get(config, key))}" for key in sorted(_FIELDS)]
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(canonical_text(config).encode("ascii")).hexdigest()


def load_config(path: str | Path | None = None,
                overrides: dict[str, object] | None = None) -> RunConfig:
    """Defaults, then file values, then explicit overrides (flat keys)."""
    values = {key: _get(RunConfig(), key) for key in _FIELDS}
    if path is not None:
        for line_no, raw in enumerate(
                Path(path).read_text(encoding="ascii").splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise BadConfigField(f"line {line_no}", f"expected 'key = value': {raw!r}")
            key, _, text = (t.strip() for t in line.partition("="))
            values[key] = _coerce(key, text)
    for key, val in (overrides or {}).items():
        if key not in _FIELDS:
            raise BadConfigField(key, "unknown configuration field")
        values[key] = val
    return _build(values)


def _coerce(key: str, text: str):
    if key not in _FIELDS:
        raise BadConfigField(key, "unknown configuration field")
    typ = _FIELDS[key][2]
    try:
        return typ(text)
    except ValueError:
        raise BadConfigField(key, f"cannot parse {text!r} as {typ.__name__}") from None


def _build(values: dict) -> RunConfig:
    def section(name):
        return {fname: values[key] for key, (sec, fname, _) in _FIELDS.items()
                if sec == name}

    top = {fname: values[key] for key, (sec, fname, _) in _FIELDS.items() if sec is None}
    try:
        return RunConfig(decouple=DecoupleParams(**section("decouple")),
                         dog=DogParams(**section("dog")),
                         supervision=SupervisionParams(**section("supervision")),
                         **top)
    except ValueError as exc:
        raise BadConfigField("(validation)", str(exc)) from None


def emit_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(canonical_text(config), encoding="ascii")


def emit_manifest(config: RunConfig, timings: dict[str, float],
                  path: str | Path) -> None:
    """Reproducibility record: config hash, seed, versions, stage timings."""
    lines = [
        f"config_sha256 = {config_hash(config)}",
        f"master_seed = {config.master_seed}",
        f"python = {sys.version.split()[0]}",
        f"numpy = {np.__version__}",
    ]
    for stage in sorted(timings):
        lines.append(f"timing_ms.{stage} = {timings[stage]:.3f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
