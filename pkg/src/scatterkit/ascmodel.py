"""Point-scatterer forward model on the sampled frequency grid.

A scatterer with amplitude a at (x, y) contributes a linear phase ramp
a * exp(-j*2*pi*(kx*x/W + ky*y/H)) to the spectrum; the complex chip is the
windowed inverse FFT of the summed spectrum. For integer positions this makes
the image an exact cyclic shift of the window's point-spread function, which
is what the position fitter exploits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DimMismatch, EmptyInput, EmptyRegion, InfeasiblePlacement,
                     OutOfBounds)
from .metrics import OrientedBox
from .raster import ComplexRaster, WindowRaster, _freeze
from .spectral import fft2d, ifft2d

FIT_DILATE_PX = 2
# below this many candidate*support products the direct (exact-tie) path is used
FIT_DIRECT_BUDGET = 2_000_000


@dataclass(frozen=True)
class FrequencyGrid:
    """Sample counts of the discrete (kx, ky) grid; one cell per image pixel."""

    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid dims must be positive, got {self.height}x{self.width}")


@dataclass(frozen=True)
class Scatterer:
    """Ideal point scatterer: position in pixel units, non-negative gain."""

    x: float
    y: float
    amplitude: float

    def __post_init__(self):
        if not np.isfinite([self.x, self.y, self.amplitude]).all():
            raise ValueError("scatterer fields must be finite")
        if self.amplitude < 0:
            raise ValueError(f"amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class SynthChip:
    """A synthesized chip together with its generating ground truth."""

    image: ComplexRaster
    truth: tuple[Scatterer, ...]
    box: OrientedBox
    class_name: str = "scatterer"
    difficulty: int = 0


def forward_field(scatterers: list[Scatterer], grid: FrequencyGrid) -> ComplexRaster:
    """Sum of linear phase ramps over the frequency grid."""
    if not scatterers:
        raise EmptyInput("forward field of zero scatterers")
    h, w = grid.height, grid.width
    ky = np.arange(h).reshape(-1, 1)
    kx = np.arange(w).reshape(1, -1)
    field = np.zeros((h, w), dtype=np.complex128)
    for s in scatterers:
        if not (0 <= s.x < w and 0 <= s.y < h):
            raise OutOfBounds(f"scatterer at ({s.x}, {s.y}) outside {w}x{h} grid")
        row = np.exp(-2j * np.pi * ky * (s.y / h))
        col = np.exp(-2j * np.pi * kx * (s.x / w))
        field += s.amplitude * (row * col)
    return ComplexRaster(field)


def synth_image(scatterers: list[Scatterer], grid: FrequencyGrid,
                window: WindowRaster) -> ComplexRaster:
    """Windowed inverse transform of the forward field."""
    if (window.height, window.width) != (grid.height, grid.width):
        raise DimMismatch(
            f"window {window.height}x{window.width} vs grid {grid.height}x{grid.width}")
    field = forward_field(scatterers, grid)
    return ComplexRaster(ifft2d(window.values * field.samples))


def base_psf(grid: FrequencyGrid, window: WindowRaster) -> np.ndarray:
    """|IFFT of the window|: the amplitude response of a unit scatterer at (0, 0)."""
    if (window.height, window.width) != (grid.height, grid.width):
        raise DimMismatch(
            f"window {window.height}x{window.width} vs grid {grid.height}x{grid.width}")
    return _freeze(np.abs(ifft2d(window.values.astype(np.complex128))))


def reconstruct(scatterer: Scatterer, grid: FrequencyGrid,
                window: WindowRaster) -> ComplexRaster:
    """Single-scatterer chip; identical to synth_image([s], ...)."""
    return synth_image([scatterer], grid, window)


@dataclass(frozen=True)
class FittedScatterer:
    """Integer-lattice fit result with its closed-form gain and residual."""

    x: float
    y: float
    amplitude: float
    residual: float


def _candidate_bbox(support: np.ndarray, h: int, w: int) -> tuple[int, int, int, int]:
    rows = np.flatnonzero(support.any(axis=1))
    cols = np.flatnonzero(support.any(axis=0))
    y0 = max(int(rows[0]) - FIT_DILATE_PX, 0)
    y1 = min(int(rows[-1]) + FIT_DILATE_PX, h - 1)
    x0 = max(int(cols[0]) - FIT_DILATE_PX, 0)
    x1 = min(int(cols[-1]) + FIT_DILATE_PX, w - 1)
    return y0, y1, x0, x1


def fit_scatterer(region: np.ndarray, grid: FrequencyGrid, window: WindowRaster,
                  refine: bool = False) -> FittedScatterer:
    """Least-squares fit of one shifted PSF to an extracted amplitude region.

    `region` is a full-frame array, zero off the region's support. The fit
    minimizes || region - a * psf(x0, y0) ||_2 over integer (x0, y0) in the
    support bounding box dilated by 2 px, with the gain a given in closed
    form; since the psf norm is shift-invariant this is equivalent to
    maximizing the correlation with the shifted psf. Ties resolve to the
    smallest (y0, x0) in row-major order.
    """
    region = np.asarray(region, dtype=np.float64)
    h, w = grid.height, grid.width
    if region.shape != (h, w):
        raise DimMismatch(f"region {region.shape} vs grid {h}x{w}")
    support = region > 0
    if not support.any():
        raise EmptyRegion("cannot fit a scatterer to an empty region")

    base = base_psf(grid, window)
    psf_sq = float(np.sum(base * base))
    y0, y1, x0, x1 = _candidate_bbox(support, h, w)
    n_cand = (y1 - y0 + 1) * (x1 - x0 + 1)

    sup_idx = np.flatnonzero(support.ravel())
    if n_cand * sup_idx.size <= FIT_DIRECT_BUDGET:
        sy, sx = np.unravel_index(sup_idx, (h, w))
        sv = region.ravel()[sup_idx]
        best_c, best_y, best_x = -1.0, y0, x0
        for cy in range(y0, y1 + 1):
            by = (sy - cy) % h
            for cx in range(x0, x1 + 1):
                c = float(np.dot(sv, base[by, (sx - cx) % w]))
                if c > best_c:
                    best_c, best_y, best_x = c, cy, cx
    else:
        # correlation theorem: ifft2(F(S) conj(F(P))) is the circular
        # cross-correlation sum_n S[n] P[n - m] with no extra scale
        corr = np.real(ifft2d(fft2d(region) * np.conj(fft2d(base))))
        crop = corr[y0:y1 + 1, x0:x1 + 1]
        flat = int(np.argmax(crop))  # first occurrence = row-major tie-break
        best_y = y0 + flat // crop.shape[1]
        best_x = x0 + flat % crop.shape[1]
        best_c = float(crop[flat // crop.shape[1], flat % crop.shape[1]])

    fx, fy = float(best_x), float(best_y)
    if refine:
        fy = best_y + _parabolic_offset(region, base, best_y, best_x, axis=0, h=h, w=w)
        fx = best_x + _parabolic_offset(region, base, best_y, best_x, axis=1, h=h, w=w)

    gain = best_c / psf_sq if psf_sq > 0 else 0.0
    resid_sq = float(np.sum(region * region)) - 2 * gain * best_c + gain * gain * psf_sq
    return FittedScatterer(x=fx, y=fy, amplitude=gain,
                           residual=float(np.sqrt(max(resid_sq, 0.0))))


def _corr_at(region: np.ndarray, base: np.ndarray, cy: int, cx: int,
             h: int, w: int) -> float:
    return float(np.sum(region * np.roll(base, (cy % h, cx % w), axis=(0, 1))))


def _parabolic_offset(region: np.ndarray, base: np.ndarray, cy: int, cx: int,
                      axis: int, h: int, w: int) -> float:
    """Quadratic peak interpolation along one axis, clamped to +-0.5 px."""
    if axis == 0:
        lo = _corr_at(region, base, cy - 1, cx, h, w)
        mid = _corr_at(region, base, cy, cx, h, w)
        hi = _corr_at(region, base, cy + 1, cx, h, w)
    else:
        lo = _corr_at(region, base, cy, cx - 1, h, w)
        mid = _corr_at(region, base, cy, cx, h, w)
        hi = _corr_at(region, base, cy, cx + 1, h, w)
    denom = lo - 2.0 * mid + hi
    if denom >= 0 or abs(denom) < 1e-300:
        return 0.0
    off = 0.5 * (lo - hi) / denom
    return float(np.clip(off, -0.5, 0.5))


def apply_speckle(image: ComplexRaster, rng: np.random.Generator) -> ComplexRaster:
    """Multiplicative exponential speckle; phase is preserved."""
    gains = rng.exponential(1.0, size=image.samples.shape)
    return ComplexRaster(image.samples * gains)


def _enclosing_box(positions: np.ndarray, theta: float, margin: float) -> OrientedBox:
    center = positions.mean(axis=0)
    u = np.array([np.cos(theta), np.sin(theta)])
    v = np.array([-np.sin(theta), np.cos(theta)])
    rel = positions - center
    hw = float(np.max(np.abs(rel @ u))) + margin
    hh = float(np.max(np.abs(rel @ v))) + margin
    corners = np.array([
        center + u * hw + v * hh,
        center - u * hw + v * hh,
        center - u * hw - v * hh,
        center + u * hw - v * hh,
    ])
    return OrientedBox(corners)


def synth_target(n_scatterers: int, grid: FrequencyGrid, window: WindowRaster,
                 rng: np.random.Generator,
                 amplitude_range: tuple[float, float] = (0.5, 1.5),
                 min_separation: float = 3.0, border_margin: float = 4.0,
                 box_margin: float = 3.0,
                 speckle: bool = False) -> SynthChip:
    """Draw a random scatterer layout and synthesize its chip + annotation.

    Positions are uniform with a border margin and pairwise minimum
    separation (rejection-sampled; raises InfeasiblePlacement after 1000
    failed draws for a point). The annotation is a randomly oriented
    rectangle enclosing all scatterers with a margin, re-drawn axis-aligned
    if the rotated one would leave the image.
    """
    if n_scatterers < 1:
        raise ValueError(f"need at least one scatterer, got {n_scatterers}")
    h, w = grid.height, grid.width
    if w - 2 * border_margin <= 0 or h - 2 * border_margin <= 0:
        raise InfeasiblePlacement(f"{w}x{h} chip too small for {border_margin}px margins")

    placed: list[tuple[float, float]] = []
    for _ in range(n_scatterers):
        for _attempt in range(1000):
            x = float(rng.uniform(border_margin, w - border_margin))
            y = float(rng.uniform(border_margin, h - border_margin))
            if all((x - px) ** 2 + (y - py) ** 2 >= min_separation ** 2
                   for px, py in placed):
                placed.append((x, y))
                break
        else:
            raise InfeasiblePlacement(
                f"could not place scatterer {len(placed) + 1}/{n_scatterers} "
                f"after 1000 draws")

    lo, hi = amplitude_range
    scatterers = tuple(
        Scatterer(x=x, y=y, amplitude=float(rng.uniform(lo, hi))) for x, y in placed)

    positions = np.array(placed)
    box = None
    for _attempt in range(50):
        theta = float(rng.uniform(0.0, np.pi))
        cand = _enclosing_box(positions, theta, box_margin)
        c = cand.corners
        if (c[:, 0] >= 0).all() and (c[:, 0] < w).all() and \
           (c[:, 1] >= 0).all() and (c[:, 1] < h).all():
            box = cand
            break
    if box is None:
        box = _enclosing_box(positions, 0.0, box_margin)

    image = synth_image(list(scatterers), grid, window)
    if speckle:
        image = apply_speckle(image, rng)
    return SynthChip(image=image, truth=scatterers, box=box)
