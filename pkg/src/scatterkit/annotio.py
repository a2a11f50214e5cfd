"""Annotation text formats, chip cropping, and the annotation pipelines.

Base format is one instance per line:

    x1 y1 x2 y2 x3 y3 x4 y4 class_name difficulty

optionally extended with a literal ``kp`` token followed by 2k keypoint
coordinates. Floats are written with 6 significant digits. Prediction files
("image_id class_id score x1 .. y4") and scatterer truth sidecars
("x y amplitude") share the same numeric convention.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ascmodel import FrequencyGrid, Scatterer, fit_scatterer
from .chipio import read_chip, write_chip
from .decouple import DecoupleParams, decouple_steps
from .errors import (BadKeypointCount, BoxOutsideImage, MalformedLine,
                     OutOfBounds, ScatterKitError)
from .keypoints import (DogParams, KeypointSet, cluster_keypoints, dog_keypoints,
                        instance_seed, to_global)
from .metrics import Detection, OrientedBox
from .raster import AmplitudeRaster, ComplexRaster, amplitude
from .spectral import taylor_window_2d

log = logging.getLogger("scatterkit")

FLOAT_FMT = "{:.6g}"


def _fmt(v: float) -> str:
    return FLOAT_FMT.format(float(v))


@dataclass(frozen=True)
class InstanceAnnotation:
    """One labeled instance: rotated box, class, difficulty, optional keypoints."""

    box: OrientedBox
    class_name: str
    difficulty: int = 0
    keypoints: KeypointSet | None = None

    def __post_init__(self):
        if not self.class_name or any(c.isspace() for c in self.class_name):
            raise ValueError(f"bad class name {self.class_name!r}")
        if self.difficulty not in (0, 1):
            raise ValueError(f"difficulty must be 0 or 1, got {self.difficulty}")
        if self.keypoints is not None:
            c = self.box.corners
            x0, y0 = c[:, 0].min() - 2.0, c[:, 1].min() - 2.0
            x1, y1 = c[:, 0].max() + 2.0, c[:, 1].max() + 2.0
            for x, y in self.keypoints.points:
                if not (x0 <= x <= x1 and y0 <= y <= y1):
                    raise OutOfBounds(
                        f"keypoint ({x}, {y}) outside box AABB "
                        f"[{x0}, {x1}]x[{y0}, {y1}]")


def _ascii_lines(path: str | Path):
    with open(path, "r", encoding="ascii") as fh:
        try:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if line:
                    yield line_no, line
        except UnicodeDecodeError as exc:
            raise MalformedLine(0, f"not ascii text: {exc}") from None


def parse_annotation(path: str | Path) -> list[InstanceAnnotation]:
    """Read one annotation file; blank lines are ignored."""
    return [_parse_line(line, line_no) for line_no, line in _ascii_lines(path)]


def _parse_line(line: str, line_no: int) -> InstanceAnnotation:
    tokens = line.split()
    if len(tokens) < 10:
        raise MalformedLine(line_no, f"expected >= 10 tokens, got {len(tokens)}")
    try:
        nums = [float(t) for t in tokens[:8]]
    except ValueError as exc:
        raise MalformedLine(line_no, f"bad corner value: {exc}") from None
    class_name = tokens[8]
    try:
        difficulty = int(tokens[9])
    except ValueError:
        raise MalformedLine(line_no, f"bad difficulty {tokens[9]!r}") from None

    kps = None
    rest = tokens[10:]
    if rest:
        if rest[0] != "kp":
            raise MalformedLine(line_no, f"unknown trailing token {rest[0]!r}")
        try:
            coords = [float(t) for t in rest[1:]]
        except ValueError as exc:
            raise MalformedLine(line_no, f"bad keypoint value: {exc}") from None
        if not coords or len(coords) % 2:
            raise BadKeypointCount(
                line_no, f"keypoint list must hold 2k numbers, got {len(coords)}")
        pts = tuple((coords[i], coords[i + 1]) for i in range(0, len(coords), 2))
        kps = KeypointSet(points=pts, k=len(pts))

    try:
        box = OrientedBox(np.array(nums).reshape(4, 2))
        return InstanceAnnotation(box=box, class_name=class_name,
                                  difficulty=difficulty, keypoints=kps)
    except (ScatterKitError, ValueError) as exc:
        raise MalformedLine(line_no, str(exc)) from None


def format_annotation(annots: list[InstanceAnnotation]) -> str:
    lines = []
    for a in annots:
        parts = [_fmt(v) for v in a.box.corners.ravel()]
        parts += [a.class_name, str(a.difficulty)]
        if a.keypoints is not None:
            parts.append("kp")
            for x, y in a.keypoints.points:
                parts += [_fmt(x), _fmt(y)]
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def write_annotation(annots: list[InstanceAnnotation], path: str | Path) -> None:
    Path(path).write_text(format_annotation(annots), encoding="ascii")


def parse_truth(path: str | Path) -> list[Scatterer]:
    """Read a scatterer truth sidecar (``x y amplitude`` per line)."""
    out = []
    for line_no, line in _ascii_lines(path):
        tokens = line.split()
        if len(tokens) != 3:
            raise MalformedLine(line_no, f"expected 3 tokens, got {len(tokens)}")
        try:
            x, y, a = (float(t) for t in tokens)
            out.append(Scatterer(x=x, y=y, amplitude=a))
        except ValueError as exc:
            raise MalformedLine(line_no, str(exc)) from None
    return out


def write_truth(scatterers: list[Scatterer], path: str | Path) -> None:
    lines = [f"{_fmt(s.x)} {_fmt(s.y)} {_fmt(s.amplitude)}" for s in scatterers]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="ascii")


def parse_predictions(path: str | Path) -> dict[str, list[Detection]]:
    """Read a prediction file into per-image detection lists."""
    out: dict[str, list[Detection]] = {}
    for line_no, line in _ascii_lines(path):
        tokens = line.split()
        if len(tokens) != 11:
            raise MalformedLine(line_no, f"expected 11 tokens, got {len(tokens)}")
        image_id = tokens[0]
        try:
            class_id = int(tokens[1])
            score = float(tokens[2])
            nums = [float(t) for t in tokens[3:]]
            det = Detection(box=OrientedBox(np.array(nums).reshape(4, 2)),
                            score=score, class_id=class_id)
        except (ScatterKitError, ValueError) as exc:
            raise MalformedLine(line_no, str(exc)) from None
        out.setdefault(image_id, []).append(det)
    return out


def crop_chip(image: ComplexRaster, box: OrientedBox) -> tuple[ComplexRaster, tuple[int, int]]:
    """Axis-aligned crop covering the rotated box, clamped to image bounds."""
    c = box.corners
    x0 = max(int(np.floor(c[:, 0].min())), 0)
    y0 = max(int(np.floor(c[:, 1].min())), 0)
    x1 = min(int(np.ceil(c[:, 0].max())), image.width)
    y1 = min(int(np.ceil(c[:, 1].max())), image.height)
    if x1 <= x0 or y1 <= y0:
        raise BoxOutsideImage(
            f"box AABB [{c[:, 0].min():.6g}, {c[:, 0].max():.6g}]x"
            f"[{c[:, 1].min():.6g}, {c[:, 1].max():.6g}] misses the "
            f"{image.width}x{image.height} image")
    return ComplexRaster(image.samples[y0:y1, x0:x1].copy()), (x0, y0)


@dataclass(frozen=True)
class DatasetIndex:
    """Paired image/annotation paths; every file verified to exist."""

    entries: tuple[tuple[Path, Path], ...]
    root: Path

    def __post_init__(self):
        for img, ann in self.entries:
            if not img.is_file():
                raise FileNotFoundError(f"missing image {img}")
            if not ann.is_file():
                raise FileNotFoundError(f"missing annotation {ann}")


def index_dataset(images_dir: str | Path, annots_dir: str | Path) -> DatasetIndex:
    """Pair every image in images_dir with the same-stem .txt annotation."""
    images_dir, annots_dir = Path(images_dir), Path(annots_dir)
    if not images_dir.is_dir():
        raise FileNotFoundError(f"not a directory: {images_dir}")
    if not annots_dir.is_dir():
        raise FileNotFoundError(f"not a directory: {annots_dir}")
    imgs = sorted(p for p in images_dir.iterdir()
                  if p.suffix in (".csar", ".pgm") and p.is_file())
    entries = tuple((img, annots_dir / (img.stem + ".txt")) for img in imgs)
    return DatasetIndex(entries=entries, root=images_dir.parent)


@dataclass
class RunSummary:
    """Per-instance timing and failure accounting for one annotation run."""

    instances: int = 0
    failures: int = 0
    instance_ms: list[float] = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.instance_ms is None:
            self.instance_ms = []

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.instance_ms)) if self.instance_ms else 0.0

    @property
    def median_ms(self) -> float:
        return float(np.median(self.instance_ms)) if self.instance_ms else 0.0


def _annotate_instance_skaa(image: ComplexRaster, ann: InstanceAnnotation,
                            image_id: str, idx: int, master_seed: int,
                            dec_params: DecoupleParams, k: int,
                            window_nbar: int, window_sidelobe_db: float,
                            debug_dir: Path | None = None) -> InstanceAnnotation:
    chip, origin = crop_chip(image, ann.box)
    grid = FrequencyGrid(height=chip.height, width=chip.width)
    window = taylor_window_2d(chip.height, chip.width,
                              nbar=window_nbar, sidelobe_db=window_sidelobe_db)
    regions = []
    for it, step in enumerate(decouple_steps(chip, dec_params)):
        regions.append(step.region)
        if debug_dir is not None:
            stem = f"{image_id}_{idx:03d}_{it:02d}"
            write_chip(AmplitudeRaster(step.residual), debug_dir / f"{stem}_residual.csar")
            write_chip(AmplitudeRaster(step.label_map.labels.astype(np.float64)),
                       debug_dir / f"{stem}_labels.csar")
    fits = [fit_scatterer(r.values, grid, window) for r in regions]
    seed = instance_seed(master_seed, image_id, idx)
    kps = cluster_keypoints([(f.x, f.y) for f in fits], k=k, rng_seed=seed)
    return replace(ann, keypoints=to_global(kps, origin))


def _annotate_instance_dog(image: ComplexRaster, ann: InstanceAnnotation,
                           image_id: str, idx: int, master_seed: int,
                           dog_params: DogParams, k: int) -> InstanceAnnotation:
    chip, origin = crop_chip(image, ann.box)
    seed = instance_seed(master_seed, image_id, idx)
    kps = dog_keypoints(amplitude(chip), dog_params, k=k, rng_seed=seed)
    return replace(ann, keypoints=to_global(kps, origin))


def _run_annotator(index: DatasetIndex, out_dir: str | Path, worker,
                   threads: int = 1) -> RunSummary:
    """Shared driver: crop/annotate every instance, write per-image files.

    `worker(image, ann, image_id, idx)` returns the extended annotation.
    Failures on degenerate instances keep the original line and are logged;
    outputs are written in index order so results never depend on threads.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = RunSummary()

    def one(image, ann, image_id, idx):
        t0 = time.perf_counter()
        try:
            result = worker(image, ann, image_id, idx)
            ok = True
        except ScatterKitError as exc:
            log.warning("%s[%d]: %s (kept original line)", image_id, idx, exc)
            result, ok = ann, False
        return result, ok, (time.perf_counter() - t0) * 1e3

    for img_path, ann_path in index.entries:
        image_id = img_path.stem
        image = read_chip(img_path)
        if isinstance(image, AmplitudeRaster):
            image = ComplexRaster(image.values.astype(np.complex128))
        annots = parse_annotation(ann_path)
        if threads > 1 and len(annots) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(
                    lambda ia: one(image, ia[1], image_id, ia[0]),
                    enumerate(annots)))
        else:
            results = [one(image, ann, image_id, i)
                       for i, ann in enumerate(annots)]
        extended = [r[0] for r in results]
        summary.instances += len(results)
        summary.failures += sum(1 for r in results if not r[1])
        summary.instance_ms.extend(r[2] for r in results)
        write_annotation(extended, out_dir / ann_path.name)
    return summary


def run_skaa(index: DatasetIndex, out_dir: str | Path, *, master_seed: int,
             dec_params: DecoupleParams = DecoupleParams(), k: int = 9,
             window_nbar: int = 4, window_sidelobe_db: float = -35.0,
             threads: int = 1, debug_dir: str | Path | None = None) -> RunSummary:
    """Physics pipeline over a dataset: every instance gains k keypoints."""
    if debug_dir is not None:
        debug_dir = Path(debug_dir)
        debug_dir.mkdir(parents=True, exist_ok=True)

    def worker(image, ann, image_id, idx):
        return _annotate_instance_skaa(
            image, ann, image_id, idx, master_seed, dec_params, k,
            window_nbar, window_sidelobe_db, debug_dir=debug_dir)
    return _run_annotator(index, out_dir, worker, threads=threads)


def run_dog(index: DatasetIndex, out_dir: str | Path, *, master_seed: int = 0,
            dog_params: DogParams = DogParams(), k: int = 9,
            threads: int = 1) -> RunSummary:
    """DoG baseline over a dataset, same output format as run_skaa."""
    def worker(image, ann, image_id, idx):
        return _annotate_instance_dog(image, ann, image_id, idx, master_seed,
                                      dog_params, k)
    return _run_annotator(index, out_dir, worker, threads=threads)
