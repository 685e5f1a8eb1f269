"""End-to-end document cleaning, corpus evaluation and batch processing."""

from __future__ import annotations

import csv
import dataclasses
import glob as globlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import preprocess, profile
from .components import estimate_character_metrics, label_components, write_components_csv
from .errors import DegenerateInputError, InvalidParameterError, MarginaliaError
from .metrics import evaluate_document
from .raster import binarize, ink_count, load_image, save_image
from .recovery import RULES, RecoveryConfig, run_recovery

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PipelineConfig:
    binarize: str = "otsu"
    threshold: int | None = None
    connectivity: int = 8
    denoise: bool = True
    band_fraction: float = 0.08
    deskew: bool = True
    min_deskew_angle: float = 0.2
    mask_mean: str = "all"
    size_factor: float = 2.0
    gap_factor: float = 4.0
    center_tolerance: float = 0.5
    min_line_run: int = 3
    max_page_number_run: int = 4
    prune_gap_factor: float = 4.0
    prune_row_factor: float = 1.0
    jobs: int = 1

    def __post_init__(self):
        if self.binarize not in ("otsu", "fixed"):
            raise InvalidParameterError(f"binarize must be otsu or fixed, got {self.binarize!r}")
        if self.binarize == "fixed" and (self.threshold is None or not 0 <= self.threshold <= 255):
            raise InvalidParameterError("fixed binarization needs threshold in [0, 255]")
        if self.connectivity not in (4, 8):
            raise InvalidParameterError("connectivity must be 4 or 8")
        if not 0 < self.band_fraction <= 0.25:
            raise InvalidParameterError("band_fraction must be in (0, 0.25]")
        if self.mask_mean not in ("all", "nonzero"):
            raise InvalidParameterError("mask_mean must be all or nonzero")
        if self.min_line_run < 1 or self.max_page_number_run < 1 or self.jobs < 1:
            raise InvalidParameterError("min_line_run, max_page_number_run and jobs must be >= 1")
        for name in ("size_factor", "gap_factor", "center_tolerance", "prune_gap_factor", "prune_row_factor",
                     "min_deskew_angle"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")

    @property
    def recovery(self) -> RecoveryConfig:
        return RecoveryConfig(
            size_factor=self.size_factor,
            gap_factor=self.gap_factor,
            center_tolerance=self.center_tolerance,
            min_line_run=self.min_line_run,
            max_page_number_run=self.max_page_number_run,
            prune_gap_factor=self.prune_gap_factor,
            prune_row_factor=self.prune_row_factor,
            connectivity=self.connectivity,
        )

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        """Read a flat ``key = value`` file (``#`` starts a comment)."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        values = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParameterError(f"{path}:{lineno}: expected key=value")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in fields:
                raise InvalidParameterError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(fields[key], value)
        return cls(**values).replace(**overrides)

    def to_text(self) -> str:
        return "".join(f"{k} = {'' if v is None else v}\n" for k, v in dataclasses.asdict(self).items())


def _parse_value(f, text):
    default = f.default
    if text == "" or text.lower() == "none":
        return None
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise InvalidParameterError(f"{f.name}: not a boolean: {text!r}")
    if isinstance(default, float):
        return float(text)
    if isinstance(default, int) or f.name == "threshold":
        return int(text)
    return text


@dataclass
class PageResult:
    """Everything produced while cleaning one binary page."""

    cleaned: np.ndarray
    removed: np.ndarray
    preprocessed: np.ndarray
    stage_one_body: np.ndarray
    stage_one_margin: np.ndarray
    detection: profile.MarginDetection
    skew: preprocess.SkewEstimate | None
    skew_applied: bool
    char_metrics: object
    actions: list
    pruned_labels: list
    warnings: list = field(default_factory=list)
    body_components: list = field(default_factory=list, repr=False)


def clean_page(page, config: PipelineConfig | None = None) -> PageResult:
    """Run the two-stage cleaner on a binary page (``True`` = ink)."""
    config = config or PipelineConfig()
    page = np.asarray(page, dtype=bool)
    warnings = []

    pre = preprocess.remove_border_noise(page, config.band_fraction) if config.denoise else page.copy()
    skew, applied = None, False
    if config.deskew and pre.any():
        skew = preprocess.estimate_skew(pre)
        if abs(skew.angle) >= config.min_deskew_angle:
            pre = preprocess.deskew(pre, skew)
            applied = True

    detection = profile.detect_margins(pre, config.mask_mean)
    warnings.extend(detection.warnings)
    body, margin = profile.strip_margins(pre, detection.box)

    comps = label_components(body, config.connectivity)
    metrics, actions, pruned_labels = None, [], []
    cleaned, removed = body, margin
    if comps:
        metrics = estimate_character_metrics(comps)
        result = run_recovery(body, margin, detection.box, metrics, config.recovery)
        warnings.extend(result.warnings)
        cleaned = result.body
        removed = result.margin | result.pruned
        actions, pruned_labels = result.actions, result.pruned_labels
    elif margin.any():
        warnings.append("body is empty; no character metrics, recovery skipped")
    return PageResult(cleaned, removed, pre, body, margin, detection, skew, applied, metrics, actions,
                      pruned_labels, warnings, comps)


def build_report(result: PageResult, input_path=None, input_ink=None, doc_metrics=None, wall_ms=None) -> dict:
    box = result.detection.box
    restored = sum(a.pixels_restored for a in result.actions)
    per_rule = {rule: sum(a.pixels_restored for a in result.actions if a.rule == rule) for rule in RULES}
    report = {
        "schema": SCHEMA_VERSION,
        "input": None if input_path is None else str(input_path),
        "width": int(result.preprocessed.shape[1]),
        "height": int(result.preprocessed.shape[0]),
        "margin_box": {"left": box.left, "right": box.right, "top": box.top, "bottom": box.bottom},
        "smoothing_windows": result.detection.windows,
        "mean_lines": {
            "column": None if result.detection.columns is None else round(result.detection.columns.mean_line, 6),
            "row": None if result.detection.rows is None else _finite(result.detection.rows.mean_line),
        },
        "skew": None if result.skew is None else {
            "angle": round(result.skew.angle, 6),
            "confidence": round(result.skew.confidence, 6),
            "applied": result.skew_applied,
        },
        "character_metrics": None if result.char_metrics is None else {
            "char_size": round(result.char_metrics.char_size, 6),
            "char_space": round(result.char_metrics.char_space, 6),
        },
        "actions": [a.to_dict() for a in result.actions],
        "restored_pixels": {"total": restored, **per_rule},
        "pruned": [{"rule": rule, "label": int(label)} for rule, label in result.pruned_labels],
        "ink": {
            "input": input_ink,
            "preprocessed": ink_count(result.preprocessed),
            "stage_one_body": ink_count(result.stage_one_body),
            "stage_one_margin": ink_count(result.stage_one_margin),
            "cleaned": ink_count(result.cleaned),
            "removed": ink_count(result.removed),
        },
        "warnings": list(result.warnings),
        "metrics": None if doc_metrics is None else doc_metrics.to_dict(),
        "wall_time_ms": None if wall_ms is None else round(wall_ms, 3),
    }
    return report


def _finite(x):
    return round(x, 6) if np.isfinite(x) else None


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def strip_wall_time(report: dict) -> dict:
    out = dict(report)
    out.pop("wall_time_ms", None)
    return out


def load_binary(path, config: PipelineConfig) -> np.ndarray:
    return binarize(load_image(path), config.binarize, config.threshold)


@dataclass(frozen=True)
class DocumentJob:
    input: str
    out_dir: str | None
    stem: str
    clean_truth: str | None = None
    mask_truth: str | None = None
    emit_profiles: str | None = None
    emit_components: str | None = None


def run_document(job: DocumentJob, config: PipelineConfig) -> dict:
    """Clean one file, optionally score it, and write its outputs.

    Outputs are written only after the whole pipeline succeeded.
    """
    start = time.perf_counter()
    page = load_binary(job.input, config)
    result = clean_page(page, config)
    doc_metrics = None
    if job.clean_truth is not None:
        clean = load_image(job.clean_truth) < 128
        mask = load_image(job.mask_truth) < 128
        doc_metrics = evaluate_document(clean, mask, result.cleaned, result.removed)
    wall = (time.perf_counter() - start) * 1000.0
    report = build_report(result, job.input, ink_count(page), doc_metrics, wall)
    if job.out_dir is not None:
        out = Path(job.out_dir)
        save_image(result.cleaned, out / f"{job.stem}_cleaned.png")
        save_image(result.removed, out / f"{job.stem}_removed.png")
        (out / f"{job.stem}_report.json").write_text(dump_report(report))
    if job.emit_profiles is not None:
        pdir = Path(job.emit_profiles)
        for axis, smoothed in ((profile.COLUMN, result.detection.columns), (profile.ROW, result.detection.rows)):
            if smoothed is not None:
                profile.write_profile_csv(smoothed, pdir / f"{job.stem}_{axis}_profile.csv")
    if job.emit_components is not None:
        write_components_csv(result.body_components, job.emit_components)
    return report


def clean(input_path, config: PipelineConfig | None = None, out_dir=None, emit_profiles=None,
          emit_components=None) -> dict:
    """Clean one image file; writes ``<stem>_cleaned.png``, ``<stem>_removed.png``
    and ``<stem>_report.json`` into ``out_dir`` and returns the report."""
    config = config or PipelineConfig()
    input_path = Path(input_path)
    job = DocumentJob(
        str(input_path),
        None if out_dir is None else str(out_dir),
        input_path.stem,
        emit_profiles=None if emit_profiles is None else str(emit_profiles),
        emit_components=None if emit_components is None else str(emit_components),
    )
    try:
        return run_document(job, config)
    except MarginaliaError as exc:
        if str(input_path) not in str(exc):
            exc.args = (f"{input_path}: {exc}",) + exc.args[1:]
        raise


def _safe_run(args):
    job, config = args
    try:
        return run_document(job, config), None
    except Exception as exc:  # per-document isolation
        return None, f"{job.input}: {type(exc).__name__}: {exc}"


def _run_jobs(jobs, config: PipelineConfig):
    if config.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            return list(pool.map(_safe_run, [(j, config) for j in jobs]))
    return [_safe_run((j, config)) for j in jobs]


def _mean_split(values):
    """Mean plus the share of documents at/above and below it."""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    above = float(np.mean(arr >= mean))
    return {"mean": round(mean, 6), "above_mean_pct": round(100 * above, 2),
            "below_mean_pct": round(100 * (1 - above), 2)}


def aggregate(reports, failures=(), skipped=()) -> dict:
    ok = [r for r in reports if r is not None]
    agg = {
        "schema": SCHEMA_VERSION,
        "documents": len(ok),
        "failures": list(failures),
        "skipped": list(skipped),
        "restored_pixels": int(sum(r["restored_pixels"]["total"] for r in ok)),
        "removed_pixels": int(sum(r["ink"]["removed"] for r in ok)),
    }
    scored = [r["metrics"] for r in ok if r.get("metrics")]
    if scored:
        for key in ("removal_accuracy", "recovery_accuracy", "correlation"):
            agg[key] = _mean_split([m[key] for m in scored])
    return agg


def _write_outputs(out_dir, reports, agg):
    out = Path(out_dir)
    (out / "aggregate.json").write_text(dump_report(agg))
    scored = [r for r in reports if r is not None and r.get("metrics")]
    if scored:
        with (out / "metrics.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["doc", "removal_acc", "recovery_acc", "correlation"])
            for r in scored:
                m = r["metrics"]
                writer.writerow([Path(r["input"]).name, f"{m['removal_accuracy']:.6f}",
                                 f"{m['recovery_accuracy']:.6f}", f"{m['correlation']:.6f}"])


def evaluate(input_dir, config: PipelineConfig | None = None, out_dir=None) -> dict:
    """Clean and score every ``<stem>_annotated.png`` that has its
    ``<stem>_clean.png``/``<stem>_mask.png`` ground truth next to it."""
    config = config or PipelineConfig()
    input_dir = Path(input_dir)
    annotated = sorted(input_dir.glob("*_annotated.png")) + sorted(input_dir.glob("*_annotated.pgm"))
    if not annotated:
        raise DegenerateInputError(f"{input_dir}: no documents found")
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    jobs, skipped = [], []
    for path in annotated:
        stem = path.name[: -len("_annotated" + path.suffix)]
        clean_p, mask_p = path.with_name(f"{stem}_clean{path.suffix}"), path.with_name(f"{stem}_mask{path.suffix}")
        if not (clean_p.exists() and mask_p.exists()):
            log.warning("%s: missing truth files, skipped", path)
            skipped.append(str(path))
            continue
        jobs.append(DocumentJob(str(path), None if out_dir is None else str(out_dir), stem, str(clean_p), str(mask_p)))
    results = _run_jobs(jobs, config)
    reports = [r for r, _ in results]
    failures = [e for _, e in results if e is not None]
    agg = aggregate(reports, failures, skipped)
    if out_dir is not None:
        _write_outputs(out_dir, reports, agg)
    return {"aggregate": agg, "reports": [r for r in reports if r is not None]}


def batch(inputs: str, config: PipelineConfig | None = None, out_dir=None) -> dict:
    """Clean every file matching the glob ``inputs``; results do not depend
    on ``config.jobs``."""
    config = config or PipelineConfig()
    paths = sorted(Path(p) for p in globlib.glob(str(inputs)))
    if not paths:
        raise DegenerateInputError(f"no files match {inputs!r}")
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    jobs = [DocumentJob(str(p), None if out_dir is None else str(out_dir), p.stem) for p in paths]
    results = _run_jobs(jobs, config)
    reports = [r for r, _ in results]
    failures = [e for _, e in results if e is not None]
    agg = aggregate(reports, failures)
    if out_dir is not None:
        _write_outputs(out_dir, reports, agg)
    return {"aggregate": agg, "reports": [r for r in reports if r is not None]}
