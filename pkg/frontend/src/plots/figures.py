"""Figure rendering from curvlab CSV series and summary.json metrics.

The renderer consumes only the documented artifact formats: CSV files with a
header row, and the run summary JSON.  No physics is recomputed here; slope
annotations are read verbatim from the summary, while the fitted slope shown
next to them comes from a least-squares line through the plotted points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


KINDS = ("timeseries", "loglog_fit", "entropy")


class FigureSpecError(ValueError):
    """Schema violation in a figure spec; the message names the offender."""


class MissingColumnError(FigureSpecError):
    """A referenced CSV column does not exist."""


@dataclass(frozen=True)
class SeriesSpec:
    csv: Path
    x: str
    y: str
    label: str | None = None
    x_origin: float | None = None  # plot against (x_origin - x) when set


@dataclass(frozen=True)
class Annotation:
    alpha: float | None = None       # theoretical decay exponents of the speed
    threshold: float | None = None   # horizontal reference line
    summary: Path | None = None      # run summary to read the slope from
    scenario: str | None = None
    metric: str | None = None


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    output: Path
    series: tuple[SeriesSpec, ...]
    annotation: Annotation
    title: str | None = None


@dataclass(frozen=True)
class RenderResult:
    output: Path
    fitted_slope: float          # nan for kinds without a log-log fit
    annotated_slope: float | None


def load_figure_spec(path) -> FigureSpec:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise FigureSpecError(f"spec file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise FigureSpecError(f"{path}: {exc}")

    fig = raw.get("figure")
    if not isinstance(fig, dict):
        raise FigureSpecError("missing [figure] table")
    kind = fig.get("kind")
    if kind not in KINDS:
        raise FigureSpecError(f"figure kind must be one of {KINDS}, got {kind!r}")
    if "output" not in fig:
        raise FigureSpecError("missing 'output' in [figure]")
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    series_raw = raw.get("series", [])
    if not series_raw:
        raise FigureSpecError("spec defines no [[series]] entries")
    series = []
    for i, s in enumerate(series_raw):
        for key in ("csv", "x", "y"):
            if key not in s:
                raise FigureSpecError(f"series {i}: missing key '{key}'")
        origin = s.get("x_origin")
        series.append(SeriesSpec(
            csv=resolve(s["csv"]), x=str(s["x"]), y=str(s["y"]),
            label=s.get("label"),
            x_origin=float(origin) if origin is not None else None))

    ann_raw = raw.get("annotation", {})
    if ("summary" in ann_raw) != ("scenario" in ann_raw) or \
            ("summary" in ann_raw) != ("metric" in ann_raw):
        raise FigureSpecError(
            "[annotation] needs 'summary', 'scenario' and 'metric' together")
    annotation = Annotation(
        alpha=ann_raw.get("alpha"), threshold=ann_raw.get("threshold"),
        summary=resolve(ann_raw["summary"]) if "summary" in ann_raw else None,
        scenario=ann_raw.get("scenario"), metric=ann_raw.get("metric"))

    return FigureSpec(kind=kind, output=resolve(fig["output"]),
                      series=tuple(series), annotation=annotation,
                      title=fig.get("title"))


def _load_columns(spec: SeriesSpec):
    if not spec.csv.exists():
        raise FigureSpecError(f"input file not found: {spec.csv}")
    data = np.genfromtxt(spec.csv, delimiter=",", names=True)
    if data.dtype.names is None:
        raise FigureSpecError(f"{spec.csv}: no CSV header row")
    for col in (spec.x, spec.y):
        if col not in data.dtype.names:
            raise MissingColumnError(
                f"column '{col}' not in {spec.csv} "
                f"(available: {', '.join(data.dtype.names)})")
    data = np.atleast_1d(data)
    if data.size == 0:
        raise FigureSpecError(f"{spec.csv}: empty series")
    return data[spec.x], data[spec.y]


def _annotated_slope(ann: Annotation):
    if ann.summary is None:
        return None
    if not ann.summary.exists():
        raise FigureSpecError(f"summary file not found: {ann.summary}")
    summary = json.loads(ann.summary.read_text())
    by_id = {s.get("id"): s for s in summary.get("scenarios", [])}
    if ann.scenario not in by_id:
        raise FigureSpecError(f"scenario '{ann.scenario}' not in {ann.summary}")
    metrics = by_id[ann.scenario].get("metrics", {})
    if ann.metric not in metrics:
        raise FigureSpecError(
            f"metric '{ann.metric}' not in scenario '{ann.scenario}' "
            f"(available: {', '.join(sorted(metrics))})")
    return float(metrics[ann.metric])


def render(spec: FigureSpec) -> RenderResult:
    """Render the figure; returns the fitted and annotated slopes.

    Idempotent: identical spec and inputs rewrite an identical image (fixed
    figure geometry, no timestamps in the output).
    """
    annotated = _annotated_slope(spec.annotation)
    fitted = math.nan
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    try:
        for s in spec.series:
            x, y = _load_columns(s)
            if spec.kind == "loglog_fit":
                xx = s.x_origin - x if s.x_origin is not None else x.copy()
                mask = (xx > 0) & (y > 0)
                if mask.sum() < 2:
                    raise FigureSpecError(
                        f"{s.csv}: fewer than two positive points to fit")
                xx, yy = xx[mask], y[mask]
                ax.loglog(xx, yy, ".-", label=s.label or s.y)
                fitted = float(np.polyfit(np.log(xx), np.log(yy), 1)[0])
            else:
                ax.plot(x, y, label=s.label or s.y)
        if spec.kind == "entropy":
            ax.axhline(0.0, color="k", lw=0.8)
            ax.set_ylabel("entropy")
        if spec.annotation.threshold is not None:
            ax.axhline(spec.annotation.threshold, color="r", ls="--", lw=0.8)
        notes = []
        if math.isfinite(fitted):
            notes.append(f"fitted slope {fitted:.6g}")
        if annotated is not None:
            notes.append(f"annotated slope {annotated:.6g}")
        if spec.annotation.alpha is not None:
            a = spec.annotation.alpha
            notes.append(f"theory: radius -1/(a+1) = {-1 / (a + 1):.6g}, "
                         f"speed -a/(a+1) = {-a / (a + 1):.6g}")
        if notes:
            ax.set_title("\n".join(notes), fontsize=8)
        if spec.title:
            fig.suptitle(spec.title)
        ax.set_xlabel(spec.series[0].x)
        if len(spec.series) > 1 or spec.series[0].label:
            ax.legend(fontsize=8)
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, metadata={"Software": None})
    finally:
        plt.close(fig)
    line = f"wrote {spec.output}"
    if math.isfinite(fitted):
        line += f"  fitted slope {fitted:.6g}"
    if annotated is not None:
        line += f"  annotated slope {annotated:.6g}"
    print(line)
    return RenderResult(output=spec.output, fitted_slope=fitted,
                        annotated_slope=annotated)
