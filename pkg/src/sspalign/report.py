"""Run orchestration and deterministic report emission.

All artifacts are built in memory as text first; :func:`write_bundle`
writes them in one pass and removes what it wrote if any write fails.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .classify import EnsembleConfig, classifier_matrix, ensemble
from .errors import ConfigError, EmptyInput, MalformedHeader
from .ingest import (
    AlignedPair,
    build_aligned_pairs,
    format_value,
    parse_observations,
    parse_projections,
    parse_weights,
)
from .model import SCENARIOS, Method, Orientation, Scenario, ScoreMatrix, WeightScheme, Window, fingerprint
from .norm import DENOMINATORS, norm_matrix, norm_score_over_time
from .render import heatmap_svg, line_chart_svg
from .trace import TargetPolicy, TraceConfig, trace_matrix

METHODS = ("norm", "trace", "classify", "ensemble", "all")
_FILE_TAG = {Method.NORM: "norm", Method.TRACE: "trace", Method.CLASSIFIER: "classifier", Method.ENSEMBLE: "ensemble"}


@dataclass(frozen=True)
class RunConfig:
    obs: str
    proj: str
    window: str = "2015:2022"
    method: str = "all"
    lam: float = 0.9
    weights: str = "equal"
    normalize: str = "on"
    weight_denominator: str = "l2"
    target_policy: str = "same-year"
    temperature: float = 1.0
    ensemble_with_classifier: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.normalize not in ("on", "off"):
            raise ConfigError(f"--normalize must be on or off, got {self.normalize!r}")
        if self.weight_denominator not in DENOMINATORS:
            raise ConfigError(f"--weight-denominator must be l2 or l1, got {self.weight_denominator!r}")
        try:
            Window.parse(self.window)
            TargetPolicy.parse(self.target_policy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "temperature", float(self.temperature))

    @property
    def methods(self) -> list[Method]:
        if self.method == "all":
            return [Method.NORM, Method.TRACE, Method.CLASSIFIER, Method.ENSEMBLE]
        return [Method.CLASSIFIER if self.method == "classify" else Method(self.method)]

    def echo(self) -> dict:
        return asdict(self)


def dump_json(obj, indent: int = 0) -> str:
    """JSON with every float printed at 6 decimals and keys in given order."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return format_value(obj)
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {dump_json(v, indent + 1)}" for k, v in obj.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        body = ",\n".join(inner + dump_json(v, indent + 1) for v in obj)
        return "[\n" + body + "\n" + pad + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def file_tag(method: Method) -> str:
    return _FILE_TAG[Method(method)]


def safe_name(region: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", region)


def matrix_json(m: ScoreMatrix, window: Window, provenance: str) -> str:
    payload = {
        "method": m.method.value,
        "orientation": m.orientation.value,
        "window": {"start": window.start, "end": window.end},
        "config_fingerprint": m.config_fingerprint,
        "provenance_fingerprint": provenance,
        "entries": [
            {"region": r, "scenario": s.value, "score": v} for (r, s), v in m.entries.items()
        ],
    }
    return dump_json(payload) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def matrix_csv(m: ScoreMatrix, provenance: str) -> str:
    rows = []
    for region in m.regions:
        row = m.row(region)
        cells = [format_value(row[s]) if s in row else "" for s in SCENARIOS]
        rows.append([region, *cells, m.orientation.value, provenance])
    return _csv(["region", *(s.value for s in SCENARIOS), "orientation", "provenance"], rows)


def load_matrix_json(text: str) -> tuple[ScoreMatrix, Window, str]:
    """Inverse of :func:`matrix_json`: (matrix, window, provenance)."""
    try:
        data = json.loads(text)
        entries = {(e["region"], Scenario(e["scenario"])): float(e["score"]) for e in data["entries"]}
        window = Window(int(data["window"]["start"]), int(data["window"]["end"]))
        m = ScoreMatrix(Method(data["method"]), entries, data.get("config_fingerprint", ""), Orientation(data["orientation"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeader(f"not a score file: {exc}") from None
    return m, window, data.get("provenance_fingerprint", "")


def norm_time_csv(region: str, series: Mapping[Scenario, list[tuple[int, float]]], provenance: str) -> str:
    years = sorted({y for pts in series.values() for y, _ in pts})
    lookup = {s: dict(pts) for s, pts in series.items()}
    rows = []
    for y in years:
        cells = [format_value(lookup[s][y]) if s in lookup and y in lookup[s] else "" for s in SCENARIOS]
        rows.append([region, y, *cells, provenance])
    return _csv(["region", "year", *(s.value for s in SCENARIOS), "provenance"], rows)


def load_norm_time_csv(text: str) -> tuple[str, list[int], dict[str, list[float | None]], str]:
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise EmptyInput("empty norm-over-time file")
    region = rows[0]["region"]
    years = [int(r["year"]) for r in rows]
    series = {
        s.value: [float(r[s.value]) if r.get(s.value) else None for r in rows] for s in SCENARIOS
    }
    series = {k: v for k, v in series.items() if any(x is not None for x in v)}
    return region, years, series, rows[0].get("provenance", "")


def render_texts(files: Mapping[str, str]) -> dict[str, str]:
    """SVGs for every score matrix and norm-over-time table in ``files``."""
    out = {}
    for name in sorted(files):
        if name.startswith("scores_") and name.endswith(".json"):
            m, _, prov = load_matrix_json(files[name])
            entries = {(r, s.value): v for (r, s), v in m.entries.items()}
            out[f"heatmap_{file_tag(m.method)}.svg"] = heatmap_svg(entries, m.orientation, m.method.value, prov)
        elif name.startswith("norm_over_time_") and name.endswith(".csv"):
            region, years, series, prov = load_norm_time_csv(files[name])
            out[f"norm_time_{safe_name(region)}.svg"] = line_chart_svg(region, years, series, prov)
    return out


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class Bundle:
    files: dict[str, str] = field(default_factory=dict)
    matrices: dict[Method, ScoreMatrix] = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


def load_inputs(cfg: RunConfig, base: Path = Path(".")) -> tuple[dict[str, bytes], list, list]:
    raw = {"observations": (base / cfg.obs).read_bytes(), "projections": (base / cfg.proj).read_bytes()}
    if cfg.weights != "equal":
        raw["weights"] = (base / cfg.weights).read_bytes()
    return raw, parse_observations(raw["observations"]), parse_projections(raw["projections"])


def build_pairs(cfg: RunConfig, datasets, projections) -> list[AlignedPair]:
    window = Window.parse(cfg.window)
    pairs = []
    for d in datasets:
        pairs.extend(build_aligned_pairs(d, projections, window, cfg.normalize == "on"))
    return pairs


def resolve_weights(cfg: RunConfig, raw: Mapping[str, bytes], features: Sequence[str]) -> WeightScheme:
    if cfg.weights == "equal":
        return WeightScheme.equal(features)
    return parse_weights(raw["weights"], features)


def run_score(cfg: RunConfig, base: Path = Path(".")) -> Bundle:
    """Compute every requested artifact for ``cfg`` without touching disk."""
    raw, datasets, projections = load_inputs(cfg, base)
    if not datasets:
        raise EmptyInput("observations file has no rows")
    window = Window.parse(cfg.window)
    normalization = cfg.normalize == "on"
    features = sorted({f for d in datasets for f in d.series})
    weights = resolve_weights(cfg, raw, features)
    pairs = build_pairs(cfg, datasets, projections)
    trace_cfg = TraceConfig(cfg.lam, TargetPolicy.parse(cfg.target_policy), weights)

    inputs = {
        role: {"path": getattr(cfg, {"observations": "obs", "projections": "proj"}.get(role, role)), "sha256": sha256_bytes(data)}
        for role, data in raw.items()
    }
    echo = cfg.echo()
    location_free = {k: v for k, v in echo.items() if k not in ("obs", "proj", "weights")}
    location_free["weights"] = "equal" if cfg.weights == "equal" else "file"
    prov_fp = fingerprint({"config": location_free, "inputs": {k: v["sha256"] for k, v in inputs.items()}})

    wanted = cfg.methods
    need = set(wanted)
    if Method.ENSEMBLE in need:
        need |= {Method.NORM, Method.TRACE}
        if cfg.ensemble_with_classifier:
            need.add(Method.CLASSIFIER)

    computed: dict[Method, ScoreMatrix] = {}
    if Method.NORM in need:
        computed[Method.NORM] = norm_matrix(pairs, weights, cfg.weight_denominator, normalization)
    if Method.TRACE in need:
        computed[Method.TRACE] = trace_matrix(pairs, trace_cfg, normalization)
    if Method.CLASSIFIER in need:
        computed[Method.CLASSIFIER] = classifier_matrix(pairs, cfg.temperature, weights, normalization)
    if Method.ENSEMBLE in need:
        members = [computed[Method.NORM], computed[Method.TRACE]]
        if cfg.ensemble_with_classifier:
            members.append(computed[Method.CLASSIFIER])
        computed[Method.ENSEMBLE] = ensemble(EnsembleConfig(members))

    bundle = Bundle()
    for method in wanted:
        m = computed[method]
        tag = file_tag(method)
        bundle.files[f"scores_{tag}.json"] = matrix_json(m, window, prov_fp)
        bundle.files[f"scores_{tag}.csv"] = matrix_csv(m, prov_fp)
        bundle.matrices[method] = m

    if Method.NORM in wanted:
        by_region: dict[str, dict[Scenario, list]] = {}
        for p in pairs:
            by_region.setdefault(p.region, {})[p.scenario] = norm_score_over_time(p, weights, cfg.weight_denominator)
        for region, series in sorted(by_region.items()):
            bundle.files[f"norm_over_time_{safe_name(region)}.csv"] = norm_time_csv(region, series, prov_fp)

    bundle.files.update(render_texts(bundle.files))
    bundle.provenance = {
        "tool": "sspalign",
        "version": __version__,
        "fingerprint": prov_fp,
        "config": echo,
        "inputs": inputs,
        "matrices": {file_tag(m): computed[m].config_fingerprint for m in wanted},
    }
    bundle.files["provenance.json"] = dump_json(bundle.provenance) + "\n"
    return bundle


def config_from_provenance(text: str) -> RunConfig:
    try:
        data = json.loads(text)
        return RunConfig(**data["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"not a provenance file: {exc}") from None


def check_provenance_inputs(text: str, base: Path = Path(".")) -> list[str]:
    """Input roles whose current content no longer matches the recorded digest."""
    data = json.loads(text)
    changed = []
    for role, info in sorted(data.get("inputs", {}).items()):
        if sha256_bytes((base / info["path"]).read_bytes()) != info["sha256"]:
            changed.append(role)
    return changed


def write_bundle(files: Mapping[str, str], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name in sorted(files):
            path = out_dir / name
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(files[name])
            written.append(path)
    except OSError:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    return written


def read_score_dir(in_dir: Path) -> dict[str, str]:
    files = {}
    for path in sorted(in_dir.iterdir()):
        if (path.name.startswith("scores_") and path.suffix == ".json") or (
            path.name.startswith("norm_over_time_") and path.suffix == ".csv"
        ):
            files[path.name] = path.read_text(encoding="utf-8")
    return files
