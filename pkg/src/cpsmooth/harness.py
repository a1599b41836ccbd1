"""Declarative experiment runner.

A run is described by a JSON config (see :func:`load_config`). Every block
template may carry list-valued parameters; the grid is the cartesian product
of all of them, enumerated in template order. Each grid point yields one CSV
row; ``summary.json`` aggregates slopes, ratio ranges and pass counts.
"""

from __future__ import annotations

import csv
import datetime as _dt
import itertools
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import measure as ms
from . import random_instances as ri
from .blocks import GeneralJump, IIDLattice, LatentDriver, TwoRuns, weighted_sum_distribution
from .errors import CPSmoothError, InputError, ResourceError

SCHEMA = "cpsmooth.experiment/1"
SCENARIOS = ("tworuns-smoothing", "poisson-binomial", "franken", "generalized", "lemma-suite")
ATOM_GUARD = 10_000_000

DEFAULT_VARIANTS = {
    "tworuns-smoothing": ["theorem1_pi", "theorem1_g", "fe", "oho"],
    "poisson-binomial": ["magic", "corollary1", "az", "roos_hipp", "berry_esseen"],
    "franken": ["theorem2_first", "theorem2_second"],
    "generalized": ["theorem3_first", "theorem3_second"],
    "lemma-suite": [],
}
SCENARIO_CONDITIONS = {
    "tworuns-smoothing": ["theorem1"],
    "poisson-binomial": ["corollary1"],
    "franken": ["theorem2"],
    "generalized": ["theorem3"],
    "lemma-suite": [],
}
GRID_KEYS = ("n", "p", "w", "copies")
# variants whose constants are all explicit: violations are hard failures
EXPLICIT_VARIANTS = ("roos_hipp",)


@dataclass
class ExperimentConfig:
    scenario: str
    blocks: list = field(default_factory=list)
    h_policy: object = "half-min-weight"
    variants: list = field(default_factory=list)
    seed: int = 0
    output: str = "results"
    tolerances: dict = field(default_factory=dict)
    gamma1_policy: str = "per-block"
    workers: int = 1
    instances: int = 100

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InputError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if not self.variants:
            self.variants = list(DEFAULT_VARIANTS[self.scenario])
        for v in self.variants:
            if v not in bd.VARIANTS:
                raise InputError(f"unknown bound variant {v!r}")
        if self.scenario != "lemma-suite" and not self.blocks:
            raise InputError("config needs at least one block template")
        if not (self.h_policy == "half-min-weight" or _is_number(self.h_policy)):
            raise InputError("h_policy must be 'half-min-weight' or a positive number")
        if _is_number(self.h_policy) and not self.h_policy > 0:
            raise InputError("fixed h must be positive")
        unknown = set(self.tolerances) - {"merge_tolerance", "prune_threshold", "series_tol", "quad_rtol"}
        if unknown:
            raise InputError(f"unknown tolerance keys {sorted(unknown)}")
        for t in self.blocks:
            kind = t.get("kind") if isinstance(t, dict) else None
            for v in self.variants:
                if kind not in bd.VARIANT_KINDS[v]:
                    raise InputError(f"variant {v!r} is not defined for {kind!r} blocks")
            for key in GRID_KEYS:
                if isinstance(t.get(key), list) and not t[key]:
                    raise InputError(f"grid for {key!r} is empty")

    @property
    def measure_tol(self) -> dict:
        return {k: self.tolerances[k] for k in ("merge_tolerance", "prune_threshold") if k in self.tolerances}

    @property
    def series_tol(self) -> float:
        return self.tolerances.get("series_tol", ms.DEFAULT_SERIES_TOL)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA, "scenario": self.scenario, "blocks": self.blocks,
            "h_policy": self.h_policy, "variants": self.variants, "seed": self.seed,
            "output": self.output, "tolerances": self.tolerances,
            "gamma1_policy": self.gamma1_policy, "workers": self.workers,
            "instances": self.instances,
        }


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def load_config(source) -> ExperimentConfig:
    """Parse a config from a path, JSON text or dict."""
    if isinstance(source, (str, os.PathLike)) and not str(source).lstrip().startswith("{"):
        try:
            data = json.loads(Path(source).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {source}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {source} is not valid JSON: {exc}") from exc
    elif isinstance(source, dict):
        data = dict(source)
    else:
        data = json.loads(source)
    schema = data.pop("schema", None)
    if schema != SCHEMA:
        raise InputError(f"config schema must be {SCHEMA!r}, got {schema!r}")
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise InputError(f"bad config: {exc}") from exc


# -- block templates --------------------------------------------------------

_SQRT = re.compile(r"^\s*sqrt\(\s*([0-9.eE+-]+)\s*\)\s*$")


def _number(v) -> float:
    if isinstance(v, str):
        s = v.strip()
        neg = s.startswith("-")
        m = _SQRT.match(s[1:] if neg else s)
        if not m:
            raise InputError(f"cannot parse number {v!r}")
        out = math.sqrt(float(m.group(1)))
        return -out if neg else out
    return float(v)


def block_from_template(t: dict):
    """Instantiate one block from a template with scalar parameters."""
    kind = t.get("kind")
    n = t.get("n", 1)
    w = _number(t.get("w", 1.0))
    if kind == "two_runs":
        return TwoRuns(_number(t["p"]), n, w)
    if kind == "iid_lattice":
        if "pmf" in t:
            pmf = [_number(v) for v in t["pmf"]]
        else:
            p = _number(t["p"])
            pmf = [1 - p, p]
        return IIDLattice(pmf, n, w)
    if kind == "latent_driver":
        link = t.get("link", "product")
        if isinstance(link, list):
            link = {(_number(a), _number(b)): v for a, b, v in link}
        return LatentDriver(t["support"], t["pmf"], link, n, w)
    if kind == "general_jump":
        jump = ms.from_atoms([(_number(x), _number(m)) for x, m in t["jump"]])
        return GeneralJump(_number(t["p"]), jump, n, w)
    raise InputError(f"unknown block kind {kind!r}")


def expand_grid(config: ExperimentConfig) -> list[dict]:
    """Grid points as ``{"params": [...per template...], "blocks": [...]}``."""
    axes = []
    for ti, t in enumerate(config.blocks):
        for key in GRID_KEYS:
            if isinstance(t.get(key), list):
                axes.append((ti, key, t[key]))
    points = []
    for combo in itertools.product(*[vals for _, _, vals in axes]):
        templates = [dict(t) for t in config.blocks]
        for (ti, key, _), val in zip(axes, combo):
            templates[ti][key] = val
        blocks = []
        for t in templates:
            copies = int(t.get("copies", 1))
            b = block_from_template(t)
            blocks.extend([b] * copies)
        params = [{k: t[k] for k in GRID_KEYS if k in t} for t in templates]
        points.append({"params": params, "blocks": blocks, "axes": {f"b{ti}.{k}": v for (ti, k, _), v in zip(axes, combo)}})
    return points


def estimate_atoms(blocks) -> float:
    """Upper estimate of the atom count of the exact weighted-sum law."""
    groups: dict[float, int] = {}
    product = 1.0
    for b in blocks:
        if isinstance(b, GeneralJump):
            k = len(b.jump)
            product *= math.comb(b.length + k, k)
            continue
        if isinstance(b, IIDLattice):
            top = len(b.pmf) - 1
        elif isinstance(b, TwoRuns):
            top = 1
        else:
            top = int(b.link_table().max())
        groups[abs(b.weight)] = groups.get(abs(b.weight), 0) + b.length * top
    for span in groups.values():
        product *= span + 1
    return product


# -- running ----------------------------------------------------------------


@dataclass
class RunReport:
    config: ExperimentConfig
    columns: list
    rows: list
    summary: dict
    records: list = field(default_factory=list)

    @property
    def hard_ok(self) -> bool:
        return bool(self.summary.get("hard_assertions", {}).get("passed", True))


def _h_for(config, blocks):
    if config.h_policy == "half-min-weight":
        return bd.default_h(blocks)
    return float(config.h_policy)


def _evaluate_point(args):
    config, index, point, with_exact = args
    blocks = point["blocks"]
    row: dict = {"grid_id": index}
    for key, val in point["axes"].items():
        row[key] = val
    errors = []
    tol = config.measure_tol
    exact = None
    approximants: dict = {}
    try:
        if with_exact:
            exact = weighted_sum_distribution(blocks, **tol)
            row["exact_atoms"] = len(exact)
            row["exact_dropped_mass_bound"] = exact.dropped_mass_bound
        for thm in SCENARIO_CONDITIONS[config.scenario]:
            row[f"{thm}.pass"] = bd.check_conditions(thm, blocks).passed
        if config.scenario == "generalized" and all(
            isinstance(b, GeneralJump) and b.jump.locations.min() > 0 for b in blocks
        ):
            row["roos_hipp.pass"] = bd.check_conditions("roos_hipp", blocks).passed
    except CPSmoothError as exc:
        errors.append(f"point: {exc}")
        row["error"] = "; ".join(errors)
        return row, []
    violations = []
    h = _h_for(config, blocks)
    for v in config.variants:
        try:
            shape = bd.bound_shape(
                v, blocks, h if v in bd.Q_FACTORED else None,
                config.gamma1_policy, config.series_tol,
            )
        except CPSmoothError as exc:
            errors.append(f"{v}: {exc}")
            continue
        row[f"{v}.total"] = shape.total
        row[f"{v}.Q"] = shape.smoothing_Q
        row[f"{v}.h"] = shape.h if shape.h is not None else ""
        for i, c in shape.breakdown:
            row[f"{v}.b{i}"] = c
        if shape.notes:
            row[f"{v}.notes"] = " | ".join(shape.notes)
        if exact is None:
            continue
        name = bd.VARIANT_APPROXIMANT[v]
        try:
            if name == "normal":
                dist = bd.kolmogorov_to_normal(exact)
                ratio = dist / shape.total if shape.total > 0 else math.inf
            else:
                if name not in approximants:
                    approximants[name] = bd.build_approximant(name, blocks, config.series_tol)
                rep = bd.compare(exact, approximants[name], shape)
                dist, ratio = rep.measured_distance, rep.ratio
        except CPSmoothError as exc:
            errors.append(f"{v}: {exc}")
            continue
        row[f"{v}.approximant"] = name
        row[f"{v}.distance"] = dist
        row[f"{v}.ratio"] = ratio
        if v in EXPLICIT_VARIANTS and dist > shape.total:
            violations.append({"grid_id": index, "variant": v, "distance": dist, "bound": shape.total})
    if errors:
        row["error"] = "; ".join(errors)
    return row, violations


def _column_order(config, rows):
    keys = []
    for r in rows:
        for k in r:
            if k not in keys and k != "grid_id":
                keys.append(k)

    def rank(k):
        head, _, suffix = k.partition(".")
        if head[:1] == "b" and head[1:].isdigit():
            return (0, k)
        if k.startswith("exact_"):
            return (1, k)
        if suffix == "pass":
            return (2, k)
        if head in config.variants:
            return (3, f"{config.variants.index(head):03d}", _suffix_rank(suffix))
        return (9, k)

    return ["grid_id"] + sorted(keys, key=rank)


def _suffix_rank(suffix):
    order = ["approximant", "distance", "total", "Q", "h", "ratio", "notes"]
    if suffix in order:
        return f"{order.index(suffix):02d}"
    if suffix[:1] == "b" and suffix[1:].isdigit():
        return f"50{int(suffix[1:]):06d}"
    return "99" + suffix


def _fit_slope(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2 or np.unique(x[ok]).size < 2:
        return None
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def _summarize(config, rows, violations, with_exact):
    axes = sorted({k for r in rows for k in r if k.startswith("b") and "." in k and k.split(".")[1] in GRID_KEYS})
    varying = [a for a in axes if len({json.dumps(r.get(a)) for r in rows}) > 1]
    slope_axis = varying[0] if len(varying) == 1 and all(_is_number(r.get(varying[0])) for r in rows) else None
    variants = {}
    for v in config.variants:
        ratios = [r[f"{v}.ratio"] for r in rows if f"{v}.ratio" in r and math.isfinite(r[f"{v}.ratio"])]
        entry = {
            "min_ratio": min(ratios) if ratios else None,
            "max_ratio": max(ratios) if ratios else None,
            "evaluated": sum(1 for r in rows if f"{v}.total" in r),
        }
        if slope_axis:
            xs = [r[slope_axis] for r in rows if f"{v}.total" in r]
            entry["slope_shape"] = _fit_slope(xs, [r[f"{v}.total"] for r in rows if f"{v}.total" in r])
            if with_exact:
                pts = [(r[slope_axis], r[f"{v}.distance"]) for r in rows if f"{v}.distance" in r]
                entry["slope_distance"] = _fit_slope([p[0] for p in pts], [p[1] for p in pts]) if pts else None
        variants[v] = entry
    pass_counts = {}
    for r in rows:
        for k, val in r.items():
            if k.endswith(".pass"):
                c = pass_counts.setdefault(k[:-5], [0, 0])
                c[0] += bool(val)
                c[1] += 1
    return {
        "schema": SCHEMA,
        "scenario": config.scenario,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": config.to_dict(),
        "grid_points": len(rows),
        "slope_axis": slope_axis,
        "variants": variants,
        "pass_counts": {k: {"passed": a, "total": b} for k, (a, b) in pass_counts.items()},
        "errors": [{"grid_id": r["grid_id"], "error": r["error"]} for r in rows if "error" in r],
        "hard_assertions": {"passed": not violations, "violations": violations},
    }


def run(config: ExperimentConfig, force: bool = False, with_exact: bool = True) -> RunReport:
    """Evaluate every grid point of ``config``.

    Module errors inside a grid point are recorded in its row and do not
    abort the run. Grids whose exact law would exceed the atom guard are
    refused unless ``force`` is set.
    """
    if config.scenario == "lemma-suite":
        return run_lemma_suite(config)
    points = expand_grid(config)
    if with_exact and not force:
        for i, pt in enumerate(points):
            est = estimate_atoms(pt["blocks"])
            if est > ATOM_GUARD:
                raise ResourceError(
                    f"grid point {i} needs ~{est:.3g} atoms (guard {ATOM_GUARD:.0e}); use --force",
                    required=est,
                )
    jobs = [(config, i, pt, with_exact) for i, pt in enumerate(points)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_evaluate_point, jobs))
    else:
        results = [_evaluate_point(j) for j in jobs]
    rows = [r for r, _ in results]
    violations = [v for _, vs in results for v in vs]
    columns = _column_order(config, rows)
    summary = _summarize(config, rows, violations, with_exact)
    return RunReport(config, columns, rows, summary)


def lemma_suite_records(seed: int = 0, instances: int = 100, rtol: float = bd.QUAD_RTOL):
    """Randomized validator instances, cycling Presman, concentration and charfn checks."""
    rng = np.random.default_rng(seed)
    records = []
    gammas = (0.5, 1.0, 2.0)
    t_grid = np.linspace(-math.pi, math.pi, 400)
    for i in range(instances):
        kind = i % 3
        if kind == 0:
            M = ri.random_integer_signed_measure(rng)
            recs = [bd.validate_presman(M, gammas[(i // 3) % 3], float(rng.uniform(-3, 3)), rtol)]
        elif kind == 1:
            F = ri.random_distribution(rng, integer=bool(rng.random() < 0.5))
            h = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
            a = float(rng.choice([0.5, 1.0, 2.0]))
            recs = bd.validate_lemma_ac(F, h, a, rtol)
        else:
            recs = bd.validate_charfn_bound(ri.random_tworuns_valid(rng), t_grid)
        for r in recs:
            r.inputs = dict(r.inputs, instance=i)
        records.extend(recs)
    return records


LEMMA_COLUMNS = ["instance", "check", "hard", "lhs", "rhs", "margin", "ratio", "pass", "inputs"]


def run_lemma_suite(config: ExperimentConfig) -> RunReport:
    rtol = config.tolerances.get("quad_rtol", bd.QUAD_RTOL)
    records = lemma_suite_records(config.seed, config.instances, rtol)
    rows = []
    for r in records:
        rows.append({
            "instance": r.inputs["instance"], "check": r.check, "hard": r.hard,
            "lhs": r.lhs, "rhs": r.rhs, "margin": r.margin,
            "ratio": "" if r.ratio is None else r.ratio, "pass": r.passed,
            "inputs": json.dumps(r.inputs, sort_keys=True),
        })
    failures = [r.to_dict() for r in records if r.hard and not r.passed]
    soft_bad = [r.to_dict() for r in records if not r.hard and not r.passed]
    checks = sorted({r.check for r in records})
    summary = {
        "schema": SCHEMA,
        "scenario": "lemma-suite",
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "config": config.to_dict(),
        "instances": config.instances,
        "pass_counts": {
            c: {"passed": sum(r.passed for r in records if r.check == c),
                "total": sum(1 for r in records if r.check == c)}
            for c in checks
        },
        "ratio_ranges": {
            c: [min(r.ratio for r in records if r.check == c), max(r.ratio for r in records if r.check == c)]
            for c in checks if any(r.ratio is not None for r in records if r.check == c)
        },
        "errors": soft_bad,
        "hard_assertions": {"passed": not failures, "violations": failures},
    }
    return RunReport(config, list(LEMMA_COLUMNS), rows, summary, records)


# -- output -----------------------------------------------------------------


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def write_results(report: RunReport, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.columns)
        for r in report.rows:
            writer.writerow([_cell(r.get(c, "")) for c in report.columns])
    (out / "summary.json").write_text(json.dumps(_jsonable(report.summary), indent=2, sort_keys=True) + "\n")
    emit_plotdata(report, out)
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in rows:
            writer.writerow([_cell(v) for v in r])


def emit_plotdata(report: RunReport, out_dir) -> list[Path]:
    """Per-figure CSV files under ``out_dir/figures``; nothing is rendered."""
    fig = Path(out_dir) / "figures"
    fig.mkdir(parents=True, exist_ok=True)
    written = []
    if report.config.scenario == "lemma-suite":
        path = fig / "margins.csv"
        _write_csv(path, ["instance", "check", "margin", "ratio"],
                   [[r["instance"], r["check"], r["margin"], r["ratio"]] for r in report.rows])
        return [path]

    variants = report.config.variants
    axis = report.summary.get("slope_axis")
    axis_name = axis.split(".")[1] if axis else "n"
    header = [f"log_{axis_name}"]
    for v in variants:
        header += [f"log_distance.{v}", f"log_shape.{v}"]
    rows = []
    if axis:
        for r in report.rows:
            line = [_log(r.get(axis))]
            for v in variants:
                line += [_log(r.get(f"{v}.distance")), _log(r.get(f"{v}.total"))]
            rows.append(line)
    path = fig / "slope.csv"
    _write_csv(path, header, rows)
    written.append(path)

    path = fig / "ratio.csv"
    _write_csv(path, ["grid_id"] + [f"ratio.{v}" for v in variants],
               [[r["grid_id"]] + [r.get(f"{v}.ratio", "") for v in variants] for r in report.rows])
    written.append(path)
    return written


def _log(v):
    if _is_number(v) and v > 0 and math.isfinite(v):
        return math.log(v)
    return ""
