"""Parameter sweeps over the experiment suites, report files and tolerance checks."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .em import ObservationPoint, RwgPair, electrostatic_integral, rwg_convolution, rwg_oracle
from .errors import ConfigurationError, NsiIbpError, UnsolvableRelationError
from .families import (FamilyCase, analytic_reference, eval_hybrid, eval_log_power, eval_near_singular_minus,
                       eval_near_singular_plus, eval_power_law, family_integrand)
from .quadrature import (DEFAULT_PANELS, DEFAULT_POINTS_PER_PANEL, Interval, gauss_legendre_rule,
                         oracle_integrate)

SUITES = ("power_law", "hybrid", "electrostatic", "electromagnetic", "custom")
STATUS_OK = "ok"

# parameter names in grid (row-major) order, and which must be strictly positive
SUITE_PARAMS = {
    "power_law": ("gamma", "offset", "delta_gamma"),
    "hybrid": ("gamma", "beta", "offset"),
    "electrostatic": ("d", "offset_ratio"),
    "electromagnetic": ("x", "y"),
}
LOG_PARAMS = {"power_law": ("offset", "delta_gamma"), "hybrid": ("offset",)}
CUSTOM_PARAMS = ("gamma", "beta", "offset", "R", "gamma_tilde")

DEFAULT_GRIDS = {
    "power_law": {"gamma": "0.5", "offset": "log10:-25:1:4", "delta_gamma": "log10:-12:1:0"},
    "hybrid": {"gamma": "0:0.1:0.9,1:1:9", "beta": "1", "offset": "log10:-25:1:4"},
    "electrostatic": {"d": "0.1:0.025:0.2", "offset_ratio": "0:5:50"},
    "electromagnetic": {"x": "0.05:0.1:0.95", "y": "0.05:0.1:0.95"},
    "custom": {},
}
DEFAULT_SCALARS = {
    "power_law": {"interval": [0.0, 1.0], "method": "approximate"},
    "hybrid": {"interval": [0.0, 0.01], "method": "approximate", "gamma_tilde": 0.0},
    "electrostatic": {"gamma_tilde": 1.0, "method": "approximate"},
    "electromagnetic": {"k": 1.0, "z": 0.0, "component": "x", "triangle": "plus", "oracle_points": 100_000},
    "custom": {"family": "power_law", "interval": [0.0, 1.0], "method": "conventional",
               "offset_known": False, "oracle_points": 1_000_000},
}
CONFIG_KEYS = {"suite", "grids", "points_per_panel", "panels", "out", "format", "interval", "method",
               "gamma_tilde", "k", "z", "component", "triangle", "oracle_points", "outer_panels", "family",
               "offset_known"}


def parse_grid(spec) -> List[float]:
    """Grid from a list, a number, or text: 'start:step:stop', 'log10:start:step:stop'
    (exponents), or a comma list of those pieces."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        try:
            return [float(v) for v in spec]
        except (TypeError, ValueError):
            raise ConfigurationError(f"grid list must hold numbers, got {spec!r}") from None
    if not isinstance(spec, str):
        raise ConfigurationError(f"cannot read grid {spec!r}")
    out: List[float] = []
    for piece in filter(None, (p.strip() for p in spec.split(","))):
        log = piece.startswith("log10:")
        parts = piece[6:].split(":") if log else piece.split(":")
        try:
            nums = [float(p) for p in parts]
        except ValueError:
            raise ConfigurationError(f"bad grid piece {piece!r}") from None
        if len(nums) == 1 and not log:
            vals = nums
        elif len(nums) == 3:
            start, step, stop = nums
            if step == 0 or (stop - start) / step < 0:
                raise ConfigurationError(f"grid {piece!r} never reaches its stop value")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = [float(f"{start + i * step:.15g}") for i in range(n)]
        else:
            raise ConfigurationError(f"grid piece {piece!r} must be a number or start:step:stop")
        out.extend(float(f"{10.0 ** v:.15g}") for v in vals) if log else out.extend(vals)
    return out


@dataclass
class SweepConfig:
    """One suite sweep: ordered parameter grids plus scalar settings."""

    suite: str
    grids: Dict[str, List[float]] = field(default_factory=dict)
    scalars: Dict[str, object] = field(default_factory=dict)
    points_per_panel: int = DEFAULT_POINTS_PER_PANEL
    panels: int = DEFAULT_PANELS
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        self.validate()

    @property
    def param_names(self) -> Tuple[str, ...]:
        if self.suite == "custom":
            return tuple(self.grids)
        return SUITE_PARAMS[self.suite]

    def validate(self) -> None:
        if self.suite not in SUITES:
            raise ConfigurationError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if self.format not in ("csv", "json"):
            raise ConfigurationError(f"format must be csv or json, got {self.format!r}")
        if int(self.points_per_panel) != self.points_per_panel or not 1 <= self.points_per_panel <= 64:
            raise ConfigurationError("points_per_panel must be an integer in [1, 64]")
        if int(self.panels) != self.panels or self.panels < 1:
            raise ConfigurationError("panels must be a positive integer")
        if self.suite == "custom":
            unknown = set(self.grids) - set(CUSTOM_PARAMS)
            if unknown:
                raise ConfigurationError(f"custom grids may only use {CUSTOM_PARAMS}, got {sorted(unknown)}")
            if not self.grids:
                raise ConfigurationError("custom suite needs at least one grid")
        else:
            unknown = set(self.grids) - set(SUITE_PARAMS[self.suite])
            if unknown:
                raise ConfigurationError(f"suite {self.suite} has no parameter(s) {sorted(unknown)}")
            missing = [p for p in SUITE_PARAMS[self.suite] if p not in self.grids]
            if missing:
                raise ConfigurationError(f"suite {self.suite} is missing grid(s) {missing}")
        for name, vals in self.grids.items():
            if len(vals) == 0:
                raise ConfigurationError(f"grid {name!r} is empty")
            if not all(np.isfinite(vals)):
                raise ConfigurationError(f"grid {name!r} has non-finite values")
            if name in LOG_PARAMS.get(self.suite, ()) and min(vals) <= 0:
                raise ConfigurationError(f"log-spaced grid {name!r} must be strictly positive")

    @property
    def size(self) -> int:
        return int(np.prod([len(self.grids[p]) for p in self.param_names]))

    def cells(self):
        """Parameter tuples in row-major order over the declared grids."""
        return product(*(self.grids[p] for p in self.param_names))

    @classmethod
    def from_dict(cls, doc: dict, overrides: Optional[dict] = None) -> "SweepConfig":
        doc = dict(doc)
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        grid_over = overrides.pop("grids", {})
        doc.update(overrides)
        unknown = set(doc) - CONFIG_KEYS
        if unknown:
            raise ConfigurationError(f"unknown config key(s) {sorted(unknown)}")
        suite = doc.get("suite")
        if suite not in SUITES:
            raise ConfigurationError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
        raw = dict(DEFAULT_GRIDS[suite])
        raw.update(doc.get("grids") or {})
        raw.update(grid_over)
        grids = {k: parse_grid(v) for k, v in raw.items()}
        scalars = dict(DEFAULT_SCALARS[suite])
        for key in CONFIG_KEYS - {"suite", "grids", "points_per_panel", "panels", "out", "format"}:
            if key in doc:
                scalars[key] = doc[key]
        try:
            ppp = int(doc.get("points_per_panel", DEFAULT_POINTS_PER_PANEL))
            panels = int(doc.get("panels", DEFAULT_PANELS))
        except (TypeError, ValueError):
            raise ConfigurationError("points_per_panel and panels must be integers") from None
        return cls(suite, grids, scalars, ppp, panels, doc.get("out"), doc.get("format", "csv"))


def load_config(path, overrides: Optional[dict] = None) -> SweepConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object")
    return SweepConfig.from_dict(doc, overrides)


@dataclass(frozen=True)
class AccuracyRecord:
    suite: str
    params: Tuple[Tuple[str, float], ...]
    value: complex
    reference: complex
    epsilon: float
    status: str = STATUS_OK

    @property
    def ok(self) -> bool:
        return not self.status.startswith("error")

    def param(self, name):
        return dict(self.params)[name]


def relative_deviation(value: complex, reference: complex) -> float:
    if reference == 0:
        raise ConfigurationError("reference value is zero; relative deviation undefined")
    return abs(value - reference) / abs(reference)


def _interval(scalars):
    try:
        a, b = scalars["interval"]
    except (KeyError, TypeError, ValueError):
        raise ConfigurationError("interval must be a pair [a, b]") from None
    return Interval(float(a), float(b))


def _eval_family(case, method, gamma_tilde, rule):
    fam = case.family
    if fam == "power_law":
        return eval_power_law(case, method, gamma_tilde, rule=rule)
    if fam == "hybrid":
        return eval_hybrid(case, method, gamma_tilde, rule=rule)
    if fam == "log_power":
        return eval_log_power(case, method, rule=rule)
    if fam == "near_singular_plus":
        return eval_near_singular_plus(case, method, gamma_tilde, rule=rule)
    return eval_near_singular_minus(case, method, gamma_tilde, rule=rule)


def _cell(cfg: SweepConfig, p: dict, rule):
    """(value, reference, status) for one grid cell."""
    s, suite = cfg.scalars, cfg.suite
    if suite == "power_law":
        g = p["gamma"]
        case = FamilyCase("power_law", _interval(s), gamma=g, offset=p["offset"])
        # delta_gamma is measured in units of gamma
        v = eval_power_law(case, s["method"], g * (1.0 + p["delta_gamma"]), rule=rule)
        return v, analytic_reference(case), STATUS_OK
    if suite == "hybrid":
        case = FamilyCase("hybrid", _interval(s), gamma=p["gamma"], beta=int(p["beta"]), offset=p["offset"],
                          offset_known=True)
        try:
            v, status = eval_hybrid(case, s["method"], s["gamma_tilde"], rule=rule), STATUS_OK
        except UnsolvableRelationError:
            v, status = eval_hybrid(case, "conventional", rule=rule), "fallback:conventional"
        return v, analytic_reference(case), status
    if suite == "electrostatic":
        d, o = p["d"], p["offset_ratio"] * p["d"]
        v = electrostatic_integral(d, (0.0, d), s["gamma_tilde"], offset=o, method=s["method"], rule=rule)
        ref = analytic_reference(FamilyCase("near_singular_plus", Interval(0.0, d), gamma=0.5, R=d, offset=o))
        return v, ref, STATUS_OK
    if suite == "electromagnetic":
        obs = ObservationPoint(p["x"], p["y"], float(s["z"]))
        pair = RwgPair.unit_square(float(s["k"]))
        outer = gauss_legendre_rule(rule.points_per_panel, int(s["outer_panels"])) if "outer_panels" in s else None
        v = rwg_convolution(obs, pair, s["component"], outer_rule=outer, triangle=s["triangle"], inner_rule=rule)
        ref = rwg_oracle(obs, pair, s["component"], s["triangle"], n_points=int(s["oracle_points"]))
        return v, ref, STATUS_OK
    kw = {k: p[k] for k in ("gamma", "offset", "R") if k in p}
    if "beta" in p:
        kw["beta"] = int(p["beta"])
    case = FamilyCase(s["family"], _interval(s), offset_known=bool(s["offset_known"]), **kw)
    v = _eval_family(case, s["method"], p.get("gamma_tilde", s.get("gamma_tilde")), rule)
    ref = analytic_reference(case)
    if ref is None:
        ref = oracle_integrate(family_integrand(case).f, case.interval, int(s["oracle_points"]))
    return v, ref, STATUS_OK


def run_suite(cfg: SweepConfig) -> List[AccuracyRecord]:
    """One record per grid cell, in row-major grid order. Cells that raise are
    recorded with an error status and the sweep continues."""
    cfg.validate()
    rule = gauss_legendre_rule(cfg.points_per_panel, cfg.panels)
    names = cfg.param_names
    records = []
    for values in cfg.cells():
        p = dict(zip(names, values))
        params = tuple(zip(names, (float(v) for v in values)))
        try:
            v, ref, status = _cell(cfg, p, rule)
            if ref is None:
                raise ConfigurationError("no reference value for this cell")
            v, ref = complex(v), complex(ref)
            eps = relative_deviation(v, ref)
        except (NsiIbpError, ArithmeticError, ValueError) as exc:
            records.append(AccuracyRecord(cfg.suite, params, complex(math.nan, math.nan),
                                          complex(math.nan, math.nan), math.nan, f"error:{type(exc).__name__}"))
            continue
        records.append(AccuracyRecord(cfg.suite, params, v, ref, eps, status))
    return records


# ---- reports ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


def _columns(records: Sequence[AccuracyRecord]):
    if not records:
        raise ConfigurationError("no records to write")
    names = tuple(n for n, _ in records[0].params)
    suites = {r.suite for r in records}
    if len(suites) != 1 or any(tuple(n for n, _ in r.params) != names for r in records):
        raise ConfigurationError("a report holds records of one suite with one parameter layout")
    return names


def _row(r: AccuracyRecord):
    return ([_fmt(v) for _, v in r.params]
            + [_fmt(r.value.real), _fmt(r.value.imag), _fmt(r.reference.real), _fmt(r.reference.imag),
               _fmt(r.epsilon)])


def report_header(names) -> List[str]:
    return ["suite", *names, "I_real", "I_imag", "I0_real", "I0_imag", "epsilon", "status"]


def render_report(records: Sequence[AccuracyRecord], fmt: str) -> str:
    """Report text: CSV (header + one row per record) or a JSON array of objects."""
    names = _columns(records)
    header = report_header(names)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in records:
            w.writerow([r.suite, *_row(r), r.status])
        return buf.getvalue()
    if fmt != "json":
        raise ConfigurationError(f"format must be csv or json, got {fmt!r}")
    lines = []
    for r in records:
        vals = [json.dumps(r.suite)]
        vals += ["null" if x in ("nan", "inf", "-inf") else x for x in _row(r)]
        vals.append(json.dumps(r.status))
        lines.append("  {" + ", ".join(f"{json.dumps(k)}: {v}" for k, v in zip(header, vals)) + "}")
    return "[\n" + ",\n".join(lines) + "\n]\n"


def emit_report(records: Sequence[AccuracyRecord], fmt: str, path) -> None:
    """Write the report to path ('-' for standard output)."""
    text = render_report(records, fmt)
    if str(path) == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _record_from(suite, names, nums, status):
    f = [math.nan if v is None or v == "" else float(v) for v in nums]
    k = len(names)
    return AccuracyRecord(suite, tuple(zip(names, f[:k])), complex(f[k], f[k + 1]), complex(f[k + 2], f[k + 3]),
                          f[k + 4], status)


def load_report(path) -> List[AccuracyRecord]:
    """Read a report written by emit_report (format taken from the content)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("["):
        rows = json.loads(text)
        out = []
        for row in rows:
            keys = list(row)
            names = keys[1:keys.index("I_real")]
            nums = [row[k] for k in keys[1:-1]]
            out.append(_record_from(row["suite"], names, nums, row["status"]))
        return out
    reader = csv.reader(text.splitlines())
    header = next(reader)
    if header[0] != "suite" or header[-6:] != ["I_real", "I_imag", "I0_real", "I0_imag", "epsilon", "status"]:
        raise ConfigurationError(f"{path} is not a sweep report")
    names = header[1:-6]
    return [_record_from(row[0], names, row[1:-1], row[-1]) for row in reader if row]


# ---- tolerance checks --------------------------------------------------------

@dataclass
class RuleResult:
    description: str
    passed: bool
    worst: float
    offending: List[Tuple[Tuple[str, float], ...]]


@dataclass
class SuiteSummary:
    suite: str
    max_epsilon: float
    fraction_under: float
    rules: List[RuleResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rules)


def load_tolerances(path=None) -> dict:
    """Tolerance map; without a path the packaged defaults are used."""
    try:
        if path is None:
            text = resources.files("nsi_ibp").joinpath("data/tolerances.json").read_text(encoding="utf-8")
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        tol = json.loads(text)
    except OSError as exc:
        raise ConfigurationError(f"cannot read tolerances {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"tolerances {path} are not valid JSON: {exc}") from exc
    if not isinstance(tol, dict):
        raise ConfigurationError("tolerances must map suite names to rules")
    return tol


def _normalise_rules(spec):
    """A bare number means every cell below it; otherwise a list of rule objects."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        spec = [{"kind": "all", "tol": float(spec)}]
    if isinstance(spec, dict):
        spec = [spec]
    if not isinstance(spec, list):
        raise ConfigurationError(f"bad tolerance entry {spec!r}")
    rules = []
    for r in spec:
        if not isinstance(r, dict) or "tol" not in r:
            raise ConfigurationError(f"tolerance rule needs a 'tol' field: {r!r}")
        kind = r.get("kind", "all")
        if kind not in ("all", "best"):
            raise ConfigurationError(f"rule kind must be 'all' or 'best', got {kind!r}")
        op = r.get("op", "<")
        if op not in ("<", "<="):
            raise ConfigurationError(f"rule op must be '<' or '<=', got {op!r}")
        where = r.get("where", {})
        for k, v in where.items():
            if not (isinstance(v, list) and len(v) == 2):
                raise ConfigurationError(f"'where' range for {k!r} must be [lo, hi]")
        rules.append({"kind": kind, "tol": float(r["tol"]), "op": op, "where": where})
    return rules


def _selected(rec, where):
    p = dict(rec.params)
    for k, (lo, hi) in where.items():
        if k not in p:
            raise ConfigurationError(f"tolerance rule filters on unknown parameter {k!r}")
        x = p[k]
        # relative slack so 10**j style grid values match their nominal bounds
        if not (lo - 1e-12 * abs(lo) <= x <= hi + 1e-12 * abs(hi)):
            return False
    return True


def _describe(rule):
    where = ", ".join(f"{k} in [{lo:g}, {hi:g}]" for k, (lo, hi) in rule["where"].items())
    what = "every cell" if rule["kind"] == "all" else "best cell"
    return f"{what}{' with ' + where if where else ''}: epsilon {rule['op']} {rule['tol']:g}"


def compare_against_reference(records: Sequence[AccuracyRecord], tolerances: dict) -> Dict[str, SuiteSummary]:
    """Per-suite max epsilon, the fraction of cells meeting every 'all' rule that covers
    them, and the outcome of each rule. Error-marked cells fail any rule selecting them."""
    by_suite: Dict[str, List[AccuracyRecord]] = {}
    for r in records:
        if r.ok and not (np.isfinite(r.reference.real) and np.isfinite(r.reference.imag)):
            raise ConfigurationError(f"record {r.params} has no reference value")
        by_suite.setdefault(r.suite, []).append(r)
    out = {}
    for suite, recs in by_suite.items():
        if suite not in tolerances:
            raise ConfigurationError(f"no tolerance given for suite {suite!r}")
        rules = _normalise_rules(tolerances[suite])
        eps = np.array([r.epsilon if r.ok else np.inf for r in recs])
        covered = np.zeros(len(recs), dtype=bool)
        under_all = np.ones(len(recs), dtype=bool)
        results = []
        for rule in rules:
            if rule["kind"] == "all":
                mask = np.array([_selected(r, rule["where"]) for r in recs])
                ok = (eps < rule["tol"]) if rule["op"] == "<" else (eps <= rule["tol"])
                covered |= mask
                under_all &= ~mask | ok
            sel = [r for r in recs if _selected(r, rule["where"])]
            if not sel:
                raise ConfigurationError(f"rule '{_describe(rule)}' selects no cells")
            e = np.array([r.epsilon if r.ok else np.inf for r in sel])
            under = (e < rule["tol"]) if rule["op"] == "<" else (e <= rule["tol"])
            if rule["kind"] == "all":
                results.append(RuleResult(_describe(rule), bool(under.all()), float(e.max()),
                                          [r.params for r, u in zip(sel, under) if not u]))
            else:
                results.append(RuleResult(_describe(rule), bool(under.any()), float(e.min()),
                                          [] if under.any() else [sel[int(np.argmin(e))].params]))
        frac = float(np.mean(under_all[covered])) if covered.any() else math.nan
        out[suite] = SuiteSummary(suite, float(eps.max()), frac, results)
    return out


def format_summary(summary: Dict[str, SuiteSummary]) -> str:
    lines = []
    for s in summary.values():
        frac = "n/a" if math.isnan(s.fraction_under) else f"{100 * s.fraction_under:.1f}%"
        lines.append(f"{s.suite}: {'PASS' if s.passed else 'FAIL'}  max epsilon {s.max_epsilon:.3e}, "
                     f"{frac} of covered cells under tolerance")
        for r in s.rules:
            lines.append(f"  [{'pass' if r.passed else 'FAIL'}] {r.description} (observed {r.worst:.3e})")
            for params in r.offending[:10]:
                lines.append("      offending cell: " + ", ".join(f"{k}={v:.6g}" for k, v in params))
            if len(r.offending) > 10:
                lines.append(f"      ... and {len(r.offending) - 10} more")
    return "\n".join(lines)
