"""Named experiments with typed parameters, reproducible reports and pass/fail checks.

Each experiment turns a config into summary rows (estimate, target,
tolerance, verdict), CSV tables with fixed column order and optional plot
specifications.  ``run`` writes them to the output directory as
``summary.json``, ``<table>.csv`` and, if asked, ``<plot>.svg``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import geometry as geo
from .bridge import BridgeSpec, bidisk_sup_dist, bridge_sup_f, bridge_sup_track
from .errors import NumericalFailure
from .estimators import (
    EstimateCI,
    hit_prob,
    ks_two_sample,
    mc_laplace,
    proportion,
    rate_fit,
    subgaussian_tail_fit,
)
from .kernels import JacobiQuery, fit_envelope, grad_log_heat, kcal, laplace_fpt, log_dm_envelope, log_h, log_heat_kernel
from .reference import hit_prob_reference
from .sde import CirSpec, TimeChangeSpec, cir_via_timechange, comparison_check, simulate_linear_drift

__all__ = [
    "Param",
    "Experiment",
    "ExperimentConfig",
    "SummaryRow",
    "Table",
    "Plot",
    "Outcome",
    "ReportBundle",
    "ConfigError",
    "REGISTRY",
    "validate",
    "run",
    "execute",
]

SEED_MAX = 2**64


class ConfigError(ValueError):
    """Raised for configs that ``validate`` rejects."""

    def __init__(self, diagnostics: list[str]):
        super().__init__("; ".join(diagnostics))
        self.diagnostics = diagnostics


# ---------------------------------------------------------------- parameters


@dataclass(frozen=True)
class Param:
    kind: str  # float, int, bool, str, floats, ints
    default: Any
    doc: str = ""
    low: float | None = None
    high: float | None = None
    open_low: bool = False
    choices: tuple = ()
    min_len: int = 1

    def check(self, name: str, value) -> list[str]:
        if self.kind in ("floats", "ints"):
            if not isinstance(value, (list, tuple)) or len(value) < self.min_len:
                return [f"{name}: expected a list of at least {self.min_len} numbers"]
            out = []
            for v in value:
                out += self._scalar(name, v, self.kind[:-1])
            if not out and len(set(map(float, value))) != len(value):
                out.append(f"{name}: values must be distinct")
            return out
        return self._scalar(name, value, self.kind)

    def _scalar(self, name, v, kind) -> list[str]:
        if kind == "bool":
            return [] if isinstance(v, bool) else [f"{name}: expected true or false"]
        if kind == "str":
            if not isinstance(v, str):
                return [f"{name}: expected a string"]
            if self.choices and v not in self.choices:
                return [f"{name}: must be one of {', '.join(self.choices)}"]
            return []
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return [f"{name}: expected a number"]
        if kind == "int" and not float(v).is_integer():
            return [f"{name}: expected an integer"]
        if not math.isfinite(v):
            return [f"{name}: must be finite"]
        if self.low is not None and (v <= self.low if self.open_low else v < self.low):
            return [f"{name}: must be {'>' if self.open_low else '>='} {self.low:g}"]
        if self.high is not None and v > self.high:
            return [f"{name}: must be <= {self.high:g}"]
        if self.choices and v not in self.choices:
            return [f"{name}: must be one of {', '.join(map(str, self.choices))}"]
        return []

    def coerce(self, value):
        if self.kind == "float":
            return float(value)
        if self.kind == "int":
            return int(value)
        if self.kind == "floats":
            return [float(v) for v in value]
        if self.kind == "ints":
            return [int(v) for v in value]
        return value


def _pos(default, doc="", **kw):
    return Param("float", default, doc, low=0.0, open_low=True, **kw)


def _posints(default, doc="", choices=()):
    return Param("ints", default, doc, low=1, choices=choices)


def _posfloats(default, doc="", min_len=1):
    return Param("floats", default, doc, low=0.0, open_low=True, min_len=min_len)


def _frac(default, doc=""):
    return Param("float", default, doc, low=0.0, high=1.0, open_low=True)


# ------------------------------------------------------------------- outputs


@dataclass
class SummaryRow:
    quantity: str
    value: Any
    target: Any = None
    tolerance: Any = None
    passed: bool | None = None
    anchor: str = ""
    note: str = ""


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(self.columns)
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("row length does not match the header")
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


@dataclass
class Plot:
    name: str
    title: str
    xlabel: str
    ylabel: str
    series: list[tuple[str, Any, Any]]
    logy: bool = False


@dataclass
class Outcome:
    rows: list[SummaryRow]
    tables: dict[str, Table]
    plots: list[Plot] = field(default_factory=list)


# ------------------------------------------------------------- configuration


@dataclass(frozen=True)
class Experiment:
    name: str
    anchor: str
    about: str
    params: dict[str, Param]
    runner: Callable[["ExperimentConfig", dict, "Context"], Outcome]
    columns: dict[str, tuple[str, ...]]
    n_paths: int | None = None
    h: float | None = None
    check: Callable[[dict], list[str]] | None = None

    @property
    def monte_carlo(self) -> bool:
        return self.n_paths is not None


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    n_paths: int | None = None
    h: float | None = None
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        diags = validate(raw)
        if diags:
            raise ConfigError(diags)
        exp = REGISTRY[raw["experiment"]]
        return cls(
            raw["experiment"],
            dict(raw.get("params", {})),
            int(raw.get("seed", 0)),
            int(raw.get("n_paths", exp.n_paths)) if exp.monte_carlo else None,
            float(raw.get("h", exp.h)) if exp.monte_carlo else None,
            raw.get("output_dir"),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(read_config(path))

    def resolved(self) -> dict:
        exp = REGISTRY[self.experiment]
        return {k: p.coerce(self.params.get(k, p.default)) for k, p in exp.params.items()}

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.resolved(),
            "seed": self.seed,
            "n_paths": self.n_paths,
            "h": self.h,
            "output_dir": self.output_dir,
        }


def read_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError([f"cannot read config: {e}"]) from None
    except json.JSONDecodeError as e:
        raise ConfigError([f"invalid JSON: {e}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    return raw


_TOP = {"experiment", "params", "seed", "n_paths", "h", "output_dir"}


def validate(config) -> list[str]:
    """Diagnostics for a config dict or ``ExperimentConfig``; empty iff ``run`` accepts it."""
    raw = asdict(config) if isinstance(config, ExperimentConfig) else config
    if not isinstance(raw, dict):
        return ["config must be a JSON object"]
    out = [f"unknown config key {k!r}" for k in sorted(set(raw) - _TOP)]
    name = raw.get("experiment")
    if name not in REGISTRY:
        known = ", ".join(REGISTRY)
        return out + [f"unknown experiment {name!r}; registered: {known}"]
    exp = REGISTRY[name]
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < SEED_MAX:
        out.append("seed: expected an integer in [0, 2^64)")
    if exp.monte_carlo:
        n = raw.get("n_paths", exp.n_paths)
        if n is None or isinstance(n, bool) or not isinstance(n, int) or n < 1:
            out.append("n_paths: expected a positive integer")
        h = raw.get("h", exp.h)
        if h is None or isinstance(h, bool) or not isinstance(h, (int, float)) or not 0 < h < 1:
            out.append("h: expected a step in (0, 1)")
    od = raw.get("output_dir")
    if od is not None and not isinstance(od, str):
        out.append("output_dir: expected a path string")
    params = raw.get("params", {})
    if not isinstance(params, dict):
        return out + ["params: expected an object"]
    out += [f"unknown parameter {k!r} for {name}" for k in sorted(set(params) - set(exp.params))]
    bad = False
    for k, p in exp.params.items():
        if k in params:
            errs = p.check(k, params[k])
            bad |= bool(errs)
            out += errs
    if not bad and exp.check is not None:
        merged = {k: p.coerce(params.get(k, p.default)) for k, p in exp.params.items()}
        out += exp.check(merged)
    return out


# ------------------------------------------------------------------- helpers


@dataclass(frozen=True)
class Context:
    threads: int | None = None


def sub_seed(seed: int, *key: int) -> int:
    """Independent 64-bit seed for a sub-run, a pure function of ``(seed, key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _rel_ok(value, target, tol) -> bool:
    return bool(abs(value - target) <= tol * abs(target))


def _fit_rows(points, label):
    usable = [(x, e) for x, e in points if e.mean > 0 and not e.flagged]
    if len(usable) < 3:
        raise NumericalFailure(f"{label}: fewer than three scales with a positive estimate")
    return rate_fit(usable)


# ----------------------------------------------------------------- CIR rates


def _cir_check(p) -> list[str]:
    out = []
    if p["method"] == "girsanov" and p["k"] < 1:
        out.append("method 'girsanov' requires k >= 1")
    if len(p["nus"]) < 3:
        out.append("nus: a rate fit needs at least three values")
    return out


def _cir_params(**over):
    p = {
        "nus": _posfloats([8.0, 16.0, 24.0, 32.0, 40.0], "drift scales", 3),
        "a": _pos(0.25, "barrier for Y (squared level)"),
        "c": _pos(1.0, "curvature scale"),
        "k": _pos(1.0, "dimension offset"),
        "t": _pos(1.0, "time horizon"),
        "method": Param("str", "girsanov", "estimator", choices=("girsanov", "naive")),
        "tolerance": _pos(0.15, "relative tolerance on the slope"),
        "reference": Param("bool", True, "also solve the backward equation for exact values"),
    }
    p.update(over)
    return p


def _slope_for(cfg, ctx, p, alpha, nus, tag):
    pts, rows = [], []
    for i, nu in enumerate(nus):
        spec = CirSpec(nu, alpha, p["c"], p["k"])
        est = hit_prob(spec, p["a"], p["t"], cfg.n_paths, cfg.h, sub_seed(cfg.seed, i), p["method"], ctx.threads)
        ref = hit_prob_reference(spec, p["a"], p["t"]) if p["reference"] else None
        pts.append((nu, est))
        lm = math.log(est.mean) if est.mean > 0 else None
        rows.append((alpha, nu, est.mean, est.stderr, est.n, lm, ref))
    return _fit_rows(pts, tag), rows


def _ref_slope(rows):
    refs = [(r[1], r[6]) for r in rows if r[6] is not None and r[6] > 0]
    if len(refs) < 2:
        return None
    x, y = np.array(refs).T
    return float(np.polyfit(x, np.log(y), 1)[0])


_CIR_COLS = ("alpha", "nu", "mean", "stderr", "n", "log_mean", "reference")


def _run_cir_rate(cfg, p, ctx) -> Outcome:
    target = -float(kcal(p["a"], p["c"]))
    fit, rows = _slope_for(cfg, ctx, p, 0.0, p["nus"], "cir-rate")
    lo, hi = fit.slope_ci()
    out = [
        SummaryRow("slope", fit.slope, target, p["tolerance"], _rel_ok(fit.slope, target, p["tolerance"])),
        SummaryRow("slope_stderr", fit.slope_stderr),
        SummaryRow("slope_ci95", [lo, hi]),
        SummaryRow("r2", fit.r2),
    ]
    ref = _ref_slope(rows)
    if ref is not None:
        out.append(SummaryRow("reference_slope", ref, target, note="least-squares slope of exact log-probabilities"))
    plot = Plot(
        "rate",
        "first-passage probability against drift scale",
        "nu",
        "P[T_a < t]",
        [("estimate", [r[1] for r in rows], [r[2] for r in rows])]
        + ([("exact", [r[1] for r in rows], [r[6] for r in rows])] if p["reference"] else []),
        logy=True,
    )
    return Outcome(out, {"estimates": Table(_CIR_COLS, rows)}, [plot])


def _perturbed_check(p) -> list[str]:
    out = _cir_check(p)
    al = p["alphas"]
    mags = sorted({abs(a) for a in al if a != 0})
    if 0.0 not in al:
        out.append("alphas must contain 0")
    if len(mags) < 2 or any(-m not in al or m not in al for m in mags):
        out.append("alphas must come in +/- pairs with at least two magnitudes")
    return out


def _run_cir_perturbed(cfg, p, ctx) -> Outcome:
    target = -float(kcal(p["a"], p["c"]))
    slopes, rows_all, fits = {}, [], []
    for al in sorted(p["alphas"]):
        fit, rows = _slope_for(cfg, ctx, p, al, p["nus"], f"alpha={al:g}")
        slopes[al] = fit.slope
        rows_all += rows
        fits.append((al, fit.slope, fit.slope_stderr, fit.r2, _ref_slope(rows)))
    mags = sorted({abs(a) for a in slopes if a != 0})
    m1 = mags[0]
    s0, sm, sp = slopes[0.0], slopes[-m1], slopes[m1]
    out = [SummaryRow("target", target)]
    out.append(
        SummaryRow(
            f"bracket at |alpha|={m1:g}",
            [sm, s0, sp],
            passed=bool(min(sm, sp) < s0 < max(sm, sp)),
            note="slopes at -alpha, 0, +alpha",
        )
    )
    for sign in (-1.0, 1.0):
        gaps = [abs(slopes[sign * m] - target) for m in mags]
        ok = all(g1 < g2 for g1, g2 in zip(gaps, gaps[1:]))
        out.append(
            SummaryRow(
                f"monotone approach, alpha {'<' if sign < 0 else '>'} 0",
                gaps,
                passed=ok,
                note="|slope + K| by increasing |alpha|",
            )
        )
    for al, sl, se, r2, ref in fits:
        out.append(SummaryRow(f"slope alpha={al:g}", sl, note=f"stderr {se:.3g}, r2 {r2:.4f}"))
        if ref is not None:
            out.append(SummaryRow(f"reference_slope alpha={al:g}", ref))
    plot = Plot(
        "slopes",
        "fitted slope against perturbation",
        "alpha",
        "slope",
        [("fit", [f[0] for f in fits], [f[1] for f in fits]), ("-K", [fits[0][0], fits[-1][0]], [target, target])],
    )
    return Outcome(
        out,
        {
            "estimates": Table(_CIR_COLS, rows_all),
            "slopes": Table(("alpha", "slope", "slope_stderr", "r2", "reference_slope"), fits),
        },
        [plot],
    )


# ------------------------------------------------------- Laplace / time change


def _laplace_check(p) -> list[str]:
    out = []
    if p["q"] < 0.5:
        out.append("q >= 1/2 required (entrance boundary at 0)")
    if not p["x"] < p["a"]:
        out.append("need x < a")
    return out


def _run_laplace(cfg, p, ctx) -> Outcome:
    lams = p["lambdas"]
    ests = mc_laplace(p["nu"], p["q"], lams, p["x"], p["a"], cfg.n_paths, cfg.h, cfg.seed, p["t_max"] or None, p["crossing"], ctx.threads)
    rows, out = [], []
    for lm, e in zip(lams, ests):
        ex = laplace_fpt(JacobiQuery(p["nu"], p["q"], lm, p["x"], p["a"]))
        z = (e.mean - ex) / e.stderr
        rows.append((lm, e.mean, e.stderr, ex, z, e.bias_bound))
        out.append(SummaryRow(f"lambda={lm:g}", e.mean, ex, p["z"], bool(abs(z) <= p["z"]), note=f"z = {z:.3f}"))
    plot = Plot("laplace", "Laplace transform of the first-passage time", "lambda", "E[exp(-lambda T)]",
                [("Monte Carlo", list(lams), [r[1] for r in rows]), ("closed form", list(lams), [r[3] for r in rows])])
    return Outcome(out, {"laplace": Table(("lambda", "mc", "stderr", "exact", "z", "bias_bound"), rows)}, [plot])


_QUANTS = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99)


def _run_timechange(cfg, p, ctx) -> Outcome:
    tc = TimeChangeSpec(p["a"], p["nu"])
    A = cir_via_timechange(p["k"], p["a"], p["nu"], p["T"], cfg.h, sub_seed(cfg.seed, 0), cfg.n_paths, ctx.threads)
    B = simulate_linear_drift(p["k"], tc.c_nu, p["T"], cfg.h, sub_seed(cfg.seed, 1), cfg.n_paths, threads=ctx.threads)
    xa, xb = A.values[:, -1], B.values[:, -1]
    ks = ks_two_sample(xa, xb)
    rows = [(q, float(np.quantile(xa, q)), float(np.quantile(xb, q))) for q in _QUANTS]
    out = [
        SummaryRow("ks_statistic", ks.statistic, ks.critical_1pct, None, ks.passed, note="below the 1% critical value"),
        SummaryRow("c_nu", tc.c_nu),
        SummaryRow("mean time-change", float(xa.mean())),
        SummaryRow("mean direct", float(xb.mean())),
    ]
    plot = Plot("quantiles", "marginal quantiles", "level", "X_T",
                [("time change", list(_QUANTS), [r[1] for r in rows]), ("direct", list(_QUANTS), [r[2] for r in rows])])
    return Outcome(out, {"quantiles": Table(("level", "timechange", "direct"), rows)}, [plot])


# ----------------------------------------------------------------- kernels


def _run_descent(cfg, p, ctx) -> Outcome:
    rhos = np.linspace(p["rho_lo"], p["rho_hi"], p["n_rho"])
    eps = p["fd_step"]
    rows, out = [], []
    for d in p["ds"]:
        for t in p["ts"]:
            dlog = (log_h(d, t, rhos + eps) - log_h(d, t, rhos - eps)) / (2 * eps)
            # -(1/sinh) h^d' / h^{d+2} in logs
            ratio = -dlog * np.exp(log_h(d, t, rhos) - log_h(d + 2, t, rhos) - np.log(np.sinh(rhos)))
            spread = float((ratio.max() - ratio.min()) / abs(ratio.mean()))
            rows += [(d, t, float(r), float(v)) for r, v in zip(rhos, ratio)]
            out.append(SummaryRow(f"spread d={d} t={t:g}", spread, 0.0, p["tolerance"], spread < p["tolerance"],
                                  note=f"mean ratio {float(ratio.mean()):.10g}"))
    plot = Plot("ratio", "descent ratio", "rho", "ratio",
                [(f"d={d} t={t:g}", [r[2] for r in rows if r[:2] == (d, t)], [r[3] for r in rows if r[:2] == (d, t)])
                 for d in p["ds"] for t in p["ts"]])
    return Outcome(out, {"ratio": Table(("d", "t", "rho", "ratio"), rows)}, [plot])


def _run_gradlog(cfg, p, ctx) -> Outcome:
    rhos = sorted(p["rhos"])
    rows, out = [], []
    for d in p["ds"]:
        for t in p["ts"]:
            g = np.asarray(grad_log_heat(d, p["c"], t, np.array(rhos)), dtype=float)
            dev = np.abs(t / np.array(rhos) * g - 1.0)
            rows += [(d, t, r, float(gi), float(di)) for r, gi, di in zip(rhos, g, dev)]
            at = float(np.interp(p["check_rho"], rhos, dev)) if p["check_rho"] in rhos else None
            if at is None:
                at = float(abs(t / p["check_rho"] * grad_log_heat(d, p["c"], t, p["check_rho"]) - 1.0))
            dec = bool(np.all(np.diff(dev) < 0))
            out.append(SummaryRow(f"deviation d={d} t={t:g} rho={p['check_rho']:g}", at, 0.0, p["tolerance"],
                                  at <= p["tolerance"]))
            out.append(SummaryRow(f"decreasing d={d} t={t:g}", [float(v) for v in dev], passed=dec,
                                  note="|(t/rho) grad log p - 1| over increasing rho"))
    plot = Plot("deviation", "grad-log deviation", "rho", "|(t/rho) G - 1|",
                [(f"d={d} t={t:g}", rhos, [r[4] for r in rows if r[:2] == (d, t)]) for d in p["ds"] for t in p["ts"]],
                logy=True)
    return Outcome(out, {"gradlog": Table(("d", "t", "rho", "grad_log", "deviation"), rows)}, [plot])


def _run_envelope(cfg, p, ctx) -> Outcome:
    d = p["d"]
    rhos = np.linspace(p["rho_min"], p["rho_max"], p["n_rho"])
    params = fit_envelope(d, p["ts"], rhos)
    k = params.k1
    rows, out = [], []
    for t in p["ts"]:
        lk = log_heat_kernel(d, t, rhos)
        lo = log_dm_envelope("lower", params, t, rhos)
        up = log_dm_envelope("upper", params, t, rhos)
        good = (lo <= lk + 1e-12) & (lk <= up + 1e-12)
        resid = lk + rhos**2 / (2 * t) + k * rhos - params.nu_exp * np.log1p(rhos)
        osc = float(resid.max() - resid.min())
        rows += [(t, float(r), float(a), float(b), float(c)) for r, a, b, c in zip(rhos, lk, lo, up)]
        out.append(SummaryRow(f"sandwich t={t:g}", int(good.sum()), int(good.size), None, bool(good.all()),
                              note="grid nodes with lower <= p <= upper"))
        out.append(SummaryRow(f"oscillation t={t:g}", osc, 0.0, p["max_oscillation"], osc < p["max_oscillation"],
                              note="max - min of the log residual at the fitted rate"))
    out += [SummaryRow("K", params.K), SummaryRow("k1", params.k1), SummaryRow("k2", params.k2)]
    plot = Plot("envelope", "kernel and envelopes", "rho", "log p_t",
                [(f"{lab} t={t:g}", [r[1] for r in rows if r[0] == t], [r[i] for r in rows if r[0] == t])
                 for t in p["ts"] for lab, i in (("kernel", 2), ("lower", 3), ("upper", 4))])
    return Outcome(out, {"envelope": Table(("t", "rho", "log_kernel", "log_lower", "log_upper"), rows)}, [plot])


# ----------------------------------------------------------------- geometry


def _fd_laplacian(F, z, c, rel=1e-3):
    """Metric Laplacian ``c^2 z_d^2 sum d^2F - (d - 2) c^2 z_d dF/dz_d`` by central differences."""
    z = np.atleast_2d(z)
    d = z.shape[1]
    zd = z[:, -1]
    hstep = rel * zd
    f0 = F(z)
    second = np.zeros(z.shape[0])
    first = None
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        fp = F(z + hstep[:, None] * e)
        fm = F(z - hstep[:, None] * e)
        second += (fp - 2 * f0 + fm) / hstep**2
        if i == d - 1:
            first = (fp - fm) / (2 * hstep)
    return c**2 * zd**2 * second - (d - 2) * c**2 * zd * first


def _random_line_points(rng, d, n, g_max, c):
    x = np.append(rng.normal(size=d - 1), math.exp(rng.normal()))
    y = np.append(rng.normal(size=d - 1), math.exp(rng.normal()))
    line = geo.GeodesicSpec.through(x, y, "line")
    u = rng.uniform(-2.0, 2.0, n) / c
    g = rng.uniform(0.0, g_max, n)
    th = rng.normal(size=(n, d - 1))
    th /= np.linalg.norm(th, axis=1, keepdims=True)
    return line, geo.from_fermi(geo.FermiCoords(u, g, th), line, c)


def _run_laplacian(cfg, p, ctx) -> Outcome:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    c = p["c"]
    rows, out = [], []
    for d in p["ds"]:
        line, z = _random_line_points(rng, d, p["n_points"], p["g_max"], c)
        g = geo.dist_to_geodesic(z, line, c)[0]
        lap = geo.laplacian_f(z, line, c)
        lower = lap >= 2.0 - 1e-12
        upper = lap <= d + g + 1e-12
        zf = z[: p["fd_points"]]

        def F(w):
            return geo.dist_to_geodesic(w, line, c)[0] ** 2

        fd = _fd_laplacian(F, zf, c)
        rel = np.abs(fd - lap[: zf.shape[0]]) / np.abs(lap[: zf.shape[0]])
        worst = int(np.argmax(lap - d - g))
        rows.append((d, int(lower.sum()), int(upper.sum()), lap.size, float(lap.min()), float((lap - d - g).max()),
                     float(g[worst]), float(rel.max())))
        out.append(SummaryRow(f"lower bound d={d}", int(lower.sum()), lap.size, None, bool(lower.all()),
                              note="points with Delta f >= 2"))
        out.append(SummaryRow(f"upper bound d={d}", int(upper.sum()), lap.size, None, bool(upper.all()),
                              note=f"points with Delta f <= d + g; worst excess {rows[-1][5]:.4g} at g={g[worst]:.3g}"))
        out.append(SummaryRow(f"finite difference d={d}", float(rel.max()), 0.0, p["fd_tolerance"],
                              bool(rel.max() < p["fd_tolerance"]), note="max relative error"))
    cols = ("d", "n_lower_ok", "n_upper_ok", "n_points", "min_lap", "max_excess", "g_at_max_excess", "fd_rel_err")
    gs = np.linspace(0, p["g_max"], 61)
    plot = Plot("laplacian", "Laplacian of the squared distance", "g", "Delta f",
                [(f"d={d}", gs, 2 + 2 * c * gs * (np.tanh(c * gs) + (d - 2) / np.tanh(np.maximum(c * gs, 1e-300))))
                 for d in p["ds"]] + [(f"d + g, d={d}", gs, d + gs) for d in p["ds"]])
    return Outcome(out, {"laplacian": Table(cols, rows)}, [plot])


# ----------------------------------------------------------------- bridges


def _bridge_check(p) -> list[str]:
    if p.get("d", 2) not in (2, 3):
        return [f"d={p['d']}: bridges are supported for d in {{2, 3}}"]
    return []


def _bridge_params(**over):
    p = {
        "d": Param("int", 2, "dimension", low=1),
        "c": _pos(1.0, "curvature scale"),
        "end_cut": Param("float", 1e-3, "remaining time at which the bridge is snapped", low=0.0, high=0.5, open_low=True),
    }
    p.update(over)
    return p


def _run_concentration(cfg, p, ctx) -> Outcome:
    a, target, tol = p["a"], -float(kcal(p["a"], p["c"])), p["tolerance"]
    pts_line, pts_seg, rows = [], [], []
    dominated = True
    for i, s in enumerate(p["ss"]):
        spec = BridgeSpec.standard(p["d"], s, p["c"], step=cfg.h, end_cut=p["end_cut"])
        sup = bridge_sup_f(spec, sub_seed(cfg.seed, i), cfg.n_paths, ("line", "segment"), ctx.threads)
        dominated &= bool(np.all(sup["segment"] >= sup["line"] - 1e-12))
        el, es = proportion(sup["line"] >= a), proportion(sup["segment"] >= a)
        pts_line.append((s, el))
        pts_seg.append((s, es))
        rows.append((s, el.mean, el.stderr, es.mean, es.stderr, el.n))
    fl, fs = _fit_rows(pts_line, "line"), _fit_rows(pts_seg, "segment")
    out = [
        SummaryRow("line slope", fl.slope, target, tol, _rel_ok(fl.slope, target, tol), note=f"stderr {fl.slope_stderr:.3g}"),
        SummaryRow("segment slope", fs.slope, target, tol, bool(fs.slope < 0 and _rel_ok(fs.slope, target, tol)),
                   note=f"stderr {fs.slope_stderr:.3g}"),
        SummaryRow("segment >= line pathwise", dominated, True, None, dominated),
    ]
    plot = Plot("concentration", "P[sup f >= a] against s", "s", "probability",
                [("line", [r[0] for r in rows], [r[1] for r in rows]), ("segment", [r[0] for r in rows], [r[3] for r in rows])],
                logy=True)
    cols = ("s", "p_line", "stderr_line", "p_segment", "stderr_segment", "n")
    return Outcome(out, {"concentration": Table(cols, rows)}, [plot])


def _run_tail(cfg, p, ctx) -> Outcome:
    spec = BridgeSpec.standard(p["d"], p["s"], p["c"], step=cfg.h, end_cut=p["end_cut"])
    sups = bridge_sup_track(spec, cfg.seed, cfg.n_paths, ctx.threads)
    fit = subgaussian_tail_fit(sups, p["q_lo"], p["q_hi"], p["n_points"])
    x = np.sort(sups)
    us = np.quantile(x, np.linspace(p["q_lo"], p["q_hi"], p["n_points"]))
    surv = 1.0 - np.searchsorted(x, us, side="left") / x.size
    rows = [(float(u), float(sv), float(fit.K_hat * math.exp(-fit.c_hat * u * u))) for u, sv in zip(us, surv)]
    out = [
        SummaryRow("r2", fit.r2, p["r2_min"], None, bool(fit.r2 > p["r2_min"])),
        SummaryRow("slope", fit.slope, 0.0, None, bool(fit.slope < 0), note="coefficient of u^2, must be negative"),
        SummaryRow("c_hat", fit.c_hat),
        SummaryRow("K_hat", fit.K_hat),
        SummaryRow("rms_residual", fit.residual),
    ]
    plot = Plot("tail", "tail of the sup distance to the geodesic", "u", "P[sup >= u]",
                [("empirical", [r[0] for r in rows], [r[1] for r in rows]), ("fit", [r[0] for r in rows], [r[2] for r in rows])],
                logy=True)
    return Outcome(out, {"tail": Table(("u", "survival", "fitted"), rows)}, [plot])


def _run_bidisk(cfg, p, ctx) -> Outcome:
    pts, rows = [], []
    for i, s in enumerate(p["ss"]):
        r = bidisk_sup_dist(s, cfg.h, sub_seed(cfg.seed, i), cfg.n_paths, p["end_cut"], ctx.threads)
        e = proportion(r["sup"] > p["a"])
        pts.append((s, e))
        rows.append((s, e.mean, e.stderr, e.n, float(np.median(r["sup"])), float(np.median(r["component1"])),
                     float(np.median(r["component2"]))))
    fit = _fit_rows(pts, "bidisk")
    lo, hi = fit.slope_ci()
    out = [
        SummaryRow("slope", fit.slope, 0.0, None, bool(lo <= 0.0 <= hi), note=f"95% CI [{lo:.4g}, {hi:.4g}] must contain 0"),
        SummaryRow("slope_ci95", [lo, hi]),
    ]
    plot = Plot("bidisk", "P[sup dist > a] against s", "s", "probability",
                [("bidisk", [r[0] for r in rows], [r[1] for r in rows])])
    cols = ("s", "p", "stderr", "n", "median_sup", "median_component1", "median_component2")
    return Outcome(out, {"bidisk": Table(cols, rows)}, [plot])


def _comparison_check(p) -> list[str]:
    nu_p = p["nu"] - p["q"] / (p["alpha0"] * math.tanh(p["alpha0"]))
    return [] if nu_p > 0 else [f"nu - q / (alpha0 tanh alpha0) = {nu_p:.4g} must be positive"]


def _run_comparison(cfg, p, ctx) -> Outcome:
    res = comparison_check(p["nu"], p["q"], p["alpha0"], p["T"], cfg.h, cfg.seed, cfg.n_paths, ctx.threads)
    fu, fl, fb = float(res.upper.mean()), float(res.lower.mean()), float(res.holds.mean())
    m = p["min_fraction"]
    out = [
        SummaryRow("lower ordering", fl, m, None, fl >= m, note="fraction of paths with X^{nu,0} <= X^{nu,q}"),
        SummaryRow("upper ordering", fu, m, None, fu >= m, note="fraction with X^{nu,q} <= X^{nu',0} + alpha0"),
        SummaryRow("nu_prime", res.nu_prime),
    ]
    return Outcome(out, {"comparison": Table(("nu", "q", "alpha0", "nu_prime", "frac_lower", "frac_upper", "frac_both"),
                                             [(p["nu"], p["q"], p["alpha0"], res.nu_prime, fl, fu, fb)])})


# ------------------------------------------------------------------ registry

_EXPERIMENTS = [
    Experiment("cir-rate", "CIR first-passage rate", "log P[T_a < t] against nu, fitted slope vs -K",
               _cir_params(), _run_cir_rate, {"estimates": _CIR_COLS}, 200_000, 2e-4, _cir_check),
    Experiment("cir-rate-perturbed", "perturbed-drift rate bracketing", "slopes for drift perturbations alpha",
               _cir_params(alphas=Param("floats", [-0.2, -0.1, 0.0, 0.1, 0.2], "perturbations", min_len=5)),
               _run_cir_perturbed,
               {"estimates": _CIR_COLS, "slopes": ("alpha", "slope", "slope_stderr", "r2", "reference_slope")},
               200_000, 2e-4, _perturbed_check),
    Experiment("laplace-check", "Jacobi first-passage Laplace transform", "Monte Carlo vs hypergeometric closed form",
               {"nu": Param("float", 5.0, "drift", low=0.0), "q": Param("float", 1.0, "repulsion", low=0.5),
                "lambdas": _posfloats([0.5, 1.0, 2.0], "transform arguments"), "x": _pos(0.0625, "squared start"),
                "a": _pos(1.0, "squared barrier"), "z": _pos(3.0, "allowed standard errors"),
                "t_max": Param("float", 0.0, "simulation horizon; 0 means 10 / min lambda", low=0.0),
                "crossing": Param("str", "bridge", "barrier monitoring", choices=("bridge", "grid"))},
               _run_laplace, {"laplace": ("lambda", "mc", "stderr", "exact", "z", "bias_bound")}, 100_000, 1e-4,
               _laplace_check),
    Experiment("timechange-ks", "CIR time-change identity", "KS test of time-changed squared Bessel vs direct CIR",
               {"k": _pos(2.0, "dimension"), "a": _pos(1.0, "barrier defining c_a"), "nu": Param("float", 3.0, "drift", low=0.0),
                "T": _pos(1.0, "horizon")},
               _run_timechange, {"quantiles": ("level", "timechange", "direct")}, 10_000, 1e-3),
    Experiment("kernel-descent", "heat-kernel descent recursion", "ratio -(1/sinh) dh^d / h^{d+2} constant in rho",
               {"ds": _posints([1, 2, 3], "dimensions"), "ts": _posfloats([0.25, 1.0], "times"),
                "rho_lo": _pos(1.0), "rho_hi": _pos(10.0), "n_rho": Param("int", 37, low=3),
                "fd_step": _pos(1e-4, "central difference step"), "tolerance": _pos(1e-4, "relative spread")},
               _run_descent, {"ratio": ("d", "t", "rho", "ratio")}),
    Experiment("gradlog-limit", "grad-log heat kernel limit", "(t/rho) grad log p_t -> 1 as rho grows",
               {"ds": _posints([2, 3]), "ts": _posfloats([0.25, 0.7]), "rhos": _posfloats([30.0, 40.0, 60.0], min_len=2),
                "c": _pos(1.0), "check_rho": _pos(40.0), "tolerance": _pos(0.05)},
               _run_gradlog, {"gradlog": ("d", "t", "rho", "grad_log", "deviation")}),
    Experiment("laplacian-bounds", "Laplacian of squared geodesic distance", "2 <= Delta f <= d + g and finite differences",
               {"ds": _posints([2, 3, 5]), "n_points": Param("int", 10_000, low=1), "fd_points": Param("int", 100, low=1),
                "g_max": _pos(3.0, "largest sampled distance"), "c": _pos(1.0), "fd_tolerance": _pos(1e-4)},
               _run_laplacian,
               {"laplacian": ("d", "n_lower_ok", "n_upper_ok", "n_points", "min_lap", "max_excess", "g_at_max_excess",
                              "fd_rel_err")}),
    Experiment("envelope-fit", "two-sided heat-kernel envelope", "fit K, k1, k2 so the envelopes sandwich p_t",
               {"d": Param("int", 3, choices=(2, 3)), "ts": Param("floats", [0.25, 1.0], low=0.0, high=1.0, open_low=True),
                "rho_min": Param("float", 1.0, low=0.0), "rho_max": _pos(40.0), "n_rho": Param("int", 391, low=3),
                "max_oscillation": _pos(1.0, "bound on max - min of the log residual")},
               _run_envelope, {"envelope": ("t", "rho", "log_kernel", "log_lower", "log_upper")},
               check=lambda p: [] if p["rho_min"] < p["rho_max"] else ["need rho_min < rho_max"]),
    Experiment("bridge-concentration", "bridge concentration near the geodesic", "log P[sup f >= a] against s",
               _bridge_params(a=_pos(0.25, "squared-distance level"), ss=_posfloats([2.0, 4.0, 6.0, 8.0], min_len=3),
                              tolerance=_pos(0.25)),
               _run_concentration,
               {"concentration": ("s", "p_line", "stderr_line", "p_segment", "stderr_segment", "n")}, 200_000, 5e-4,
               _bridge_check),
    Experiment("bridge-tail", "bridge sub-Gaussian tail", "log P[sup rho(X_t, gamma(t)) >= u] against u^2",
               _bridge_params(s=_pos(4.0), q_lo=_frac(0.5), q_hi=_frac(0.99), n_points=Param("int", 50, low=3),
                              r2_min=_frac(0.9)),
               _run_tail, {"tail": ("u", "survival", "fitted")}, 20_000, 5e-4, _bridge_check),
    Experiment("bidisk-counterexample", "bidisk bridge without concentration", "P[sup dist > a] flat in s",
               {"ss": _posfloats([2.0, 4.0, 8.0], min_len=3), "a": _pos(0.5),
                "end_cut": Param("float", 1e-3, low=0.0, high=0.5, open_low=True)},
               _run_bidisk,
               {"bidisk": ("s", "p", "stderr", "n", "median_sup", "median_component1", "median_component2")},
               20_000, 5e-4),
    Experiment("comparison-check", "pathwise comparison of radial processes", "shared-noise ordering of three processes",
               {"nu": _pos(10.0), "q": Param("float", 1.0, low=0.0), "alpha0": _pos(0.5), "T": _pos(1.0),
                "min_fraction": _frac(0.999)},
               _run_comparison,
               {"comparison": ("nu", "q", "alpha0", "nu_prime", "frac_lower", "frac_upper", "frac_both")},
               1_000, 1e-3, _comparison_check),
]

REGISTRY: dict[str, Experiment] = {e.name: e for e in _EXPERIMENTS}


# ------------------------------------------------------------------- running


@dataclass
class ReportBundle:
    summary: dict
    tables: dict[str, Path]
    plots: dict[str, Path]
    output_dir: Path | None

    @property
    def passed(self) -> bool:
        return bool(self.summary["passed"])


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def execute(config: ExperimentConfig, threads: int | None = None) -> Outcome:
    """Run an experiment in memory without writing files."""
    diags = validate(config)
    if diags:
        raise ConfigError(diags)
    exp = REGISTRY[config.experiment]
    res = exp.runner(config, config.resolved(), Context(threads))
    for r in res.rows:
        r.anchor = r.anchor or exp.anchor
    for name, t in res.tables.items():
        if t.columns != exp.columns[name]:
            raise RuntimeError(f"table {name} has columns {t.columns}, documented {exp.columns[name]}")
    return res


def run(config: ExperimentConfig, out: str | Path | None = None, threads: int | None = None, plots: bool = False) -> ReportBundle:
    """Execute the experiment and write summary.json, CSV tables and optional SVG plots."""
    diags = validate(config)
    if diags:
        raise ConfigError(diags)
    t0 = time.perf_counter()
    res = execute(config, threads)
    wall = time.perf_counter() - t0
    outdir = Path(out or config.output_dir or f"results/{config.experiment}")
    outdir.mkdir(parents=True, exist_ok=True)
    tables = {}
    for name, t in res.tables.items():
        path = outdir / f"{name}.csv"
        path.write_bytes(t.to_csv().encode("utf-8"))
        tables[name] = path
    plot_paths = {}
    if plots:
        from .plotting import write_svg

        for pl in res.plots:
            path = outdir / f"{pl.name}.svg"
            write_svg(pl, path)
            plot_paths[pl.name] = path
    verdicts = [r.passed for r in res.rows if r.passed is not None]
    summary = {
        "experiment": config.experiment,
        "anchor": REGISTRY[config.experiment].anchor,
        "passed": all(verdicts),
        "rows": [asdict(r) for r in res.rows],
        "files": {"tables": sorted(p.name for p in tables.values()), "plots": sorted(p.name for p in plot_paths.values())},
        "provenance": {"config": config.echo(), "version": _version(), "wall_time_s": wall, "threads": threads},
    }
    summary = _jsonable(summary)
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, allow_nan=False) + "\n")
    return ReportBundle(summary, tables, plot_paths, outdir)
