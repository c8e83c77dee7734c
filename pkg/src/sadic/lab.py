"""Experiment configuration, reproducible runs and tabular output.

A run is described by an :class:`ExperimentConfig` (TOML file plus flag
overrides) and produces CSV/JSON files in ``out_dir`` together with a
``manifest.json``. Identical configs give byte-identical CSV and JSON
outputs; only the manifest carries timestamps.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__, cocycle, flow, rauzy, veech
from .sequences import parse_sequence_spec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

SPECTRAL_HEADER = ("omega", "R", "re", "im", "abs", "alpha_fit")
COMMANDS = ("rauzy-class", "good-word", "cocycle", "lyapunov", "birkhoff", "spectral", "veech", "ek-count", "fit")


class ConfigError(ValueError):
    pass


# -- grids ----------------------------------------------------------------


def parse_grid(name: str, spec) -> np.ndarray:
    """Parse a grid for field ``name``.

    Accepted forms: a number, a list of numbers, ``a,b,c``, ``start:stop:step``
    (inclusive of stop up to rounding) and ``log:start:stop:count``.
    """
    if isinstance(spec, (int, float)):
        return np.array([float(spec)])
    if isinstance(spec, (list, tuple)):
        try:
            vals = np.array([float(x) for x in spec])
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: malformed grid {spec!r}") from None
        if len(vals) == 0:
            raise ConfigError(f"{name}: grid is empty")
        return vals
    text = str(spec).strip()
    try:
        if text.startswith("log:"):
            parts = text[4:].split(":")
            if len(parts) != 3:
                raise ValueError
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if not (0 < lo <= hi) or n < 1:
                raise ValueError
            return np.geomspace(lo, hi, n)
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            lo, hi, step = (float(p) for p in parts)
            if step <= 0 or hi < lo:
                raise ValueError
            n = int(math.floor((hi - lo) / step + 1e-9)) + 1
            return lo + step * np.arange(n)
        vals = np.array([float(x) for x in text.split(",") if x.strip()])
        if len(vals) == 0:
            raise ValueError
        return vals
    except ValueError:
        raise ConfigError(f"{name}: malformed grid {text!r}") from None


# -- configuration --------------------------------------------------------


@dataclass
class ExperimentConfig:
    command: str
    seq: str = "fib"
    roof: str = "golden"
    seed: int | None = None
    omega: float = 1.0
    omega_grid: Any = None
    R: float = 1e4
    R_grid: Any = "log:1e2:1e4:8"
    N: int = 200
    N_grid: Any = None
    delta: float = 0.1
    varrho: float = 0.05
    B: float = 2.0
    perm: str = "3,2,1"
    trials: int = 4
    n_points: int = 64
    function: str = "indicator"
    table: str | None = None
    branch_budget: int = 2_000_000
    precision_bits: int | None = None
    workers: int = 1
    out_dir: str = "out"
    svg: bool = False

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def load(cls, command: str, path: str | None = None, overrides: dict | None = None) -> "ExperimentConfig":
        """TOML values, then flag overrides (flags win)."""
        data: dict = {}
        if path:
            try:
                with open(path, "rb") as fh:
                    raw = tomllib.load(fh)
            except (OSError, tomllib.TOMLDecodeError) as exc:
                raise ConfigError(f"config: {exc}") from None
            # a [command] table overrides top-level keys
            section = raw.pop(command, {}) if isinstance(raw.get(command), dict) else {}
            data.update({k.replace("-", "_"): v for k, v in raw.items() if not isinstance(v, dict)})
            data.update({k.replace("-", "_"): v for k, v in section.items()})
        for k, v in (overrides or {}).items():
            if v is not None:
                data[k] = v
        unknown = set(data) - cls.field_names() - {"command"}
        if unknown:
            raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
        data["command"] = command
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown {self.command!r}")
        kind = self.seq.split(":", 1)[0]
        if kind in ("iid", "rauzy") and self.seed is None:
            raise ConfigError("seed: mandatory for stochastic sequence modes")
        if self.roof.strip() == "random" and self.seed is None:
            raise ConfigError("seed: mandatory for random roofs")
        for name in ("omega_grid", "R_grid", "N_grid"):
            val = getattr(self, name)
            if val is not None:
                parse_grid(name, val)
        positive = {"R": self.R, "B": self.B - 1, "N": self.N, "trials": self.trials,
                    "n_points": self.n_points, "workers": self.workers, "omega": self.omega}
        for name, val in positive.items():
            if not val > 0:
                raise ConfigError(f"{name}: must be positive")
        if not 0 <= self.delta < 1:
            raise ConfigError("delta: must lie in [0, 1)")
        if not 0 < self.varrho < 0.5:
            raise ConfigError("varrho: must lie in (0, 1/2)")
        if self.precision_bits is not None and self.precision_bits < 53:
            raise ConfigError("precision_bits: must be at least 53")
        if self.command == "fit" and not self.table:
            raise ConfigError("table: the fit command needs a spectral CSV")

    def canonical(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("workers")  # does not affect outputs
        d.pop("out_dir")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    version: str
    command: str
    started: str
    finished: str = ""
    status: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=_jsonable)


# -- output helpers -------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, tuple):
        return list(x)
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence], manifest_ref: str | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    if manifest_ref:
        buf.write(f"# manifest: {manifest_ref}\n")
    return buf.getvalue()


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ConfigError(f"table: {path} is empty")
    return rows[0], rows[1:]


def svg_chart(series: dict[str, tuple[Sequence[float], Sequence[float]]], *, title: str = "",
              xlabel: str = "", ylabel: str = "", logx: bool = True, logy: bool = True,
              width: int = 640, height: int = 420) -> str:
    """A static line chart as SVG text; coordinates are rounded for stable bytes."""
    tx = np.log10 if logx else (lambda v: np.asarray(v, dtype=float))
    ty = np.log10 if logy else (lambda v: np.asarray(v, dtype=float))
    pts = {k: (tx(np.asarray(x, dtype=float)), ty(np.maximum(np.asarray(y, dtype=float), 1e-300) if logy
                                                       else np.asarray(y, dtype=float)))
           for k, (x, y) in series.items()}
    allx = np.concatenate([p[0] for p in pts.values()]) if pts else np.array([0.0, 1.0])
    ally = np.concatenate([p[1] for p in pts.values()]) if pts else np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    ml, mr, mt, mb = 60, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{title}</text>',
           f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="12">'
           f'{("log10 " if logx else "") + xlabel}</text>',
           f'<text x="14" y="{mt + ph / 2:.1f}" font-size="12" transform="rotate(-90 14 {mt + ph / 2:.1f})" '
           f'text-anchor="middle">{("log10 " if logy else "") + ylabel}</text>']
    for v in np.linspace(x0, x1, 5):
        out.append(f'<text x="{X(v):.1f}" y="{mt + ph + 15}" text-anchor="middle" font-size="10">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 5):
        out.append(f'<text x="{ml - 4}" y="{Y(v) + 3:.1f}" text-anchor="end" font-size="10">{v:.3g}</text>')
    for i, (name, (xs, ys)) in enumerate(pts.items()):
        c = colors[i % len(colors)]
        path = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{ml + pw - 4}" y="{mt + 14 + 13 * i}" text-anchor="end" font-size="10" '
                   f'fill="{c}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- Holder fit -----------------------------------------------------------


@dataclass
class HolderFit:
    omega: float
    alpha: float
    gamma: float
    R0: float
    residual_rms: float
    n_used: int


def fit_holder(table) -> list[HolderFit]:
    """Per-omega power-law fit of |S_R| against R from a spectral table.

    ``table`` is a CSV path or an iterable of (omega, R, re, im, abs, ...)
    rows. The slope alpha is fitted on the upper half of the R range and
    gamma = 2 (1 - alpha).
    """
    if isinstance(table, (str, os.PathLike)):
        header, rows = read_csv(table)
        if tuple(header[:5]) != SPECTRAL_HEADER[:5]:
            raise ConfigError(f"table: unexpected header {header}")
        rows = [[float(x) for x in r] for r in rows]
    else:
        rows = [[float(x) for x in r] for r in table]
    groups: dict[float, list] = {}
    for r in rows:
        groups.setdefault(r[0], []).append((r[1], r[4]))
    out = []
    for om in sorted(groups):
        R, amp = np.array(groups[om]).T
        try:
            fit = flow.fit_power_law(R, amp)
        except ValueError as exc:
            raise ConfigError(f"table: omega={om}: {exc}") from None
        out.append(HolderFit(om, fit.alpha, fit.gamma, fit.R0, fit.residual_rms, fit.n_used))
    return out


# -- test functions -------------------------------------------------------


def make_function(spec: str, sys: flow.SAdicSystem, s: flow.RoofVector) -> flow.CylFunction:
    """``one``, ``indicator`` or ``indicator:k`` (mean-zero), or ``half``.

    ``indicator`` without a letter uses the letter of largest flow mass.
    ``half`` is 1 on the first half of the letter-1 roof and 0 elsewhere,
    minus its mean.
    """
    spec = spec.strip()
    m = sys.m
    if spec == "one":
        return flow.CylFunction.one(m)
    if spec.startswith("indicator"):
        _, _, k = spec.partition(":")
        if k:
            letter = int(k)
            if not 1 <= letter <= m:
                raise ConfigError(f"function: letter {letter} outside 1..{m}")
        else:
            letter = int(np.argmax(sys.mu0 * s.s)) + 1
        return flow.mean_zero_indicator(sys, s, letter)
    if spec == "half":
        breaks = [np.array([0.0, 0.5, 1.0])] + [np.array([0.0, 1.0])] * (m - 1)
        vals = [np.array([1.0, 0.0])] + [np.array([0.0])] * (m - 1)
        f = flow.CylFunction(0, breaks, vals)
        mu = f.mean(sys, s).real
        return flow.CylFunction(0, breaks, [v - mu for v in vals])
    raise ConfigError(f"function: unknown test function {spec!r}")


# -- tasks ----------------------------------------------------------------


def _pool_map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _system(cfg: ExperimentConfig):
    try:
        seq = parse_sequence_spec(cfg.seq, cfg.seed)
    except ValueError as exc:
        raise ConfigError(f"seq: {exc}") from None
    return seq


def _roof(cfg: ExperimentConfig, sys: flow.SAdicSystem) -> flow.RoofVector:
    rng = np.random.default_rng(cfg.seed)
    try:
        s = flow.parse_roof(cfg.roof, sys.m, rng)
    except ValueError as exc:
        raise ConfigError(f"roof: {exc}") from None
    if s.m != sys.m:
        raise ConfigError(f"roof: {s.m} entries for an alphabet of size {sys.m}")
    return s


def _seed(cfg: ExperimentConfig) -> int:
    return 0 if cfg.seed is None else int(cfg.seed)


class Outputs:
    """Collects output files; writes them only on :meth:`flush`."""

    def __init__(self, out_dir: Path, ref: str):
        self.dir = out_dir
        self.ref = ref
        self.files: dict[str, str] = {}

    def csv(self, name: str, header, rows):
        self.files[name] = csv_text(header, rows, self.ref)

    def json(self, name: str, obj):
        self.files[name] = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"

    def text(self, name: str, text: str):
        self.files[name] = text

    def flush(self) -> list[str]:
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.files.items():
            (self.dir / name).write_text(text)
        return sorted(self.files)


def task_rauzy_class(cfg, out: Outputs) -> dict:
    pi = tuple(int(x) for x in cfg.perm.split(","))
    try:
        G = rauzy.rauzy_class(pi)
    except ValueError as exc:
        raise ConfigError(f"perm: {exc}") from None
    out.json("rauzy_class.json", G.to_json())
    out.text("rauzy_class.dot", G.to_dot() + "\n")
    return {"vertices": len(G.vertices), "edges": len(G.edges), "strongly_connected": G.is_strongly_connected()}


def task_good_word(cfg, out: Outputs) -> dict:
    pi = tuple(int(x) for x in cfg.perm.split(","))
    try:
        G = rauzy.rauzy_class(pi)
    except ValueError as exc:
        raise ConfigError(f"perm: {exc}") from None
    gw = rauzy.construct_good_word(G)
    z = gw.substitution
    out.json("good_word.json", {
        "start": rauzy.perm_str(gw.path.start),
        "labels": gw.path.word(),
        "loop": gw.loop.word(),
        "n": gw.n,
        "return_words": [list(u) for u in gw.return_words],
        "substitution": z.to_json(),
        "matrix": [list(r) for r in z.matrix],
        "checks": gw.checks,
    })
    return {"length": len(gw.path.labels), "n": gw.n, "ok": gw.ok, **gw.checks}


def task_cocycle(cfg, out: Outputs) -> dict:
    seq = _system(cfg)
    acc = cocycle.CocycleAccumulator(seq.m)
    rows = []
    for n in range(1, cfg.N + 1):
        p = acc.push(seq[n])
        rows.append((n, p.log_norm, cocycle.log_norm(cocycle.step_matrix(seq[n]))))
    out.csv("cocycle.csv", ("n", "log_norm", "W"), rows)
    out.json("cocycle_final.json", {"n": cfg.N, "matrix": [[str(x) for x in r] for r in acc.matrix]})
    ws = cocycle.w_series(seq, cfg.N)
    return {"log_norm_N": rows[-1][1], "growth_per_step": rows[-1][1] / cfg.N, "L1": ws.L1}


def task_lyapunov(cfg, out: Outputs) -> dict:
    seq = _system(cfg)
    est = cocycle.lyapunov_spectrum(seq, cfg.N, cfg.trials, seed=_seed(cfg))
    out.csv("lyapunov.csv", ("index", "exponent", "error"),
            [(i + 1, e, d) for i, (e, d) in enumerate(zip(est.exponents, est.errors))])
    return {"theta1": est.theta1, "sum": float(est.exponents.sum()), "kappa": est.kappa,
            "top_simple": est.top_simple}


def task_birkhoff(cfg, out: Outputs) -> dict:
    seq = _system(cfg)
    sys = flow.SAdicSystem(seq)
    s = _roof(cfg, sys)
    f = make_function(cfg.function, sys, s)
    rng = np.random.default_rng(_seed(cfg))
    R = np.array([cfg.R])
    n_sym = flow.symbols_needed(sys, s, float(R.max()), f.level)
    pts = sys.sample_points(min(cfg.n_points, 8), n_sym, rng)
    rows = []
    for k, p in enumerate(pts):
        orb = sys.orbit(p, s, n_sym, f.level)
        S = flow.twisted_integrals(orb, f, cfg.omega, R)
        for Rv, z in zip(R, S):
            rows.append((k, cfg.omega, Rv, z.real, z.imag, abs(z)))
    out.csv("birkhoff.csv", ("point", "omega", "R", "re", "im", "abs"), rows)
    amps = [r[5] for r in rows]
    return {"points": len(pts), "mean_abs": float(np.mean(amps)), "mean_abs_over_R": float(np.mean(amps) / cfg.R)}


def _spectral_chunk(args):
    cfg, omegas = args
    seq = _system(cfg)
    sys = flow.SAdicSystem(seq)
    s = _roof(cfg, sys)
    f = make_function(cfg.function, sys, s)
    R = parse_grid("R_grid", cfg.R_grid)
    return flow.spectral_estimate(sys, s, f, omegas, R, n_points=cfg.n_points, seed=_seed(cfg))


def task_spectral(cfg, out: Outputs) -> dict:
    om = parse_grid("omega_grid", cfg.omega_grid if cfg.omega_grid is not None else cfg.omega)
    R = parse_grid("R_grid", cfg.R_grid)
    if len(np.unique(R)) < 3:
        raise ConfigError("R_grid: need at least 3 distinct R values")
    chunks = [c for c in np.array_split(om, max(1, min(cfg.workers, len(om)))) if len(c)]
    ests = _pool_map(_spectral_chunk, [(cfg, c) for c in chunks], cfg.workers)
    rows = [r for e in ests for r in e.rows()]
    out.csv("spectral.csv", SPECTRAL_HEADER, rows)
    fits = fit_holder(rows)
    out.csv("fit.csv", ("omega", "alpha", "gamma", "R0", "residual_rms", "n_used"),
            [(h.omega, h.alpha, h.gamma, h.R0, h.residual_rms, h.n_used) for h in fits])
    if cfg.svg:
        series = {}
        for e in ests:
            for i, w in enumerate(e.omega):
                series[f"omega={w:.4g}"] = (e.R, e.l2[i])
        out.text("spectral.svg", svg_chart(series, title="L2 growth of twisted integrals", xlabel="R",
                                           ylabel="|S_R|"))
    g = [h.gamma for h in fits]
    return {"omegas": len(om), "min_gamma": float(min(g)), "max_gamma": float(max(g))}


def task_veech(cfg, out: Outputs) -> dict:
    seq = _system(cfg)
    sys = flow.SAdicSystem(seq)
    s = _roof(cfg, sys)
    tr = veech.ek_track(seq, s, cfg.omega, cfg.N, precision_bits=cfg.precision_bits)
    m = seq.m
    header = ("n", *[f"K{i + 1}" for i in range(m)], "eps_inf", "W", "rho", "M", "flag")
    out.csv("veech.csv", header, tr.rows(cfg.varrho))
    summary = {"bits": tr.bits, "flags": int(tr.flags(cfg.varrho)[1:].sum()),
               "uniqueness_checked": tr.uniqueness_checked,
               "uniqueness_violations": len(tr.uniqueness_violations),
               "branch_violations": len(tr.branch_violations)}
    if cfg.omega_grid is not None:
        om = parse_grid("omega_grid", cfg.omega_grid)
        try:
            rep = veech.good_time_density(seq, s, om, cfg.varrho, cfg.N, B=cfg.B,
                                          precision_bits=cfg.precision_bits)
        except ValueError as exc:
            raise ConfigError(f"omega_grid: {exc}") from None
        out.csv("density.csv", ("omega", "count", "density", "lower_density"),
                zip(rep.omega, rep.counts, rep.density, rep.lower_density))
        summary.update(min_density=rep.min_density, satisfies_delta=rep.satisfies(cfg.delta))
    return summary


def task_ek_count(cfg, out: Outputs) -> dict:
    seq = _system(cfg)
    c = veech.ek_covering_count(seq, cfg.N, cfg.delta, cfg.B, branch_budget=cfg.branch_budget,
                                keep_sequences=False)
    res = {"N": c.N, "delta": c.delta, "B": cfg.B, "n_K0": c.n_K0, "psi_sets": c.psi_sets,
           "count": c.total, "unpruned": c.total_unpruned, "bound_M": c.bound_M,
           "equality_ok": c.equality_ok, "bound_ok": c.bound_ok}
    if cfg.N_grid is not None:
        Ns = [int(x) for x in parse_grid("N_grid", cfg.N_grid)]
        fit = veech.covering_rate(seq, Ns, cfg.delta, cfg.B, branch_budget=cfg.branch_budget)
        out.csv("ek_rate.csv", ("N", "count", "log_bound"), zip(fit.Ns, fit.counts, fit.bounds_log))
        res.update(count_rate=fit.count_rate, bound_rate=fit.bound_rate, L1=fit.L1, L2=fit.L2, rate_ok=fit.ok)
    out.json("ek_count.json", res)
    return {k: v for k, v in res.items() if k not in ("delta", "B")}


def task_fit(cfg, out: Outputs) -> dict:
    fits = fit_holder(cfg.table)
    out.csv("fit.csv", ("omega", "alpha", "gamma", "R0", "residual_rms", "n_used"),
            [(h.omega, h.alpha, h.gamma, h.R0, h.residual_rms, h.n_used) for h in fits])
    return {"omegas": len(fits), "min_gamma": min(h.gamma for h in fits)}


TASKS: dict[str, Callable[[ExperimentConfig, Outputs], dict]] = {
    "rauzy-class": task_rauzy_class,
    "good-word": task_good_word,
    "cocycle": task_cocycle,
    "lyapunov": task_lyapunov,
    "birkhoff": task_birkhoff,
    "spectral": task_spectral,
    "veech": task_veech,
    "ek-count": task_ek_count,
    "fit": task_fit,
}


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime())


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Run one pipeline, write its outputs and the manifest.

    Errors are recorded in the manifest (status ``failed`` or
    ``budget-exceeded``) and re-raised after it has been written.
    """
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    man = RunManifest(cfg.digest(), __version__, cfg.command, _now())
    out = Outputs(out_dir, f"manifest.json config_sha256={man.config_hash}")
    try:
        man.summary = TASKS[cfg.command](cfg, out)
        man.status[cfg.command] = "ok"
    except (rauzy.SearchBudgetExceeded, veech.BudgetExceeded) as exc:
        man.status[cfg.command] = f"budget-exceeded: {exc}"
        raise
    except Exception as exc:
        man.status[cfg.command] = f"failed: {exc}"
        raise
    finally:
        man.outputs = out.flush()
        man.finished = _now()
        payload = {"config": cfg.canonical(), **json.loads(man.to_json())}
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return man
