"""Command-line front end: one subcommand per module plus a cross-validation report.

Every output file embeds the configuration it was produced with (``#``
comment lines before a CSV header, a ``config`` field in JSON) and is
written atomically.  The exit status is 0 exactly when every check the
command performs passes its tolerance.

Configuration precedence: command-line flags > ``--config`` file (flat
``key = value`` lines) > defaults.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

TOLERANCES = {
    "rate_bound": 8.0 / 3.0 + 1e-6,
    "el_residual": 1e-4,
    "lame_rel": 1e-4,
    "disc_rel": 1e-3,
    "delta2mu_band": (0.85, 1.15),
    "ratio_band": (0.8, 1.25),
    "sigma": 3.0,
    "left_slope_rel": 0.15,
    "rice_exact": 1e-14,
    "l2_decay_factor": 1.5,
}


class ConfigError(ValueError):
    """Invalid configuration (unknown key, bad value, violated precondition)."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _range3(text: str) -> Tuple[float, float, int]:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"expected lo:hi:n, got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1 or (n > 1 and not hi > lo):
        raise ConfigError(f"range {text!r} needs n >= 1 and hi > lo")
    return lo, hi, n


def _range2(text: str) -> Tuple[float, float]:
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected lo:hi, got {text!r}")
    lo, hi = float(parts[0]), float(parts[1])
    if not hi > lo:
        raise ConfigError(f"window {text!r} needs hi > lo")
    return lo, hi


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


# command -> {key: (parser, default)}
COMMON: Dict[str, Tuple[Callable, Any]] = {
    "seed": (int, 0),
    "out": (str, None),
    "format": (str, "csv"),
    "quick": (_flag, False),
}

PARAMS: Dict[str, Dict[str, Tuple[Callable, Any]]] = {
    "ratefn": {"a": (float, 10.0), "n": (int, 512)},
    "lame": {"mu": (float, 100.0), "numeric": (_flag, False), "n": (int, 1024)},
    "discriminant": {"mu": (float, 100.0), "lambda_grid": (_range3, None), "nq": (int, 24)},
    "tails": {"mu_grid": (_range3, "100:2500:5"), "n": (int, 4096), "nq": (int, 24)},
    "mc-direct": {"mu_window": (_range2, "-3:3"), "samples": (int, 100_000), "n": (int, 1024),
                  "bins": (int, 40), "save_samples": (str, None)},
    "mc-path": {"mu": (float, 0.0), "samples": (int, 100_000), "n": (int, 1024)},
    "report": {},
}


@dataclass
class RunConfig:
    """Validated parameters of one command."""

    command: str
    params: Dict[str, Any]
    seed: int = 0
    out: Optional[str] = None
    format: str = "csv"
    quick: bool = False

    def as_dict(self) -> Dict[str, Any]:
        d = {"command": self.command, "seed": self.seed, "format": self.format, "quick": self.quick}
        for k, v in self.params.items():
            d[k] = list(v) if isinstance(v, tuple) else v
        return d


def read_config_file(path: str) -> Dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes in keys become underscores."""
    out: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def build_config(command: str, flags: Dict[str, Any], file_values: Optional[Dict[str, str]] = None) -> RunConfig:
    """Merge flags > file > defaults, parse and validate."""
    if command not in PARAMS:
        raise ConfigError(f"unknown command {command!r}")
    spec = dict(COMMON)
    spec.update(PARAMS[command])
    file_values = file_values or {}
    unknown = sorted(set(file_values) - set(spec))
    if unknown:
        raise ConfigError(f"unknown configuration key(s) for {command}: {', '.join(unknown)}")
    merged: Dict[str, Any] = {}
    for key, (parse, default) in spec.items():
        raw = flags.get(key)
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            raw = default
        try:
            merged[key] = parse(raw) if raw is not None else None
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value for {key}: {raw!r} ({exc})") from None
    cfg = RunConfig(command, {k: merged[k] for k in PARAMS[command]}, merged["seed"], merged["out"],
                    merged["format"], merged["quick"])
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Check each operation's preconditions before dispatch."""
    p = cfg.params
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg.seed < 0:
        raise ConfigError("seed must be non-negative")
    c = cfg.command
    if c == "ratefn":
        if not p["a"] > 0:
            raise ConfigError("ratefn requires a > 0")
        if p["n"] < 64:
            raise ConfigError("ratefn requires n >= 64")
    if c in ("lame", "discriminant") and not p["mu"] > 0:
        raise ConfigError(f"{c} requires mu > 0")
    if c == "lame" and p["numeric"] and p["n"] < 16 * math.sqrt(p["mu"]):
        raise ConfigError(f"lame --numeric requires n >= 16 sqrt(mu) = {16 * math.sqrt(p['mu']):.0f}")
    if c == "discriminant":
        if p["mu"] < 1:
            raise ConfigError("discriminant requires mu >= 1")
        if p["lambda_grid"] is None:
            mu = p["mu"]
            p["lambda_grid"] = (0.5 * mu, 6.5 * mu, 20)
    if c == "tails" and p["mu_grid"][0] < 100:
        raise ConfigError("tails requires mu >= 100 (asymptotic regime)")
    if c == "mc-direct":
        if p["n"] < 256:
            raise ConfigError("mc-direct requires n >= 256")
        if p["samples"] < 1000:
            raise ConfigError("mc-direct requires at least 1000 samples")
        if p["bins"] < 1:
            raise ConfigError("mc-direct requires bins >= 1")
    if c == "mc-path":
        if not -2.0 <= p["mu"] <= 2.5:
            raise ConfigError("mc-path requires -2 <= mu <= 2.5")
        if p["samples"] < 2:
            raise ConfigError("mc-path requires at least 2 samples")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

@dataclass
class Table:
    columns: List[str]
    rows: List[List[Any]]


@dataclass
class Result:
    """Output of a command: a table and/or a JSON object, checks and a summary line."""

    table: Optional[Table] = None
    obj: Optional[Dict[str, Any]] = None
    checks: Dict[str, bool] = field(default_factory=dict)
    summary: str = ""

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v: Any):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return v


def render_csv(table: Table, meta: Dict[str, Any]) -> str:
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}={json.dumps(_jsonable(v), sort_keys=True)}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def render_json(obj: Dict[str, Any]) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def atomic_write(path: str, data, binary: bool = False) -> None:
    """Write via a temporary file in the target directory and rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb" if binary else "w", **({} if binary else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(result: Result, cfg: RunConfig, stdout=None) -> None:
    stdout = stdout or sys.stdout
    meta = {"config": cfg.as_dict(), "checks": result.checks}
    if cfg.format == "csv" and result.table is not None:
        text = render_csv(result.table, meta)
    else:
        obj = dict(result.obj or {})
        if result.table is not None:
            obj["columns"] = result.table.columns
            obj["rows"] = result.table.rows
        obj.update(meta)
        text = render_json(obj)
    if cfg.out:
        atomic_write(cfg.out, text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def run_ratefn(cfg: RunConfig) -> Result:
    from .ratefn import RateProblem, minimize

    a, n = cfg.params["a"], cfg.params["n"]
    r = minimize(RateProblem(a, n))
    cols = ["a", "I_star", "alpha", "beta", "el_residual", "iterations"]
    checks = {
        "I_star<=8/3": r.I_star <= TOLERANCES["rate_bound"],
        "el_residual": r.el_residual <= TOLERANCES["el_residual"],
        "converged": bool(r.converged),
    }
    return Result(Table(cols, [[a, r.I_star, r.alpha, r.beta, r.el_residual, r.iterations]]), None, checks,
                  f"ratefn a={a}: I*={r.I_star:.10f}")


def run_lame(cfg: RunConfig) -> Result:
    from .elliptic import modulus_for_mu
    from .lame import explicit_spectrum, numerical_periodic_spectrum

    mu, n = cfg.params["mu"], cfg.params["n"]
    sp = explicit_spectrum(modulus_for_mu(mu), mu)
    lam = sp.scaled
    rows = []
    checks: Dict[str, bool] = {}
    if cfg.params["numeric"]:
        num = numerical_periodic_spectrum(mu, n, 5)
        rel = np.abs(num - lam) / np.abs(lam)
        for j in range(5):
            rows.append([j, lam[j], num[j], rel[j]])
        checks["lame_rel"] = bool(np.all(rel <= TOLERANCES["lame_rel"]))
    else:
        rows = [[j, lam[j], "", ""] for j in range(5)]
    return Result(Table(["ell", "lambda_explicit", "lambda_numeric", "rel_err"], rows), None, checks,
                  f"lame mu={mu}: lambda_0..4 = " + ", ".join(f"{v:.6f}" for v in lam))


def run_discriminant(cfg: RunConfig) -> Result:
    from .discriminant import hochstadt_delta, monodromy_delta, solve_gap_points
    from .elliptic import modulus_for_mu
    from .lame import explicit_spectrum

    mu, nq = cfg.params["mu"], cfg.params["nq"]
    lo, hi, m = cfg.params["lambda_grid"]
    grid = np.linspace(lo, hi, m) if m > 1 else np.array([lo])
    ctx = modulus_for_mu(mu)
    sp = explicit_spectrum(ctx, mu)
    gaps = solve_gap_points(sp, nq)
    ode = monodromy_delta(mu, grid, ctx)
    rows, worst = [], 0.0
    for lam, mo in zip(grid, ode):
        h = hochstadt_delta(sp, gaps, float(lam), nq)
        rel = abs(h - mo.delta) / max(1.0, abs(mo.delta))
        worst = max(worst, rel)
        rows.append([float(lam), mo.delta, h, int(abs(h) <= 2.0)])
    return Result(Table(["lambda", "delta_ode", "delta_hochstadt", "band_flag"], rows), None,
                  {"disc_rel": worst <= TOLERANCES["disc_rel"]},
                  f"discriminant mu={mu}: max relative disagreement {worst:.2e}")


def tails_rows(grid: Sequence[float], n: int, nq: int) -> List[List[float]]:
    from .asymptotics import assemble_tail

    rows = []
    for mu in grid:
        t = assemble_tail(float(mu), n, nq)
        rows.append([float(mu), t.log_A, t.log_R, t.Z_val, t.I_val, t.f_assembled, t.f_closed, t.ratio])
    return rows


TAIL_COLUMNS = ["mu", "log_A", "log_R", "log_Z", "I_val", "log_f_assembled", "log_f_closed", "ratio"]


def run_tails(cfg: RunConfig) -> Result:
    lo, hi, m = cfg.params["mu_grid"]
    grid = np.linspace(lo, hi, m) if m > 1 else np.array([lo])
    rows = tails_rows(grid, cfg.params["n"], cfg.params["nq"])
    finite = all(math.isfinite(v) for r in rows for v in r)
    return Result(Table(TAIL_COLUMNS, rows), None, {"finite": finite},
                  f"tails: {len(rows)} rows, ratio range {min(r[-1] for r in rows):.4g}..{max(r[-1] for r in rows):.4g}")


def save_samples(path: str, values: np.ndarray, meta: Dict[str, Any]) -> None:
    """Flat little-endian float64 file plus a JSON sidecar ``<path>.json``."""
    atomic_write(path, np.asarray(values, dtype="<f8").tobytes(), binary=True)
    side = dict(meta)
    side.update({"shape": list(np.shape(values)), "dtype": "<f8"})
    atomic_write(path + ".json", render_json(side))


def load_samples(path: str) -> np.ndarray:
    with open(path + ".json", encoding="utf-8") as fh:
        side = json.load(fh)
    return np.fromfile(path, dtype="<f8").reshape(side["shape"])


def run_mc_direct(cfg: RunConfig) -> Result:
    from .sampling import InsufficientDataError, estimate_density, simulate_ground_states

    p = cfg.params
    d = simulate_ground_states(p["samples"], p["n"], cfg.seed)
    if p["save_samples"]:
        save_samples(p["save_samples"], d.values, {"seed": cfg.seed, "n": p["n"], "count": p["samples"],
                                                   "quantity": "-lambda_0"})
    try:
        e = estimate_density(d.values, p["mu_window"], p["bins"])
    except InsufficientDataError as exc:
        return Result(None, {"error": str(exc), "count": d.values.size, "seed": cfg.seed, "n": p["n"],
                             "excluded": d.excluded}, {"window_populated": False}, f"mc-direct: {exc}")
    rows = [[float(e.edges[i]), float(e.edges[i + 1]), int(e.counts[i]), float(e.masses[i]),
             float(e.density[i]), float(e.stderr[i]), float(e.kde[i])] for i in range(e.counts.size)]
    table = Table(["lo", "hi", "count", "mass", "density", "stderr", "kde"], rows)
    obj = {"bins": {"edges": e.edges, "masses": e.masses, "density": e.density, "kde": e.kde},
           "stderr": e.stderr, "count": e.count, "seed": cfg.seed, "n": p["n"], "excluded": d.excluded,
           "bandwidth": e.bandwidth}
    return Result(table, obj, {"window_populated": True},
                  f"mc-direct: {e.count} samples, {int(e.counts.sum())} in window, {d.excluded} excluded")


def run_mc_path(cfg: RunConfig) -> Result:
    from .sampling import path_integral_density

    p = cfg.params
    r = path_integral_density(p["mu"], p["samples"], p["n"], cfg.seed)
    obj = {"estimate": r.estimate, "stderr": r.stderr, "count": r.count, "seed": cfg.seed, "n": p["n"],
           "mu": p["mu"], "flagged": r.flagged}
    table = Table(["mu", "estimate", "stderr", "count", "seed", "n"],
                  [[p["mu"], r.estimate, r.stderr, r.count, cfg.seed, p["n"]]])
    return Result(table, obj, {"relative_stderr<=50%": not r.flagged},
                  f"mc-path mu={p['mu']}: {r.estimate:.6g} +- {r.stderr:.2g}")


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def report_settings(quick: bool) -> Dict[str, Any]:
    if quick:
        return {"tail_grid": [100.0, 400.0, 900.0, 1600.0, 2500.0], "tail_n": 4096,
                "direct_samples": 20_000, "path_samples": 20_000, "cross_mu": [-1.0, 0.0, 1.0, 2.0],
                "left_samples": 100_000, "left_window": [-8.0, -4.0], "left_bins": 16, "left_supplementary_window": [-4.0, -2.0],
                "identity_samples": 20_000, "pstar_samples": 5_000, "n": 1024, "halfwidth": 0.1}
    return {"tail_grid": [100.0, 400.0, 900.0, 1600.0, 2500.0], "tail_n": 4096,
            "direct_samples": 100_000, "path_samples": 100_000, "cross_mu": [-1.0, 0.0, 1.0, 2.0],
            "left_samples": 1_000_000, "left_window": [-8.0, -4.0], "left_bins": 16, "left_supplementary_window": [-4.0, -2.0],
            "identity_samples": 100_000, "pstar_samples": 20_000, "n": 1024, "halfwidth": 0.1}


def _sub_tails(s, seed):
    from .asymptotics import assemble_tail
    from .discriminant import delta_2mu_asymptotics

    rows = tails_rows(s["tail_grid"], s["tail_n"], 24)
    ratio = {r[0]: r[-1] for r in rows}
    norm = {mu: delta_2mu_asymptotics(mu).normalized_log for mu in (400.0, 2500.0)}
    lo, hi = TOLERANCES["delta2mu_band"]
    rlo, rhi = TOLERANCES["ratio_band"]
    checks = {
        "discriminant_normalized_log_in_band_at_400": lo <= norm[400.0] <= hi,
        "discriminant_normalized_log_closer_at_2500": abs(norm[2500.0] - 1) < abs(norm[400.0] - 1),
        "assembled_over_closed_in_band_at_400": rlo <= ratio.get(400.0, math.nan) <= rhi,
        "assembled_over_closed_improves_at_2500": abs(ratio.get(2500.0, math.nan) - 1) < abs(ratio.get(400.0, math.nan) - 1),
    }
    table = Table(TAIL_COLUMNS + ["discriminant_normalized_log"],
                  [r + [delta_2mu_asymptotics(r[0]).normalized_log] for r in rows])
    return table, checks


def _sub_left(s, seed):
    from .asymptotics import closed_form_tails
    from .sampling import InsufficientDataError, estimate_density, simulate_ground_states, tail_slope

    d = simulate_ground_states(s["left_samples"], s["n"], seed)
    window = tuple(s["left_window"])
    info: Dict[str, Any] = {"excluded": d.excluded, "samples": d.count}
    try:
        e = estimate_density(d.values, window, s["left_bins"])
        centers, counts, dens, ses = e.centers, e.counts, e.density, e.stderr
    except InsufficientDataError as exc:
        # an empty window still gets its (all-zero) table
        edges = np.linspace(window[0], window[1], s["left_bins"] + 1)
        centers = 0.5 * (edges[1:] + edges[:-1])
        counts = np.histogram(d.values, edges)[0]
        dens = ses = np.zeros(centers.size)
        e = None
        info["error"] = str(exc)
    rows = [[float(c), int(k), float(v), float(se), closed_form_tails(float(c))]
            for c, k, v, se in zip(centers, counts, dens, ses)]
    ok = False
    info.update({"slope": None, "in_window": int(np.sum(counts))})
    if e is not None:
        try:
            slope, se = tail_slope(e)
            ok = abs(slope - 1.0) <= TOLERANCES["left_slope_rel"]
            info.update({"slope": slope, "slope_stderr": se})
        except InsufficientDataError as exc:
            info["error"] = str(exc)
    # supplementary: the populated part of the left tail (not an acceptance check)
    try:
        sw = tuple(s["left_supplementary_window"])
        slope, se = tail_slope(estimate_density(d.values, sw, s["left_bins"]))
        info["supplementary"] = {"window": list(sw), "slope": slope, "slope_stderr": se}
    except InsufficientDataError as exc:
        info["supplementary"] = {"error": str(exc)}
    return Table(["mu", "count", "density", "stderr", "log_closed_form"], rows), {"left_tail_slope": ok}, info


def _sub_cross(s, seed):
    from .sampling import path_integral_density, point_density, simulate_ground_states

    d = simulate_ground_states(s["direct_samples"], s["n"], seed)
    out, checks = [], {}
    for mu in s["cross_mu"]:
        dd, dse = point_density(d.values, mu, s["halfwidth"])
        pi = path_integral_density(mu, s["path_samples"], s["n"], seed)
        z = abs(dd - pi.estimate) / math.hypot(dse, pi.stderr)
        out.append({"mu": mu, "direct": dd, "direct_stderr": dse, "path": pi.estimate,
                    "path_stderr": pi.stderr, "z": z})
        checks[f"cross_oracle_mu={mu:g}"] = z <= TOLERANCES["sigma"]
    return out, checks


def _sub_identities(s, seed):
    from fractions import Fraction

    from .grid import GridPath, uniform_grid
    from .sampling import (LatticeProcess, admissible_shift, check_cameron_martin, check_discrete_rice,
                           check_rice_continuous, pstar_l2_moment)

    out: Dict[str, Any] = {}
    checks: Dict[str, bool] = {}
    procs = standard_lattice_processes()
    zeros = lambda x: sum(1 for v in x if v == 0)
    rice = []
    for name, proc in procs.items():
        for fname, F in (("one", lambda x: 1), ("zeros", zeros), ("max", max)):
            r = check_discrete_rice(proc, F)
            diff = abs(float(r.lhs - r.rhs))
            rice.append({"process": name, "F": fname, "lhs": str(r.lhs), "rhs": str(r.rhs), "abs_diff": diff})
            checks[f"discrete_rice_{name}_{fname}"] = diff <= TOLERANCES["rice_exact"]
    out["check_discrete_rice"] = rice
    cont = []
    for fname in ("one", "max", "zeros"):
        r = check_rice_continuous(0.7, s["identity_samples"], fname, seed)
        cont.append({"F": fname, "lhs": r.lhs, "lhs_stderr": r.lhs_se, "rhs": r.rhs, "rhs_stderr": r.rhs_se,
                     "z": r.z_score, "excluded": r.excluded})
        checks[f"continuous_rice_{fname}"] = r.z_score <= TOLERANCES["sigma"]
    out["check_rice_continuous"] = cont
    n = 512
    x = uniform_grid(n)
    cond = GridPath(np.cos(2 * np.pi * x))
    phi = admissible_shift(GridPath(0.5 * np.exp(-0.5 * ((x - 0.5) / 0.1) ** 2)), cond)
    cm = check_cameron_martin(phi, count=s["identity_samples"], conditioning=cond, seed=seed)
    out["check_cameron_martin"] = {"lhs": cm.lhs, "lhs_stderr": cm.lhs_se, "rhs": cm.rhs, "rhs_stderr": cm.rhs_se,
                                   "z": cm.z_score, "weight_second_moment": cm.weight_second_moment,
                                   "predicted_second_moment": cm.predicted_second_moment}
    checks["cameron_martin"] = cm.z_score <= TOLERANCES["sigma"]
    dec = {}
    for mu in (100.0, 400.0):
        e = pstar_l2_moment(mu, s["pstar_samples"], seed)
        dec[str(mu)] = {"mean_l2": e.estimate, "stderr": e.stderr, "exact": e.extra["exact"],
                        "normalized": math.sqrt(mu) * e.estimate}
    out["l2_decay"] = dec
    checks["l2_decay"] = dec["400.0"]["normalized"] <= TOLERANCES["l2_decay_factor"] * dec["100.0"]["normalized"]
    return out, checks


def standard_lattice_processes():
    """The three enumerable stationary lattice processes used by the identity checks."""
    from fractions import Fraction

    from .sampling import LatticeProcess

    return {
        "rotations_one_zero": LatticeProcess.from_patterns([((0, 1, 2, 1, 3, 1, 2, 4), Fraction(1))]),
        "two_pattern_mixture": LatticeProcess.from_patterns([
            ((0, 1, 2, 1, 0, 3, 2, 1), Fraction(1, 3)),
            ((0, 2, 0, 1, 0, 4, 3, 1), Fraction(2, 3))]),
        "iid_conditioned": LatticeProcess.iid_conditioned(
            {0: Fraction(1, 4), 1: Fraction(1, 2), 2: Fraction(1, 4)}, 8),
    }


def run_report(cfg: RunConfig) -> Result:
    """Cross-validation bundle written to the ``--out`` directory (default ``report``)."""
    outdir = cfg.out or "report"
    s = report_settings(cfg.quick)
    seed = cfg.seed
    meta = {"config": cfg.as_dict(), "settings": s, "tolerances": TOLERANCES, "seed": seed}
    checks: Dict[str, bool] = {}
    failures: Dict[str, str] = {}
    files: List[str] = []

    def guarded(name, fn):
        try:
            return fn()
        except Exception as exc:  # partial bundle plus failure manifest
            failures[name] = f"{type(exc).__name__}: {exc}"
            checks[f"{name}_completed"] = False
            return None

    res = guarded("tails", lambda: _sub_tails(s, seed))
    if res:
        table, c = res
        checks.update(c)
        atomic_write(os.path.join(outdir, "tails.csv"), render_csv(table, dict(meta, checks=c)))
        files.append("tails.csv")
    res = guarded("left_tail", lambda: _sub_left(s, seed))
    if res:
        table, c, info = res
        checks.update(c)
        atomic_write(os.path.join(outdir, "left_tail.csv"), render_csv(table, dict(meta, checks=c, fit=info)))
        files.append("left_tail.csv")
    ident: Dict[str, Any] = {}
    res = guarded("cross_oracle", lambda: _sub_cross(s, seed))
    if res:
        ident["cross_oracle"], c = res
        checks.update(c)
    res = guarded("identities", lambda: _sub_identities(s, seed))
    if res:
        o, c = res
        ident.update(o)
        checks.update(c)
    if ident:
        atomic_write(os.path.join(outdir, "identities.json"),
                     render_json(dict(ident, checks={k: v for k, v in checks.items()}, **meta)))
        files.append("identities.json")
    manifest = dict(meta, files=files, checks=checks, failures=failures, passed=all(checks.values()))
    atomic_write(os.path.join(outdir, "manifest.json"), render_json(manifest))
    bad = [k for k, v in checks.items() if not v]
    return Result(None, None, checks,
                  f"report: {len(checks) - len(bad)}/{len(checks)} checks passed"
                  + (f"; failing: {', '.join(bad)}" if bad else ""))


COMMANDS: Dict[str, Callable[[RunConfig], Result]] = {
    "ratefn": run_ratefn,
    "lame": run_lame,
    "discriminant": run_discriminant,
    "tails": run_tails,
    "mc-direct": run_mc_direct,
    "mc-path": run_mc_path,
    "report": run_report,
}


def dispatch(cfg: RunConfig, stdout=None, stderr=None) -> int:
    """Run the named pipeline, write its artifacts, print a one-line summary."""
    stderr = stderr or sys.stderr
    result = COMMANDS[cfg.command](cfg)
    if cfg.command != "report":
        emit(result, cfg, stdout)
    print(result.summary + ("" if result.ok else "  [FAIL]"), file=stderr)
    return 0 if result.ok else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hilltails", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, params in PARAMS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--seed", default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", default=None, choices=["csv", "json"])
        sp.add_argument("--quick", action="store_const", const=True, default=None)
        sp.add_argument("--config", default=None, help="flat key = value file")
        for key, (parse, _) in params.items():
            flag = "--" + key.replace("_", "-")
            if parse is _flag:
                sp.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            else:
                sp.add_argument(flag, dest=key, default=None)
    return ap


def _attach_negative_values(argv: Sequence[str]) -> List[str]:
    """Rewrite ``--flag -3:3`` as ``--flag=-3:3`` so argparse accepts negative ranges."""
    out = list(argv)
    i = 0
    res: List[str] = []
    while i < len(out):
        tok = out[i]
        nxt = out[i + 1] if i + 1 < len(out) else None
        if (tok.startswith("--") and "=" not in tok and nxt is not None and len(nxt) > 1
                and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == ".")):
            res.append(f"{tok}={nxt}")
            i += 2
        else:
            res.append(tok)
            i += 1
    return res


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(_attach_negative_values(sys.argv[1:] if argv is None else list(argv)))
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        file_values = read_config_file(args.config) if args.config else None
        cfg = build_config(args.command, flags, file_values)
    except (ConfigError, OSError) as exc:
        print(f"hilltails {args.command}: {exc}", file=sys.stderr)
        return 2
    try:
        return dispatch(cfg)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"hilltails {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
