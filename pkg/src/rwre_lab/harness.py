"""Experiment orchestration: config files, manifests, runners, checkpoints.

A run is described by one JSON config file (schema-validated on load); every
run writes a manifest echoing the fully resolved config, a hash of it, timing
per stage, and a digest of every output file, so identical inputs reproduce
identical bytes.  Long grid runs (crossing-slope and increment-law runs)
checkpoint per grid point and resume when the config hash matches.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chi import chi_mc, chi_slope
from .diagnostics import run_battery
from .env_model import (EnvironmentDistribution, ballistic_summary,
                        sample_environment)
from .errors import ConfigError
from .potential import build_profile, hit_prob_ratio
from .rates import (FiniteLaw, IStarResult, RateCurve, RatePoint, a_alpha,
                    cramer_rate, i_f, i_m, i_star, min_ratio_s, x_star)
from .rng import stream
from .walk import Mode, Steps, race_probability, simulate_until

EXPERIMENTS = ("er-classic", "er-rwre", "chi", "chi-slope", "rate-im", "rate-if",
               "rate-istar", "xstar", "hitprob", "selftest")

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["experiment"],
    "properties": {
        "experiment": {"enum": list(EXPERIMENTS)},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "distribution": {
            "type": "object",
            "required": ["kappa", "atoms"],
            "properties": {
                "kappa": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "atoms": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "array", "minItems": 2, "maxItems": 2,
                              "items": {"type": "number"}},
                },
            },
        },
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

DEFAULTS = {"seed": 1, "workers": 1, "out_dir": "out", "params": {}}


def load_config(path: str | Path) -> dict:
    """Read, schema-validate, and default-fill a config file."""
    import jsonschema
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config {path} failed validation: {exc.message}") from exc
    cfg = dict(DEFAULTS)
    cfg.update(raw)
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def distribution_from_config(cfg: dict) -> EnvironmentDistribution:
    block = cfg.get("distribution")
    if block is None:
        raise ConfigError(f"experiment {cfg['experiment']} needs a distribution block")
    atoms = np.array(block["atoms"], dtype=float)
    return EnvironmentDistribution(atoms[:, 0], atoms[:, 1], float(block["kappa"]))


@dataclass
class RunManifest:
    experiment: str
    config: dict
    config_digest: str
    version: str = __version__
    wall_seconds: float = 0.0
    stages: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)  # path -> sha256

    def add_output(self, path: Path):
        self.outputs[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()

    def write(self, out_dir: Path):
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(self.__dict__, indent=2, sort_keys=True, default=str))
        return path


class _Stages:
    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self._t = time.perf_counter()

    def mark(self, name: str):
        now = time.perf_counter()
        self.manifest.stages[name] = round(now - self._t, 3)
        self._t = now


def _write_csv(path: Path, rows: list[dict], fieldnames=None):
    fieldnames = fieldnames or list(rows[0].keys())
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        w.writerows(rows)


def _write_plotdata(path: Path, series: list[dict]):
    path.write_text(json.dumps({"series": series}, indent=2))


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def _increment_law(params: dict) -> FiniteLaw:
    if "increments" in params:
        arr = np.array(params["increments"], dtype=float)
        return FiniteLaw(arr[:, 0], arr[:, 1])
    return FiniteLaw.pm_one(float(params.get("p_up", 0.5)))


def windowed_max(sums: np.ndarray, k: int, t_min: int = 0) -> float:
    """max over t >= t_min of (S_{t+k} - S_t)/k from the prefix-sum array."""
    d = sums[t_min + k:] - sums[t_min:-k] if k < sums.size - t_min else np.array([-np.inf])
    return float(d.max()) / k


def run_er_classic(cfg: dict, out_dir: Path, manifest: RunManifest) -> list[dict]:
    """Windowed-increment statistic of an i.i.d. sum against its target level."""
    p = cfg["params"]
    law = _increment_law(p)
    alpha = float(p.get("alpha", 0.5))
    n_grid = [int(n) for n in p.get("n_grid", [10 ** 6])]
    n_seeds = int(p.get("n_seeds", 3))
    a_const = a_alpha(law, alpha)
    rows = []
    for s in range(n_seeds):
        rng = stream(cfg["seed"], s, namespace=np.uint64(0xE7C0_0000_0000_0000))
        for n in n_grid:
            k = int(math.floor(a_const * math.log(n)))
            u = rng.random(n)
            thresholds = np.cumsum(law.weights)
            incs = law.values[np.minimum(np.searchsorted(thresholds, u, side="right"),
                                         law.values.size - 1)]
            sums = np.concatenate(([0.0], np.cumsum(incs)))
            stat = windowed_max(sums, k, t_min=0)
            rows.append({"seed_index": s, "n": n, "k": k, "alpha": alpha,
                         "statistic": stat, "deviation": stat - alpha})
    _write_csv(out_dir / "er_classic.csv", rows)
    manifest.add_output(out_dir / "er_classic.csv")
    _write_plotdata(out_dir / "plotdata.json", [{
        "label": f"seed {s}",
        "x": [r["n"] for r in rows if r["seed_index"] == s],
        "y": [r["statistic"] for r in rows if r["seed_index"] == s],
    } for s in range(n_seeds)] + [{"label": "alpha", "x": n_grid,
                                   "y": [alpha] * len(n_grid)}])
    manifest.add_output(out_dir / "plotdata.json")
    return rows


def run_er_rwre(cfg: dict, out_dir: Path, manifest: RunManifest) -> list[dict]:
    """Windowed-increment statistic of the annealed walk over an n grid.

    Per (seed, n): the window is [-ck - 10k, n + 10k], k = floor(A log n); the
    walk runs n steps in summary mode.  Grid points checkpoint to JSON and
    resume when a matching config hash is found.
    """
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    ballistic_summary(dist)
    A = float(p["A"])
    c = float(p.get("c", 4.0))
    n_grid = [int(n) for n in p["n_grid"]]
    seeds = [int(s) for s in p.get("seeds", [0, 1, 2])]
    band = p.get("x_star_band")
    if band is None and p.get("compute_band", False):
        xs = x_star(A, dist, L=int(p.get("L", 32)), n_sites=int(p.get("n_sites", 2000)),
                    seed=cfg["seed"], grid_step=float(p.get("grid_step", 0.05)))
        band = [xs.x_lo, xs.x_hi]
    digest = config_hash(cfg)
    rows = []
    for s in seeds:
        for n in n_grid:
            ckpt = out_dir / f"ckpt_er_rwre_{digest}_s{s}_n{n}.json"
            if ckpt.exists():
                rows.append(json.loads(ckpt.read_text()))
                continue
            k = int(math.floor(A * math.log(n)))
            ck = int(math.floor(c * k))
            lo = -ck - 10 * k
            env = sample_environment(dist, lo, (n + 10 * k) - lo + 1,
                                     cfg["seed"] + s, stream_id=n % 997)
            traj, _ = simulate_until(env, 0, Steps(n), cfg["seed"] + s,
                                     mode=Mode.SUMMARY, window=k, stream_id=s)
            stat = (traj.window_max or -k) / k
            row = {"seed_index": s, "n": n, "k": k, "statistic": stat}
            if band is not None:
                row["band_lo"], row["band_hi"] = float(band[0]), float(band[1])
                row["in_band"] = bool(band[0] - 0.15 <= stat <= 1.0)
            ckpt.write_text(json.dumps(row))
            rows.append(row)
    # per-seed monotone-trend statistic
    for s in seeds:
        vals = [r["statistic"] for r in rows if r["seed_index"] == s]
        dec = all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
        for r in rows:
            if r["seed_index"] == s:
                r["seed_nonincreasing"] = dec
    _write_csv(out_dir / "er_rwre.csv", rows)
    manifest.add_output(out_dir / "er_rwre.csv")
    _write_plotdata(out_dir / "plotdata.json", [{
        "label": f"seed {s}",
        "x": [r["n"] for r in rows if r["seed_index"] == s],
        "y": [r["statistic"] for r in rows if r["seed_index"] == s],
    } for s in seeds])
    manifest.add_output(out_dir / "plotdata.json")
    return rows


def run_chi(cfg: dict, out_dir: Path, manifest: RunManifest) -> list[dict]:
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    est = chi_mc(dist, int(p["k"]), float(p["x"]), float(p["c"]),
                 int(p.get("n_samples", 10_000)), cfg["seed"])
    row = {"k": est.k, "x": est.x, "c": est.c, "n_samples": est.n_samples,
           "chi_mean": est.mean, "chi_stderr": est.stderr,
           "minus_log_chi_over_k": (-math.log(est.mean) / est.k) if est.mean > 0 else None}
    _write_csv(out_dir / "chi.csv", [row])
    manifest.add_output(out_dir / "chi.csv")
    return [row]


def run_chi_slope(cfg: dict, out_dir: Path, manifest: RunManifest) -> dict:
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    k_grid = [int(k) for k in p["k_grid"]]
    n_samples = int(p.get("n_samples", 10_000))
    digest = config_hash(cfg)
    ests = []
    for j, k in enumerate(k_grid):
        ckpt = out_dir / f"ckpt_chi_{digest}_k{k}.json"
        if ckpt.exists():
            d = json.loads(ckpt.read_text())
        else:
            est = chi_mc(dist, k, float(p["x"]), float(p["c"]), n_samples,
                         cfg["seed"], stream_offset=j * n_samples)
            d = {"k": k, "x": est.x, "c": est.c, "n_samples": n_samples,
                 "chi_mean": est.mean, "chi_stderr": est.stderr,
                 "minus_log_chi_over_k": -math.log(est.mean) / k if est.mean > 0 else None}
            ckpt.write_text(json.dumps(d))
        ests.append(d)
    res = chi_slope(dist, float(p["x"]), float(p["c"]), k_grid, n_samples, cfg["seed"])
    _write_csv(out_dir / "chi_slope.csv", ests)
    manifest.add_output(out_dir / "chi_slope.csv")
    summary = {"slope": res.slope, "intercept": res.intercept,
               "slope_stderr": res.slope_stderr,
               "residuals": [float(r) for r in res.residuals]}
    (out_dir / "chi_slope_fit.json").write_text(json.dumps(summary, indent=2))
    manifest.add_output(out_dir / "chi_slope_fit.json")
    _write_plotdata(out_dir / "plotdata.json", [
        {"label": "-log chi", "x": k_grid,
         "y": [-math.log(e["chi_mean"]) for e in ests]},
        {"label": "fit", "x": k_grid,
         "y": [res.intercept + res.slope * k for k in k_grid]}])
    manifest.add_output(out_dir / "plotdata.json")
    return summary


def run_rate_im(cfg: dict, out_dir: Path, manifest: RunManifest) -> list[dict]:
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    rows = []
    for z in p.get("z_grid", [0.1, 0.2, 0.4, 0.6]):
        rows.append({"z": z, "value": i_m(dist, float(z))})
    r = min_ratio_s(dist)
    summary = ballistic_summary(dist)
    rows.append({"z": "min_ratio", "value": r.value})
    rows.append({"z": "root_s", "value": summary.lambda_root_s})
    _write_csv(out_dir / "rate_im.csv", rows)
    manifest.add_output(out_dir / "rate_im.csv")
    return rows


def run_rate_if(cfg: dict, out_dir: Path, manifest: RunManifest) -> RateCurve:
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    pts = []
    for x in p.get("x_grid", [0.4, 0.5, 0.6, 0.7]):
        r = i_f(float(x), dist, L=int(p.get("L", 64)),
                n_sites=int(p.get("n_sites", 4000)), seed=cfg["seed"])
        pts.append(RatePoint(x=float(x), value=r.value, lam_star=r.lam_star,
                             stderr=r.stderr, L=r.L))
    curve = RateCurve(kind="if", points=tuple(pts))
    rows = list(curve.rows())
    _write_csv(out_dir / "rate_if.csv", rows)
    manifest.add_output(out_dir / "rate_if.csv")
    return curve


def run_rate_istar(cfg: dict, out_dir: Path, manifest: RunManifest) -> RateCurve:
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    pts = []
    for x in p.get("x_grid", [0.4, 0.5, 0.6, 0.7]):
        r = i_star(float(x), dist, L=int(p.get("L", 32)),
                   n_sites=int(p.get("n_sites", 2000)), seed=cfg["seed"],
                   grid_step=float(p.get("grid_step", 0.05)))
        pts.append(RatePoint(x=float(x), value=r.value, lam_star=0.0,
                             stderr=r.stderr, L=int(p.get("L", 32)),
                             extra={"flag": r.flag,
                                    "weights": [float(w) for w in r.weights]}))
    curve = RateCurve(kind="istar", points=tuple(pts))
    rows = [{**row, "flag": pt.extra["flag"]} for row, pt in zip(curve.rows(), pts)]
    _write_csv(out_dir / "rate_istar.csv", rows)
    manifest.add_output(out_dir / "rate_istar.csv")
    return curve


def run_xstar(cfg: dict, out_dir: Path, manifest: RunManifest) -> dict:
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    r = x_star(float(p["A"]), dist, L=int(p.get("L", 32)),
               n_sites=int(p.get("n_sites", 2000)), seed=cfg["seed"],
               grid_step=float(p.get("grid_step", 0.05)))
    row = {"A": r.A, "x_point": r.x_point, "x_lo": r.x_lo, "x_hi": r.x_hi,
           "boundary": r.boundary, "flag": r.flag}
    (out_dir / "xstar.json").write_text(json.dumps(row, indent=2))
    manifest.add_output(out_dir / "xstar.json")
    return row


def run_hitprob(cfg: dict, out_dir: Path, manifest: RunManifest) -> dict:
    p = cfg["params"]
    dist = distribution_from_config(cfg)
    x, y = int(p["x"]), int(p["y"])
    n_walks = int(p.get("n_walks", 100_000))
    env = sample_environment(dist, 0, y + 2, cfg["seed"])
    profile = build_profile(env, y + 1)
    exact = hit_prob_ratio(profile, x, y)
    p_hat, se = race_probability(env, x, 0, y, n_walks, cfg["seed"])
    sigma = math.sqrt(max(exact * (1 - exact), 1e-12) / n_walks)
    row = {"x": x, "y": y, "exact_ratio": exact, "mc_estimate": p_hat,
           "mc_stderr": se, "z": (p_hat - exact) / sigma, "within_4_sigma":
           bool(abs(p_hat - exact) <= 4 * sigma)}
    (out_dir / "hitprob.json").write_text(json.dumps(row, indent=2))
    manifest.add_output(out_dir / "hitprob.json")
    return row


def run_selftest(cfg: dict, out_dir: Path, manifest: RunManifest):
    scale = cfg["params"].get("scale", "full")
    results = run_battery(scale=scale, seed=cfg["seed"])
    rows = [{"check": r.name, "passed": r.passed, "violations": r.violations,
             "n_checks": r.n_checks, "seconds": round(r.seconds, 3),
             "detail": r.detail} for r in results]
    _write_csv(out_dir / "selftest.csv", rows)
    manifest.add_output(out_dir / "selftest.csv")
    return results


RUNNERS = {
    "er-classic": run_er_classic,
    "er-rwre": run_er_rwre,
    "chi": run_chi,
    "chi-slope": run_chi_slope,
    "rate-im": run_rate_im,
    "rate-if": run_rate_if,
    "rate-istar": run_rate_istar,
    "xstar": run_xstar,
    "hitprob": run_hitprob,
    "selftest": run_selftest,
}


def execute(cfg: dict, out_dir: str | Path | None = None):
    """Run one configured experiment; returns (manifest, runner result)."""
    out = Path(out_dir or cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(experiment=cfg["experiment"], config=cfg,
                           config_digest=config_hash(cfg))
    t0 = time.perf_counter()
    stages = _Stages(manifest)
    result = RUNNERS[cfg["experiment"]](cfg, out, manifest)
    stages.mark("run")
    manifest.wall_seconds = round(time.perf_counter() - t0, 3)
    manifest.write(out)
    return manifest, result
