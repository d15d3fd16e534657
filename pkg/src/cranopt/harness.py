"""Scenario generation, unit conversion, JSON I/O and fronthaul sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import benchmarks, multi
from . import single_link as sl
from .model import QuantModel, Scenario, ScenarioError, SolveReport

__all__ = [
    "dbm_to_watt",
    "watt_to_dbm",
    "path_loss_db",
    "noise_variance",
    "ScenarioTemplate",
    "PRESETS",
    "preset",
    "generate_scenario",
    "scenario_to_dict",
    "scenario_from_dict",
    "load_scenario",
    "save_scenario",
    "SOLVERS",
    "run_solver",
    "SweepResult",
    "run_sweep",
]


# ---------------------------------------------------------------------------
# Units
# ---------------------------------------------------------------------------

def dbm_to_watt(dbm):
    return np.power(10.0, (np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(watt):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(watt, dtype=float)) + 30.0


def path_loss_db(distance_m):
    """L = 30.6 + 36.7 log10(d), d in metres."""
    return 30.6 + 36.7 * np.log10(np.asarray(distance_m, dtype=float))


def noise_variance(psd_dbm_hz: float, noise_figure_db: float, bandwidth_hz: float) -> float:
    """Noise power in watts over ``bandwidth_hz``."""
    return float(dbm_to_watt(psd_dbm_hz + noise_figure_db) * bandwidth_hz)


# ---------------------------------------------------------------------------
# Templates and presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioTemplate:
    """Recipe for building scenarios.

    Geometry is either random (RRHs and users uniform in a disc of
    ``radius_m``) or pinned: ``distance_m`` fixes a common RRH-user distance
    and ``fixed_gains`` fixes the (M, K, N) power gains outright (no fading).
    Subcarriers are handed out in contiguous blocks of ``scs_per_user``.
    """

    name: str = "custom"
    num_rrhs: int = 1
    num_users: int = 1
    num_subcarriers: int = 32
    bandwidth_mhz: float = 100.0
    fronthaul_mbps: float | tuple[float, ...] = 1000.0
    tx_power_dbm: float = 23.0
    noise_psd_dbm_hz: float = -169.0
    noise_figure_db: float = 7.0
    radius_m: float = 100.0
    min_distance_m: float = 1.0
    distance_m: float | None = None
    pathloss: str = "30.6+36.7log10d"
    fading: str = "rayleigh"
    scs_per_user: int | None = None
    fixed_gains: tuple | None = None

    def __post_init__(self):
        if min(self.num_rrhs, self.num_users, self.num_subcarriers) < 1:
            raise ScenarioError("M, K and N must be positive")
        if self.bandwidth_mhz <= 0 or self.radius_m <= 0:
            raise ScenarioError("bandwidth and radius must be positive")
        if self.fading not in ("rayleigh", "none"):
            raise ScenarioError(f"unknown fading model {self.fading!r}")
        if self.pathloss != "30.6+36.7log10d":
            raise ScenarioError(f"unknown path loss model {self.pathloss!r}")
        per_user = self.subcarriers_per_user
        if per_user * self.num_users != self.num_subcarriers:
            raise ScenarioError("N must equal K times the subcarriers per user")
        if self.fixed_gains is not None:
            shape = np.shape(self.fixed_gains)
            if shape != (self.num_rrhs, self.num_users, self.num_subcarriers):
                raise ScenarioError(f"fixed_gains has shape {shape}")

    @property
    def subcarriers_per_user(self) -> int:
        if self.scs_per_user is not None:
            return self.scs_per_user
        if self.num_subcarriers % self.num_users:
            raise ScenarioError("N must be divisible by K for an equal split")
        return self.num_subcarriers // self.num_users

    def fronthaul_caps_w(self) -> np.ndarray:
        caps = np.broadcast_to(np.asarray(self.fronthaul_mbps, dtype=float), (self.num_rrhs,))
        return caps * 1e6

    def with_fronthaul(self, mbps) -> "ScenarioTemplate":
        if np.ndim(mbps):
            mbps = tuple(float(v) for v in mbps)
        return dataclasses.replace(self, fronthaul_mbps=mbps)


PRESETS: dict[str, ScenarioTemplate] = {
    "fig3": ScenarioTemplate(
        name="fig3", num_subcarriers=4, bandwidth_mhz=100.0, fronthaul_mbps=1000.0,
        fading="none", fixed_gains=(((1.276e-9, 6.12e-10, 2.9e-11, 1.8e-11),),)),
    "fig5": ScenarioTemplate(
        name="fig5", num_subcarriers=32, bandwidth_mhz=100.0, distance_m=50.0),
    "fig7": ScenarioTemplate(
        name="fig7", num_rrhs=7, num_users=16, num_subcarriers=64, bandwidth_mhz=300.0,
        scs_per_user=4, radius_m=100.0, fronthaul_mbps=4000.0),
}
PRESETS["fig4"] = dataclasses.replace(PRESETS["fig3"], name="fig4", fronthaul_mbps=400.0)
PRESETS["fig6"] = dataclasses.replace(PRESETS["fig5"], name="fig6")


def preset(name: str) -> ScenarioTemplate:
    try:
        return PRESETS[name]
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _disc_points(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    theta = 2.0 * np.pi * rng.random(count)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate_scenario(template: ScenarioTemplate, seed: int | None = 0) -> Scenario:
    """Draw one scenario; identical seeds give identical scenarios."""
    m, k, n = template.num_rrhs, template.num_users, template.num_subcarriers
    geo_ss, fade_ss = np.random.SeedSequence(seed).spawn(2)
    bw = template.bandwidth_mhz * 1e6
    sigma2 = noise_variance(template.noise_psd_dbm_hz, template.noise_figure_db, bw / n)

    if template.fixed_gains is not None:
        gains = np.array(template.fixed_gains, dtype=float)
        dist = None
    else:
        if template.distance_m is not None:
            dist = np.full((m, k), float(template.distance_m))
        else:
            rng = np.random.Generator(np.random.Philox(geo_ss))
            rrh = _disc_points(rng, m, template.radius_m)
            ue = _disc_points(rng, k, template.radius_m)
            dist = np.linalg.norm(rrh[:, None, :] - ue[None, :, :], axis=-1)
            dist = np.maximum(dist, template.min_distance_m)
        large = 10.0 ** (-path_loss_db(dist) / 10.0)
        gains = np.repeat(large[:, :, None], n, axis=2)
        if template.fading == "rayleigh":
            rng = np.random.Generator(np.random.Philox(fade_ss))
            gains = gains * rng.exponential(1.0, size=(m, k, n))

    owner = np.repeat(np.arange(k), template.subcarriers_per_user)
    return Scenario(
        bandwidth_hz=bw,
        channel_gain_sq=gains,
        noise_var=np.full((m, n), sigma2),
        power_budget=np.full(k, float(dbm_to_watt(template.tx_power_dbm))),
        fronthaul_cap=template.fronthaul_caps_w(),
        sc_owner=owner,
        distance_m=dist,
    )


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    out = {
        "bandwidth_mhz": scenario.bandwidth_hz / 1e6,
        "num_subcarriers": scenario.num_subcarriers,
        "num_rrhs": scenario.num_rrhs,
        "num_users": scenario.num_users,
        "channel_gain_sq": scenario.channel_gain_sq.tolist(),
        "noise_var_dbm": watt_to_dbm(scenario.noise_var).tolist(),
        "power_budget_dbm": watt_to_dbm(scenario.power_budget).tolist(),
        "fronthaul_cap_mbps": (scenario.fronthaul_cap / 1e6).tolist(),
        "sc_owner": (scenario.sc_owner + 1).tolist(),
    }
    if scenario.distance_m is not None:
        out["distance_m"] = scenario.distance_m.tolist()
    return out


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    """Build a scenario from the JSON layout (MHz, dBm, Mbps, 1-based owners)."""
    try:
        gains = np.asarray(doc["channel_gain_sq"], dtype=float)
        shape = (doc["num_rrhs"], doc["num_users"], doc["num_subcarriers"])
        if gains.shape != tuple(shape):
            raise ScenarioError(f"channel_gain_sq has shape {gains.shape}, expected {shape}")
        owner = np.asarray(doc["sc_owner"], dtype=np.int64) - 1
        return Scenario(
            bandwidth_hz=float(doc["bandwidth_mhz"]) * 1e6,
            channel_gain_sq=gains,
            noise_var=dbm_to_watt(doc["noise_var_dbm"]),
            power_budget=dbm_to_watt(doc["power_budget_dbm"]),
            fronthaul_cap=np.asarray(doc["fronthaul_cap_mbps"], dtype=float) * 1e6,
            sc_owner=owner,
            distance_m=doc.get("distance_m"),
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario is missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from None


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: {exc}") from None
    return scenario_from_dict(doc)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=1)


# ---------------------------------------------------------------------------
# Solver registry and sweeps
# ---------------------------------------------------------------------------

def _p1(scn, eps, max_iter):
    if scn.is_single_link:
        return sl.algorithm_one(scn, eps, max_iter)
    return multi.algorithm_three(scn, eps, max_iter)


def _p2(integer):
    def run(scn, eps, max_iter):
        if scn.is_single_link:
            return sl.solve_p2_single(scn, eps, max_iter, integer=integer)
        return multi.solve_p2_multi(scn, eps, max_iter, integer=integer)
    return run


def _bench(scheme, model):
    def run(scn, eps, max_iter):
        return benchmarks.run_benchmark(scheme, scn, model, eps, max_iter)
    return run


SOLVERS: dict[str, Callable[[Scenario, float, int], SolveReport]] = {
    "p1": _p1,
    "p2": _p2(True),
    "p2-noint": _p2(False),
}
for _scheme in benchmarks.BenchmarkScheme:
    if _scheme is benchmarks.BenchmarkScheme.CONVENTIONAL_OFDMA:
        # decoded at the serving RRH, no quantization involved
        SOLVERS[_scheme.value] = _bench(_scheme, QuantModel.GAUSSIAN)
        continue
    for _model in QuantModel:
        SOLVERS[f"{_scheme.value}/{_model.value}"] = _bench(_scheme, _model)


def run_solver(solver_id: str, scenario: Scenario, eps: float = sl.DEFAULT_EPS,
               max_iter: int = sl.DEFAULT_MAX_ITER) -> SolveReport:
    try:
        fn = SOLVERS[solver_id]
    except KeyError:
        raise ValueError(f"unknown solver {solver_id!r}") from None
    return fn(scenario, eps, max_iter)


@dataclass
class SweepResult:
    rows: list[dict[str, Any]] = field(default_factory=list)
    reports: dict[str, dict] = field(default_factory=dict)

    COLUMNS = ("cell", "solver", "fronthaul_mbps", "seed", "objective_bps",
               "spectral_efficiency", "iterations", "converged", "cutset_bps",
               "wall_time_s", "error")

    def to_csv(self, stream=None) -> str:
        buf = io.StringIO() if stream is None else stream
        writer = csv.DictWriter(buf, fieldnames=self.COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue() if stream is None else ""

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "reports": self.reports}, indent=1)

    def averaged(self) -> list[dict[str, Any]]:
        """Mean objective per (solver, capacity) over seeds, failed cells skipped."""
        groups: dict[tuple, list[dict]] = {}
        for row in self.rows:
            if row["error"]:
                continue
            groups.setdefault((row["solver"], row["fronthaul_mbps"]), []).append(row)
        out = []
        for (solver, cap), rows in sorted(groups.items()):
            cut = [r["cutset_bps"] for r in rows if r["cutset_bps"] != ""]
            out.append({
                "solver": solver,
                "fronthaul_mbps": cap,
                "num_seeds": len(rows),
                "objective_bps": float(np.mean([r["objective_bps"] for r in rows])),
                "cutset_bps": float(np.mean(cut)) if cut else "",
            })
        return out

    def curve(self, solver: str, seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows if r["solver"] == solver and not r["error"]
                and (seed is None or r["seed"] == seed)]
        rows.sort(key=lambda r: r["fronthaul_mbps"])
        return (np.array([r["fronthaul_mbps"] for r in rows]),
                np.array([r["objective_bps"] for r in rows]))


def run_sweep(template: ScenarioTemplate, solver_ids: Sequence[str],
              grid_mbps: Iterable[float], seeds: Sequence[int] = (0,),
              eps: float = sl.DEFAULT_EPS, max_iter: int = sl.DEFAULT_MAX_ITER,
              keep_reports: bool = False) -> SweepResult:
    """Run every (solver, capacity, seed) cell; failures are recorded, not raised."""
    grid = [float(v) for v in grid_mbps]
    if not grid:
        raise ValueError("empty fronthaul grid")
    for sid in solver_ids:
        if sid not in SOLVERS:
            raise ValueError(f"unknown solver {sid!r}")
    result = SweepResult()
    for seed in seeds:
        base = generate_scenario(template, seed)
        for cap in grid:
            scn = base.with_fronthaul(cap * 1e6)
            cut = sl.cutset_bound(scn) * scn.bandwidth_hz if scn.is_single_link else ""
            for sid in solver_ids:
                cell = f"{sid}|{cap:g}|{seed}"
                row = {"cell": cell, "solver": sid, "fronthaul_mbps": cap, "seed": seed,
                       "objective_bps": math.nan, "spectral_efficiency": math.nan,
                       "iterations": 0, "converged": False, "cutset_bps": cut,
                       "wall_time_s": 0.0, "error": ""}
                t0 = time.perf_counter()
                try:
                    rep = run_solver(sid, scn, eps, max_iter)
                except Exception as exc:  # recorded per row, sweep continues
                    row["error"] = f"{type(exc).__name__}: {exc}"
                else:
                    row.update(objective_bps=rep.objective_bps,
                               spectral_efficiency=rep.spectral_efficiency(scn),
                               iterations=rep.iterations, converged=rep.converged)
                    if keep_reports:
                        result.reports[cell] = rep.to_dict()
                row["wall_time_s"] = time.perf_counter() - t0
                result.rows.append(row)
    return result
