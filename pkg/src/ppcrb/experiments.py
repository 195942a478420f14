"""Monte Carlo experiment runners with deterministic seeding and CSV output.

Every cell of every experiment draws from its own random stream, derived
from the master seed and the cell's position, so results are bit-identical
for a given scenario regardless of worker count or scheduling.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import (
    consensus_mse_bound,
    joint_identifiable,
    multi_sensor_bound,
    ppcr_bound_for_model,
)
from .errors import CalibrationError, NotIdentifiableError, ScenarioError
from .estimators import (
    mle_cauchy_data,
    mle_laplace_data,
    optimal_linear_coefficient,
)
from .fisher import Gaussian
from .linalg import robust_inverse
from .mechanisms import MeasurementModel, make_mechanism
from .network import (
    OnlineParams,
    SensorModel,
    SensorNetwork,
    run_offline,
    run_online,
    run_private_consensus,
)

SCENARIOS = ("mech_sweep", "offline", "online", "consensus")

SWEEP_KINDS = (
    "gaussian-optimal",
    "laplace-data",
    "laplace-output",
    "cauchy-data",
    "cos2-data",
    "twin-uniform-mult",
)


def _cell_rng(seed, *indices):
    """Counter-style stream split: one independent Philox stream per cell."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in indices))
    return np.random.Generator(np.random.Philox(ss))


def _mean_stderr(values):
    """Compensated mean and standard error, stable to summation order."""
    vals = [float(v) for v in np.asarray(values).ravel()]
    n = len(vals)
    mean = math.fsum(vals) / n
    if n < 2:
        return mean, None
    var = math.fsum((v - mean) ** 2 for v in vals) / (n - 1)
    return mean, math.sqrt(var / n)


def parse_matrix(obj, name):
    """A matrix field: explicit nested lists or a seeded uniform generator."""
    if isinstance(obj, dict):
        if set(obj.keys()) != {"uniform"}:
            raise ScenarioError(f"field '{name}': unknown matrix generator {sorted(obj)}")
        g = obj["uniform"]
        for key in ("low", "high", "rows", "cols", "seed"):
            if key not in g:
                raise ScenarioError(f"field '{name}.uniform' is missing '{key}'")
        rng = np.random.default_rng(int(g["seed"]))
        return rng.uniform(float(g["low"]), float(g["high"]), (int(g["rows"]), int(g["cols"])))
    try:
        mat = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field '{name}' is not a numeric matrix: {exc}") from None
    if mat.ndim != 2:
        raise ScenarioError(f"field '{name}' must be two-dimensional")
    return mat


def parse_grid(obj, name="grid"):
    if isinstance(obj, (list, tuple)):
        vals = np.asarray(obj, float)
        if vals.ndim != 1 or vals.size == 0 or np.any(vals <= 0):
            raise ScenarioError(f"field '{name}' must be a non-empty list of positive levels")
        return np.round(vals, 10)
    for key in ("start", "step", "stop"):
        if not isinstance(obj, dict) or key not in obj:
            raise ScenarioError(f"field '{name}' needs start/step/stop (or a list)")
    start, step, stop = float(obj["start"]), float(obj["step"]), float(obj["stop"])
    if step <= 0 or start <= 0 or stop < start:
        raise ScenarioError(f"field '{name}': need 0 < start <= stop and step > 0")
    count = int(round((stop - start) / step)) + 1
    vals = start + step * np.arange(count)
    vals = vals[vals <= stop + 1e-9]
    return np.round(vals, 10)


@dataclass(frozen=True)
class ExperimentSpec:
    """A validated, hashable description of one experiment."""

    scenario: str
    reps: int
    seed: int
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ScenarioError(f"field 'scenario' must be one of {SCENARIOS}")
        if self.reps < 1:
            raise ScenarioError("field 'reps' must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ScenarioError("field 'seed' must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentSpec":
        if "scenario" not in raw:
            raise ScenarioError("field 'scenario' is required")
        payload = {k: v for k, v in raw.items() if k not in ("scenario", "reps", "seed")}
        return cls(
            scenario=raw["scenario"],
            reps=int(raw.get("reps", 1)),
            seed=int(raw.get("seed", 0)),
            payload=payload,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(raw, dict):
            raise ScenarioError(f"{path}: the scenario file must hold a JSON object")
        return cls.from_dict(raw)

    def with_overrides(self, reps=None, seed=None, grid=None) -> "ExperimentSpec":
        payload = dict(self.payload)
        if grid is not None:
            payload["grid"] = grid
        return ExperimentSpec(
            scenario=self.scenario,
            reps=self.reps if reps is None else int(reps),
            seed=self.seed if seed is None else int(seed),
            payload=payload,
        )

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "reps": self.reps, "seed": self.seed, **self.payload}

    def content_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return ""
    return format(v, ".12g")


@dataclass
class RunResult:
    """Named tables plus metadata; serializes to one CSV per table."""

    tables: dict
    metadata: dict

    def table_csv_bytes(self, name) -> bytes:
        columns, rows = self.tables[name]
        lines = [",".join(columns)]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        return ("\n".join(lines) + "\n").encode()

    def write_csv(self, outdir) -> list:
        import os

        os.makedirs(outdir, exist_ok=True)
        paths = []
        for name in self.tables:
            path = os.path.join(outdir, f"{name}.csv")
            with open(path, "wb") as fh:
                fh.write(self.table_csv_bytes(name))
            paths.append(path)
        return paths

    def result_hash(self) -> str:
        digest = hashlib.sha256()
        for name in sorted(self.tables):
            digest.update(name.encode())
            digest.update(self.table_csv_bytes(name))
        return digest.hexdigest()

    def dominance_violations(self) -> list:
        """Rows where an estimator beats its bound by more than 3 stderr.

        For streaming tables only the largest k is checked: early
        iterates are biased by their initialization, so the unbiased
        bound does not constrain them.
        """
        out = []
        for name, (columns, rows) in self.tables.items():
            idx = {c: i for i, c in enumerate(columns)}
            if "mse" not in idx or "bound" not in idx:
                if "variance" in idx and "bound" in idx:
                    for row in rows:
                        var, se, bound = row[idx["variance"]], row[idx["stderr"]], row[idx["bound"]]
                        if var is not None and se and var < bound - 3 * se:
                            out.append((name, row))
                continue
            last_k = None
            if name.startswith("online") and "k" in idx:
                last_k = max(row[idx["k"]] for row in rows)
            for row in rows:
                if last_k is not None and row[idx["k"]] != last_k:
                    continue
                mse, se, bound = row[idx["mse"]], row[idx["stderr"]], row[idx["bound"]]
                if mse is None or bound is None or se is None:
                    continue
                if mse < bound - 3 * se:
                    out.append((name, row))
        return out

    def summary_text(self) -> str:
        lines = []
        for name, (columns, rows) in self.tables.items():
            filled = sum(1 for r in rows if all(v is not None for v in r))
            lines.append(f"table {name}: {len(rows)} rows ({len(rows) - filled} with gaps)")
        violations = self.dominance_violations()
        lines.append(f"dominance violations (mse < bound - 3 stderr): {len(violations)}")
        for name, row in violations[:10]:
            lines.append(f"  {name}: {row}")
        for key, val in self.metadata.items():
            lines.append(f"{key}: {val}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# mechanism sweep

def _sweep_model(payload):
    for key in ("theta", "H"):
        if key not in payload:
            raise ScenarioError(f"mech_sweep needs field '{key}'")
    theta = np.asarray(payload["theta"], float)
    h = parse_matrix(payload["H"], "H")
    if h.shape[1] != theta.shape[0]:
        raise ScenarioError(
            f"H has {h.shape[1]} columns but theta has {theta.shape[0]} entries"
        )
    if "sigma_w" in payload:
        sig = float(payload["sigma_w"])
        if sig <= 0:
            raise ScenarioError("field 'sigma_w' must be > 0")
        cov = sig**2 * np.eye(h.shape[0])
    elif "Sigma_w" in payload:
        cov = parse_matrix(payload["Sigma_w"], "Sigma_w")
    else:
        raise ScenarioError("mech_sweep needs 'sigma_w' or 'Sigma_w'")
    noise = Gaussian(np.zeros(h.shape[0]), cov)
    return MeasurementModel(h, noise), theta


def _sweep_region(model, theta):
    mean = model.H @ theta
    sig = np.sqrt(np.diag(model.noise_cov()))
    return mean - 3.0 * sig, mean + 3.0 * sig


def _sweep_cell(args):
    payload, kind, mech_idx, s, s_idx, reps, seed = args
    model, theta = _sweep_model(payload)
    region = _sweep_region(model, theta)
    bound = ppcr_bound_for_model(model, s * np.eye(model.m))
    if not bound.identifiable:
        raise NotIdentifiableError(f"theta is not identifiable at s={s:g}")
    trace = bound.trace
    try:
        mech = make_mechanism(model, {"kind": kind, "budget_s": s}, y_region=region)
    except CalibrationError:
        return mech_idx, s_idx, None, None, trace
    rng = _cell_rng(seed, mech_idx, s_idx)
    y = model.sample_y(theta, rng, size=reps)
    d = mech.draw_noise(rng, size=reps)
    z = mech.apply(y, d)

    if kind == "gaussian-optimal":
        w = optimal_linear_coefficient(model, s * np.eye(model.m))
        theta_hat = z @ w.T
    elif kind == "laplace-output":
        theta_hat = z
    elif kind == "cos2-data":
        pinv = robust_inverse(model.H.T @ model.H) @ model.H.T
        theta_hat = z @ pinv.T
    elif kind == "twin-uniform-mult":
        signs = np.sign(region[0] + region[1])
        pinv = robust_inverse(model.H.T @ model.H) @ model.H.T
        theta_hat = (signs * np.abs(z) / mech.center) @ pinv.T
    elif kind == "laplace-data":
        b = mech.noise.scale
        theta_hat = np.stack([mle_laplace_data(zr, model, b).theta for zr in z])
    elif kind == "cauchy-data":
        gam = mech.noise.scale
        theta_hat = np.stack([mle_cauchy_data(zr, model, gam).theta for zr in z])
    else:
        raise ScenarioError(f"no estimator paired with mechanism kind {kind!r}")

    sq = np.sum((theta_hat - theta) ** 2, axis=1)
    mse, stderr = _mean_stderr(sq)
    return mech_idx, s_idx, mse, stderr, trace


def run_mech_sweep(spec: ExperimentSpec, threads=1) -> RunResult:
    """Sweep the budget level for each mechanism/estimator pair.

    Cells where a mechanism cannot be calibrated to the requested budget
    (the multiplicative release near zero-crossing regions, or budgets
    below its floor) are recorded as gaps: the row keeps the bound but
    carries empty mse/stderr fields.
    """
    payload = spec.payload
    _sweep_model(payload)  # validate eagerly so errors surface before workers
    grid = parse_grid(payload.get("grid", {"start": 0.1, "step": 0.1, "stop": 10.0}))
    descriptors = payload.get("mechanisms", [{"kind": k} for k in SWEEP_KINDS])
    kinds = []
    for i, desc in enumerate(descriptors):
        if "kind" not in desc:
            raise ScenarioError(f"mechanisms[{i}] is missing 'kind'")
        if desc["kind"] not in SWEEP_KINDS:
            raise ScenarioError(f"mechanisms[{i}].kind {desc['kind']!r} is not sweepable")
        kinds.append(desc["kind"])

    jobs = [
        (payload, kind, mi, float(s), si, spec.reps, spec.seed)
        for mi, kind in enumerate(kinds)
        for si, s in enumerate(grid)
    ]
    results = {}
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for mi, si, mse, se, trace in pool.map(_sweep_cell, jobs, chunksize=4):
                results[(mi, si)] = (mse, se, trace)
    else:
        for job in jobs:
            mi, si, mse, se, trace = _sweep_cell(job)
            results[(mi, si)] = (mse, se, trace)

    rows = []
    gaps = 0
    for mi, kind in enumerate(kinds):
        for si, s in enumerate(grid):
            mse, se, trace = results[(mi, si)]
            gaps += mse is None
            rows.append((kind, float(s), mse, se, trace))
    return RunResult(
        tables={"mech_sweep": (("mechanism", "s", "mse", "stderr", "ppcr_trace"), rows)},
        metadata={
            "scenario": "mech_sweep",
            "seed": spec.seed,
            "reps": spec.reps,
            "spec_hash": spec.content_hash(),
            "gap_cells": gaps,
        },
    )


# ---------------------------------------------------------------------------
# multi-sensor experiments

def _build_sensors(payload, n_theta):
    cfg = payload.get("sensors")
    if not isinstance(cfg, dict):
        raise ScenarioError("field 'sensors' must be an object")
    count = int(cfg.get("count", 0))
    if count < 1:
        raise ScenarioError("field 'sensors.count' must be >= 1")
    sigma_w = float(cfg.get("sigma_w", 0.0))
    if sigma_w <= 0:
        raise ScenarioError("field 'sensors.sigma_w' must be > 0")
    s_level = float(cfg.get("budget_s", 0.0))
    if s_level <= 0:
        raise ScenarioError("field 'sensors.budget_s' must be > 0")
    rows = int(cfg.get("rows", 1))

    if "H" in cfg:
        h_list = [np.asarray(h, float) for h in cfg["H"]]
        if len(h_list) != count:
            raise ScenarioError("sensors.H must list one matrix per sensor")
        redraws = 0
    else:
        if "h_seed" not in cfg:
            raise ScenarioError("field 'sensors' needs 'H' or 'h_seed'")
        base_seed = int(cfg["h_seed"])
        redraws = -1
        for attempt in range(100):
            rng = np.random.default_rng(base_seed + attempt)
            h_list = [rng.uniform(-1.0, 1.0, (rows, n_theta)) for _ in range(count)]
            redraws += 1
            if joint_identifiable(
                [(h, s_level * np.eye(rows)) for h in h_list]
            ):
                break
        else:
            raise ScenarioError("could not draw jointly identifiable sensors in 100 tries")

    sensors = [
        SensorModel(
            H=h,
            noise=Gaussian(np.zeros(h.shape[0]), sigma_w**2 * np.eye(h.shape[0])),
            S=s_level * np.eye(h.shape[0]),
        )
        for h in h_list
    ]
    return sensors, sigma_w, s_level, redraws


def _build_network(payload):
    graph = payload.get("graph")
    if not isinstance(graph, dict) or "n" not in graph or "edges" not in graph:
        raise ScenarioError("field 'graph' must be an object with 'n' and 'edges'")
    return SensorNetwork.from_edges(int(graph["n"]), graph["edges"])


def _laplace_blocks(sensors, s_level, sigma_w, output=False):
    """BLUE statistic pairs for the additive-Laplace reference schemes."""
    pairs = []
    for sm in sensors:
        h = sm.H
        if output:
            a = h.T  # release A y + noise, then form the BLUE pair from it
            b = np.sqrt(np.linalg.eigvalsh(a.T @ a)[-1] / s_level)
            th = a @ h
            cov = sigma_w**2 * (a @ a.T) + 2.0 * b**2 * np.eye(a.shape[0])
            pairs.append((a, b, th, cov))
        else:
            b = 1.0 / np.sqrt(s_level)
            a = np.eye(h.shape[0])
            th = h
            cov = sigma_w**2 * np.eye(h.shape[0]) + 2.0 * b**2 * np.eye(h.shape[0])
            pairs.append((a, b, th, cov))
    return pairs


def _run_offline_baseline(network, sensors, pairs, theta_true, iters, rng, reps):
    """Consensus on BLUE pairs built from additively perturbed releases."""
    big_n = network.n_nodes
    w = network.weights
    n = sensors[0].n
    x_list, r_list = [], []
    for sm, (a, b, th, cov) in zip(sensors, pairs):
        y = sm.H @ theta_true + sm.noise.sample(rng, size=reps)
        z = y @ a.T + rng.laplace(0.0, b, (reps, a.shape[0]))
        cinv = robust_inverse(cov)
        x_list.append(z @ cinv @ th)
        r_list.append(th.T @ cinv @ th)
    x = np.stack(x_list, axis=1)  # (reps, N, n)
    r = np.stack(r_list)          # (N, n, n)

    theta = np.full((iters + 1, reps, big_n, n), np.nan)
    from .network import _rank_ok

    available = np.zeros((iters + 1, big_n), dtype=bool)
    for k in range(iters + 1):
        if k > 0:
            x = np.einsum("ij,rjn->rin", w, x)
            r = np.einsum("ij,jab->iab", w, r)
        for i in range(big_n):
            if _rank_ok(r[i]):
                available[k, i] = True
                theta[k, :, i, :] = np.linalg.solve(r[i], x[:, i, :].T).T
    return theta, available


def _offline_mse_rows(theta_traj, available, theta_true, bound, reps):
    iters_plus, _, big_n, _ = theta_traj.shape
    rows = []
    for k in range(iters_plus):
        for i in range(big_n):
            if not available[k, i]:
                rows.append((k, i, None, None, bound))
                continue
            sq = np.sum((theta_traj[k, :, i, :] - theta_true) ** 2, axis=1)
            mse, se = _mean_stderr(sq) if reps > 1 else (float(sq.mean()), None)
            rows.append((k, i, mse, se, bound))
    return rows


def run_offline_experiment(spec: ExperimentSpec) -> RunResult:
    """One-shot distributed identification against the pooled bound."""
    payload = spec.payload
    if "theta" not in payload:
        raise ScenarioError("offline scenario needs field 'theta'")
    theta_true = np.asarray(payload["theta"], float)
    network = _build_network(payload)
    sensors, sigma_w, s_level, redraws = _build_sensors(payload, theta_true.shape[0])
    if len(sensors) != network.n_nodes:
        raise ScenarioError("sensors.count must match graph.n")
    iters = int(payload.get("iters", 200))
    algorithms = payload.get("algorithms", ["gaussian", "laplace-data", "laplace-output"])

    pooled = multi_sensor_bound([(sm.H, sm.S, sm.noise.cov_matrix()) for sm in sensors])
    if not pooled.identifiable:
        raise NotIdentifiableError("the pooled sensor system is not identifiable")
    bound = pooled.trace

    tables = {}
    for alg_idx, alg in enumerate(algorithms):
        rng = _cell_rng(spec.seed, 100 + alg_idx)
        if alg == "gaussian":
            y = np.stack(
                [sm.H @ theta_true + sm.noise.sample(rng, size=spec.reps) for sm in sensors],
                axis=1,
            )
            run = run_offline(network, sensors, y, iters, rng)
            rows = _offline_mse_rows(run.theta, run.available, theta_true, bound, spec.reps)
        elif alg in ("laplace-data", "laplace-output"):
            pairs = _laplace_blocks(sensors, s_level, sigma_w, output=alg == "laplace-output")
            traj, avail = _run_offline_baseline(
                network, sensors, pairs, theta_true, iters, rng, spec.reps
            )
            rows = _offline_mse_rows(traj, avail, theta_true, bound, spec.reps)
        else:
            raise ScenarioError(f"unknown offline algorithm {alg!r}")
        tables[f"offline_{alg.replace('-', '_')}"] = (
            ("k", "sensor", "mse", "stderr", "bound"),
            rows,
        )
    return RunResult(
        tables=tables,
        metadata={
            "scenario": "offline",
            "seed": spec.seed,
            "reps": spec.reps,
            "spec_hash": spec.content_hash(),
            "bound_trace": bound,
            "sensor_redraws": redraws,
        },
    )


def _run_online_baseline(network, sensors, pairs, theta_true, steps, rng, params, reps, record_at):
    """Streaming variant of the additive-Laplace schemes: same skeleton,
    fresh perturbed release every step, BLUE gain instead of the matched one."""
    big_n = network.n_nodes
    w = network.weights
    n = sensors[0].n
    g0, gain_maps, th_list, a_list, b_list = [], [], [], [], []
    for (a, b, th, cov) in pairs:
        cinv = robust_inverse(cov)
        g0.append(th.T @ cinv @ th)
        gain_maps.append(th.T @ cinv)
        th_list.append(th)
        a_list.append(a)
        b_list.append(b)
    g_hat = np.stack(g0)
    gain_maps = np.stack(gain_maps)
    th_stack = np.stack(th_list)
    a_stack = np.stack(a_list)
    b_arr = np.asarray(b_list)
    noise_roots = np.stack(
        [np.sqrt(np.diag(sm.noise.cov_matrix())) for sm in sensors]
    )  # (N, m) diagonal stds
    h_stack = np.stack([sm.H for sm in sensors])

    theta_hat = np.zeros((reps, big_n, n))
    record_at = np.asarray(record_at, int)
    mse = np.zeros((record_at.size, big_n))
    mse_se = np.zeros((record_at.size, big_n))
    eye = np.eye(n)
    cp = 0
    p = a_stack.shape[1]
    for k in range(1, steps + 1):
        g_prev = g_hat
        g_hat = np.einsum("ij,jab->iab", w, g_hat)
        step = params.gain_b / (k + params.k0) ** params.tau
        mixed = np.einsum("ij,rjn->rin", w, theta_hat)
        theta_bar = theta_hat - step * (theta_hat - mixed)
        gain = np.linalg.solve(g_prev + params.zeta**k * eye, gain_maps)

        y = np.einsum("ian,n->ia", h_stack, theta_true) + noise_roots * rng.standard_normal(
            (reps, big_n, h_stack.shape[1])
        )
        lap = rng.laplace(0.0, 1.0, (reps, big_n, p)) * b_arr[:, None]
        z = np.einsum("ipa,ria->rip", a_stack, y) + lap
        innov = z - np.einsum("ipn,rin->rip", th_stack, theta_hat)
        theta_hat = theta_bar + (1.0 / k) * np.einsum("inp,rip->rin", gain, innov)

        if cp < record_at.size and k == record_at[cp]:
            sq = np.sum((theta_hat - theta_true) ** 2, axis=2)
            mse[cp] = sq.mean(axis=0)
            if reps > 1:
                mse_se[cp] = sq.std(axis=0, ddof=1) / np.sqrt(reps)
            cp += 1
    return record_at.astype(float), mse, mse_se


def run_online_experiment(spec: ExperimentSpec) -> RunResult:
    """Streaming distributed identification against the per-step bound."""
    payload = spec.payload
    if "theta" not in payload:
        raise ScenarioError("online scenario needs field 'theta'")
    theta_true = np.asarray(payload["theta"], float)
    network = _build_network(payload)
    sensors, sigma_w, s_level, redraws = _build_sensors(payload, theta_true.shape[0])
    if len(sensors) != network.n_nodes:
        raise ScenarioError("sensors.count must match graph.n")
    steps = int(payload.get("steps", 10000))
    opts = payload.get("online", {})
    params = OnlineParams(
        tau=float(opts.get("tau", 0.7)),
        gain_b=float(opts.get("b", 20.0)),
        k0=float(opts.get("k0", 20.0)),
        zeta=float(opts.get("zeta", 0.1)),
    )
    algorithms = payload.get("algorithms", ["gaussian", "laplace-data", "laplace-output"])

    pooled = multi_sensor_bound([(sm.H, sm.S, sm.noise.cov_matrix()) for sm in sensors])
    if not pooled.identifiable:
        raise NotIdentifiableError("the pooled sensor system is not identifiable")
    asym = pooled.trace  # lim k * MSE: the budget renews every step

    record_at = np.unique(np.round(np.logspace(0, np.log10(steps), 60)).astype(int))
    record_at = record_at[record_at <= steps]

    tables = {}
    for alg_idx, alg in enumerate(algorithms):
        rng = _cell_rng(spec.seed, 200 + alg_idx)
        if alg == "gaussian":
            run = run_online(
                network,
                sensors,
                theta_true,
                steps,
                rng,
                params=params,
                reps=spec.reps,
                record_at=record_at,
            )
            ks, mse, mse_se = run.checkpoints, run.mse, run.mse_stderr
        elif alg in ("laplace-data", "laplace-output"):
            pairs = _laplace_blocks(sensors, s_level, sigma_w, output=alg == "laplace-output")
            ks, mse, mse_se = _run_online_baseline(
                network, sensors, pairs, theta_true, steps, rng, params, spec.reps, record_at
            )
        else:
            raise ScenarioError(f"unknown online algorithm {alg!r}")
        rows = []
        for ci, k in enumerate(ks):
            for i in range(network.n_nodes):
                se = mse_se[ci, i] if spec.reps > 1 else None
                rows.append((int(k), i, float(mse[ci, i]), se, asym / k))
        tables[f"online_{alg.replace('-', '_')}"] = (
            ("k", "sensor", "mse", "stderr", "bound"),
            rows,
        )
    return RunResult(
        tables=tables,
        metadata={
            "scenario": "online",
            "seed": spec.seed,
            "reps": spec.reps,
            "spec_hash": spec.content_hash(),
            "asymptote_trace": asym,
            "sensor_redraws": redraws,
        },
    )


def run_consensus_experiment(spec: ExperimentSpec) -> RunResult:
    """Private average consensus: final-value variance against the bound."""
    payload = spec.payload
    network = _build_network(payload)
    big_n = network.n_nodes
    levels = payload.get("levels", 1.0)
    if np.isscalar(levels):
        levels = np.full(big_n, float(levels))
    else:
        levels = np.asarray(levels, float)
        if levels.shape != (big_n,):
            raise ScenarioError("field 'levels' must be scalar or one entry per agent")
    if np.any(levels <= 0):
        raise ScenarioError("field 'levels' must be positive")
    iters = int(payload.get("iters", 100))

    rng = _cell_rng(spec.seed, 300)
    if "y" in payload:
        y = np.asarray(payload["y"], float)
        if y.shape != (big_n,):
            raise ScenarioError("field 'y' must have one entry per agent")
    else:
        y = rng.standard_normal(big_n)
    true_mean = float(y.mean())

    final = run_private_consensus(network, y, levels, iters, rng, reps=spec.reps)
    dev = final[:, 0] - true_mean
    sq = dev * dev
    variance = math.fsum(map(float, sq)) / spec.reps
    if spec.reps > 1:
        var_of_sq = math.fsum((float(v) - variance) ** 2 for v in sq) / (spec.reps - 1)
        stderr = math.sqrt(var_of_sq / spec.reps)
    else:
        stderr = None
    bound = consensus_mse_bound(levels)
    rows = [(spec.reps, variance, stderr, bound)]
    return RunResult(
        tables={"consensus": (("reps", "variance", "stderr", "bound"), rows)},
        metadata={
            "scenario": "consensus",
            "seed": spec.seed,
            "reps": spec.reps,
            "spec_hash": spec.content_hash(),
        },
    )


RUNNERS = {
    "mech_sweep": run_mech_sweep,
    "offline": run_offline_experiment,
    "online": run_online_experiment,
    "consensus": run_consensus_experiment,
}


def run_experiment(spec: ExperimentSpec, threads=1) -> RunResult:
    if spec.scenario == "mech_sweep":
        return run_mech_sweep(spec, threads=threads)
    return RUNNERS[spec.scenario](spec)
