"""Distributed identification over a sensor network.

Sensors never share raw measurements: each one obfuscates locally (the only
place y appears) and the network mixes the released statistics with
Metropolis averaging weights.  The message log records everything that is
transmitted, together with a provenance tag set, so tests can verify that
transcripts are functions of the releases alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fisher import Gaussian
from .linalg import as_psd, robust_inverse
from .mechanisms import MeasurementModel

RANK_TOL = 1e-10


def metropolis_weights(n_nodes, edges) -> np.ndarray:
    """Symmetric doubly stochastic averaging weights from an edge list.

    w[i, j] = 1/(1 + max(deg_i, deg_j)) on edges, diagonal takes the rest.
    """
    if n_nodes < 1:
        raise ValueError("n_nodes must be >= 1")
    adj = np.zeros((n_nodes, n_nodes), dtype=bool)
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError("self-loops are not allowed")
        if not (0 <= i < n_nodes and 0 <= j < n_nodes):
            raise ValueError(f"edge ({i}, {j}) out of range for {n_nodes} nodes")
        adj[i, j] = adj[j, i] = True
    deg = adj.sum(axis=1)
    w = np.zeros((n_nodes, n_nodes))
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            if adj[i, j]:
                w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return w


@dataclass(frozen=True)
class SensorNetwork:
    """A connected undirected graph with symmetric averaging weights."""

    weights: np.ndarray
    edges: frozenset

    def __post_init__(self):
        w = np.asarray(self.weights, float)
        n = w.shape[0]
        if w.ndim != 2 or w.shape[1] != n:
            raise ValueError("weights must be square")
        if not np.allclose(w, w.T, atol=1e-12):
            raise ValueError("weights must be symmetric")
        if np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("weight rows must sum to 1")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        edges = frozenset(tuple(sorted((int(i), int(j)))) for i, j in self.edges)
        for i in range(n):
            for j in range(i + 1, n):
                on_edge = (i, j) in edges
                if on_edge and w[i, j] <= 0:
                    raise ValueError(f"edge ({i},{j}) must carry positive weight")
                if not on_edge and w[i, j] != 0:
                    raise ValueError(f"nonzero weight off the edge set at ({i},{j})")
        if np.any(np.diag(w) <= 0):
            raise ValueError("diagonal weights must be positive")
        if not self._connected(n, edges):
            raise ValueError("the graph must be connected")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "edges", edges)

    @staticmethod
    def _connected(n, edges):
        if n == 1:
            return True
        nbr = {i: set() for i in range(n)}
        for i, j in edges:
            nbr[i].add(j)
            nbr[j].add(i)
        seen = {0}
        stack = [0]
        while stack:
            for j in nbr[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == n

    @classmethod
    def from_edges(cls, n_nodes, edges):
        return cls(metropolis_weights(n_nodes, edges), frozenset(map(tuple, edges)))

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    def mixing_rate(self) -> float:
        """Second-largest eigenvalue magnitude: the consensus contraction factor."""
        w = np.linalg.eigvalsh(self.weights)
        mags = np.sort(np.abs(w))
        return float(mags[-2])


@dataclass(frozen=True)
class SensorModel:
    """One sensor's measurement block and its information budget."""

    H: np.ndarray
    noise: Gaussian
    S: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.H, float)
        s = as_psd(self.S, dim=h.shape[0], name="S").entries
        if self.noise.dim != h.shape[0]:
            raise ValueError("noise dimension must match the rows of H")
        object.__setattr__(self, "H", h)
        object.__setattr__(self, "S", s)

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    def model(self) -> MeasurementModel:
        return MeasurementModel(self.H, self.noise)


@dataclass(frozen=True)
class Message:
    round: int
    sender: int
    kind: str
    payload: np.ndarray
    sources: frozenset


class MessageLog(list):
    """Transcript of everything put on the wire, with provenance tags."""

    def record(self, round_, sender, kind, payload, sources):
        self.append(
            Message(round_, sender, kind, np.array(payload, copy=True), frozenset(sources))
        )

    def all_sources(self) -> frozenset:
        out = set()
        for msg in self:
            out |= msg.sources
        return frozenset(out)


def _sensor_statics(sensors):
    """Per-sensor release maps shared by the offline and online recursions."""
    n = sensors[0].n
    m = sensors[0].m
    roots, qmats, infos, gains = [], [], [], []
    for sm in sensors:
        if sm.n != n or sm.m != m:
            raise ValueError("sensors must share measurement and parameter dimensions")
        root = as_psd(sm.S, dim=m).sqrt()
        inner = robust_inverse(root @ sm.noise.cov_matrix() @ root + np.eye(m))
        q = sm.H.T @ root @ inner  # maps a release to parameter coordinates
        roots.append(root)
        qmats.append(q)
        infos.append(q @ root @ sm.H)
        gains.append(sm.H.T @ sm.S @ inner)
    return (
        np.stack(roots),
        np.stack(qmats),
        np.stack(infos),
        np.stack(gains),
    )


def _rank_ok(mat):
    w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    return bool(w[0] > RANK_TOL * max(w[-1], 0.0))


@dataclass
class OfflineRun:
    theta: np.ndarray        # (iters+1, reps, N, n), NaN before availability
    available: np.ndarray    # (iters+1, N)
    z: np.ndarray            # (reps, N, m)
    centralized: np.ndarray  # (reps, n)


def centralized_estimate(sensors, z) -> np.ndarray:
    """Efficient estimate from all releases pooled at a fusion center."""
    _, qmats, infos, _ = _sensor_statics(list(sensors))
    total = robust_inverse(infos.sum(axis=0))
    pooled = np.einsum("inm,rim->rn", qmats, z)
    return pooled @ total.T


def run_offline(network: SensorNetwork, sensors, y, iters, rng, log=None) -> OfflineRun:
    """One-shot measurements, then consensus on released statistic pairs.

    Each sensor releases z_i = S_i^(1/2) y_i + d_i once, forms a local
    information-weighted pair (x_i, r_i), and the network averages both.
    Estimates become available at a sensor as soon as its mixed r gains
    full rank; all sensors converge to the centralized efficient estimate.
    """
    sensors = list(sensors)
    w = network.weights
    big_n = network.n_nodes
    if len(sensors) != big_n:
        raise ValueError("one sensor model per node is required")
    for sm in sensors:
        if np.max(np.abs(sm.noise.mean_vector())) != 0.0:
            raise ValueError("the offline recursion assumes zero-mean measurement noise")
    y = np.asarray(y, float)
    if y.ndim == 2:
        y = y[None]
    reps, _, m = y.shape
    roots, qmats, infos, _ = _sensor_statics(sensors)
    n = sensors[0].n

    d = rng.standard_normal((reps, big_n, m))
    z = np.einsum("iab,rib->ria", roots, y) + d

    x = np.einsum("ina,ria->rin", qmats, z)
    r = infos.copy()
    sources = [
        frozenset({f"z[{i}]", f"H[{i}]", f"S[{i}]", f"Sigma_w[{i}]"}) for i in range(big_n)
    ]

    theta = np.full((iters + 1, reps, big_n, n), np.nan)
    available = np.zeros((iters + 1, big_n), dtype=bool)

    def snapshot(k, x_now, r_now, srcs):
        for i in range(big_n):
            ok = _rank_ok(r_now[i])
            available[k, i] = ok
            if ok:
                theta[k, :, i, :] = np.linalg.solve(r_now[i], x_now[:, i, :].T).T
            if log is not None:
                log.record(k, i, "x", x_now[:, i, :], srcs[i])
                log.record(k, i, "r", r_now[i], srcs[i] - {f"z[{i}]"})

    snapshot(0, x, r, sources)
    for k in range(1, iters + 1):
        x = np.einsum("ij,rjn->rin", w, x)
        r = np.einsum("ij,jab->iab", w, r)
        sources = [
            frozenset().union(*(sources[j] for j in range(big_n) if w[i, j] > 0))
            for i in range(big_n)
        ]
        snapshot(k, x, r, sources)

    return OfflineRun(
        theta=theta,
        available=available,
        z=z,
        centralized=centralized_estimate(sensors, z),
    )


@dataclass(frozen=True)
class OnlineParams:
    """Step-size and regularization schedule of the streaming recursion."""

    tau: float = 0.7
    gain_b: float = 20.0
    k0: float = 20.0
    zeta: float = 0.1

    def __post_init__(self):
        if not 0.5 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0.5, 1]")
        if self.gain_b <= 0 or self.k0 < 0:
            raise ValueError("gain_b must be > 0 and k0 >= 0")
        if not 0 < self.zeta < 1:
            raise ValueError("zeta must lie in (0, 1)")


@dataclass
class OnlineRun:
    checkpoints: np.ndarray  # recorded step indices
    mse: np.ndarray          # (len(checkpoints), N) mean over reps of |err|^2
    mse_stderr: np.ndarray   # (len(checkpoints), N) standard error of the mean
    g_hat: np.ndarray        # (N, n, n) final mixed information matrices
    theta: np.ndarray        # (reps, N, n) final estimates

    def k_mse(self):
        return self.checkpoints[:, None] * self.mse


def run_online(
    network: SensorNetwork,
    sensors,
    theta_true,
    steps,
    rng,
    params: OnlineParams = OnlineParams(),
    reps=1,
    record_at=None,
    init=None,
    gain_lag="printed",
    log=None,
) -> OnlineRun:
    """Streaming measurements: every step obfuscates afresh and mixes.

    Per step each sensor releases z_{i,k} = S_i^(1/2) y_{i,k} + d_{i,k},
    mixes its information matrix estimate and its parameter estimate with
    its neighbors, and applies a decaying innovation correction.  With
    gain_lag="printed" the gain uses the information matrix from the
    previous step; "current" uses the freshly mixed one.
    """
    if gain_lag not in ("printed", "current"):
        raise ValueError("gain_lag must be 'printed' or 'current'")
    sensors = list(sensors)
    w = network.weights
    big_n = network.n_nodes
    if len(sensors) != big_n:
        raise ValueError("one sensor model per node is required")
    theta_true = np.asarray(theta_true, float)
    n = sensors[0].n
    m = sensors[0].m
    roots, _, infos, gains = _sensor_statics(sensors)
    h_stack = np.stack([sm.H for sm in sensors])       # (N, m, n)
    rh = np.einsum("iab,ibn->ian", roots, h_stack)     # (N, m, n): S^(1/2) H
    mu_stack = np.stack([sm.noise.mean_vector() for sm in sensors])
    if np.max(np.abs(mu_stack)) != 0.0:
        raise ValueError("the online recursion assumes zero-mean measurement noise")
    noise_roots = np.stack([as_psd(sm.noise.cov_matrix(), dim=m).sqrt() for sm in sensors])

    if record_at is None:
        if steps <= 1000:
            record_at = np.arange(1, steps + 1)
        else:
            record_at = np.unique(
                np.round(np.logspace(0, np.log10(steps), 60)).astype(int)
            )
    record_at = np.asarray(sorted(set(int(k) for k in record_at)))
    if record_at.size and (record_at[0] < 1 or record_at[-1] > steps):
        raise ValueError("record_at entries must lie in [1, steps]")

    theta_hat = np.zeros((reps, big_n, n)) if init is None else np.array(init, float)
    if theta_hat.shape != (reps, big_n, n):
        theta_hat = np.broadcast_to(theta_hat, (reps, big_n, n)).copy()
    g_hat = infos.copy()
    g_sources = [frozenset({f"H[{i}]", f"S[{i}]", f"Sigma_w[{i}]"}) for i in range(big_n)]
    t_sources = [frozenset() for _ in range(big_n)]

    mse = np.zeros((record_at.size, big_n))
    mse_se = np.zeros((record_at.size, big_n))
    eye = np.eye(n)
    cp_idx = 0

    for k in range(1, steps + 1):
        g_prev = g_hat
        g_hat = np.einsum("ij,jab->iab", w, g_hat)
        g_for_gain = g_prev if gain_lag == "printed" else g_hat

        step = params.gain_b / (k + params.k0) ** params.tau
        mixed = np.einsum("ij,rjn->rin", w, theta_hat)
        theta_bar = theta_hat - step * (theta_hat - mixed)

        gain = np.linalg.solve(g_for_gain + params.zeta**k * eye, gains)  # (N, n, m)

        y = np.einsum("ian,n->ia", h_stack, theta_true) + np.einsum(
            "iab,rib->ria", noise_roots, rng.standard_normal((reps, big_n, m))
        )
        d = rng.standard_normal((reps, big_n, m))
        z = np.einsum("iab,rib->ria", roots, y) + d

        innov = z - np.einsum("ian,rin->ria", rh, theta_hat)
        theta_hat = theta_bar + (1.0 / k) * np.einsum("ina,ria->rin", gain, innov)

        if log is not None:
            new_t = []
            for i in range(big_n):
                nbrs = [j for j in range(big_n) if w[i, j] > 0]
                g_sources[i] = frozenset().union(*(g_sources[j] for j in nbrs))
                new_t.append(
                    frozenset({f"z[{i}]"}).union(*(t_sources[j] for j in nbrs))
                    | g_sources[i]
                )
                log.record(k, i, "G", g_hat[i], g_sources[i])
                log.record(k, i, "theta", theta_hat[:, i, :], new_t[i])
            t_sources = new_t

        if cp_idx < record_at.size and k == record_at[cp_idx]:
            err = theta_hat - theta_true
            sq = np.sum(err * err, axis=2)
            mse[cp_idx] = sq.mean(axis=0)
            if reps > 1:
                mse_se[cp_idx] = sq.std(axis=0, ddof=1) / np.sqrt(reps)
            cp_idx += 1

    return OnlineRun(
        checkpoints=record_at.astype(float),
        mse=mse,
        mse_stderr=mse_se,
        g_hat=g_hat,
        theta=theta_hat,
    )


def run_private_consensus(
    network: SensorNetwork, y, levels, iters, rng, reps=1, log=None, return_trajectory=False
):
    """Average consensus on obfuscated initial values.

    Each agent holds a scalar y_i and releases x_{i,0} = y_i + d_i/sqrt(s_i)
    with standard normal d_i, then the network averages.  The consensus
    value is the mean of the releases; its variance around the true mean
    is (1/N^2) sum_i 1/s_i, which meets the network-wide lower bound.
    """
    w = network.weights
    big_n = network.n_nodes
    y = np.asarray(y, float)
    if y.ndim == 1:
        y = np.broadcast_to(y, (reps, big_n)).copy()
    levels = np.asarray(levels, float)
    if levels.shape != (big_n,):
        raise ValueError("one budget level per agent is required")
    if np.any(levels <= 0):
        raise ValueError("budget levels must be > 0")

    x = y + rng.standard_normal(y.shape) / np.sqrt(levels)
    sources = [frozenset({f"z[{i}]"}) for i in range(big_n)]
    traj = [x.copy()] if return_trajectory else None
    for k in range(1, iters + 1):
        x = x @ w.T
        sources = [
            frozenset().union(*(sources[j] for j in range(big_n) if w[i, j] > 0))
            for i in range(big_n)
        ]
        if log is not None:
            for i in range(big_n):
                log.record(k, i, "x", x[:, i], sources[i])
        if return_trajectory:
            traj.append(x.copy())
    if return_trajectory:
        return x, np.stack(traj)
    return x
