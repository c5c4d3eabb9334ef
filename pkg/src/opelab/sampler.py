"""Offline dataset generation under a behavior policy.

Each stage (or, for trajectory data, the whole rollout batch) draws from
its own Philox stream derived from ``(seed, stream index)``, so results
do not depend on the order in which stages or trials are executed.
"""

import csv
import io
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import OddK, StageMismatch
from .mdp import check_distribution, occupancy, transition_kernels

MODELS = ("stage_sampling", "trajectory")


class Transition(NamedTuple):
    s: int
    a: int
    r: float
    s_next: int


@dataclass(frozen=True, eq=False)
class OfflineData:
    """``H`` stages of ``K`` transitions stored column-wise, arrays of shape (H, K)."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    seed: int
    model: str

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown sampling model {self.model!r}")
        shapes = {x.shape for x in (self.s, self.a, self.r, self.s_next)}
        if len(shapes) != 1 or self.s.ndim != 2:
            raise ValueError("transition arrays must share one (H, K) shape")

    @property
    def H(self):
        return self.s.shape[0]

    @property
    def K(self):
        return self.s.shape[1]

    def stage(self, h):
        """Transitions of stage ``h`` (1-based) as a list of tuples."""
        i = h - 1
        return [Transition(int(s), int(a), float(r), int(t))
                for s, a, r, t in zip(self.s[i], self.a[i], self.r[i], self.s_next[i])]

    def __eq__(self, other):
        if not isinstance(other, OfflineData):
            return NotImplemented
        return (self.seed == other.seed and self.model == other.model
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("s", "a", "r", "s_next")))

    def to_bytes(self):
        return b"".join(np.ascontiguousarray(x).tobytes()
                        for x in (self.s, self.a, self.r, self.s_next))

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["h", "k", "s", "a", "r", "s_next"])
        for h in range(self.H):
            for k in range(self.K):
                writer.writerow([h + 1, k, int(self.s[h, k]), int(self.a[h, k]),
                                 repr(float(self.r[h, k])), int(self.s_next[h, k])])
        return buf.getvalue()

    def sidecar(self):
        return {"seed": self.seed, "model": self.model, "K": self.K, "H": self.H}

    def dump(self, csv_path, json_path=None):
        """Write the CSV dump and its JSON sidecar (default: ``<csv_path>.json``)."""
        json_path = json_path or f"{csv_path}.json"
        with open(csv_path, "w", newline="") as f:
            f.write(self.to_csv())
        with open(json_path, "w") as f:
            json.dump(self.sidecar(), f)

    @classmethod
    def load(cls, csv_path, json_path=None):
        json_path = json_path or f"{csv_path}.json"
        with open(json_path) as f:
            meta = json.load(f)
        H, K = meta["H"], meta["K"]
        s = np.zeros((H, K), dtype=np.int64)
        a = np.zeros_like(s)
        t = np.zeros_like(s)
        r = np.zeros((H, K))
        with open(csv_path, newline="") as f:
            for row in csv.DictReader(f):
                h, k = int(row["h"]) - 1, int(row["k"])
                s[h, k], a[h, k], t[h, k] = int(row["s"]), int(row["a"]), int(row["s_next"])
                r[h, k] = float(row["r"])
        return cls(s, a, r, t, meta["seed"], meta["model"])


def stream(seed, index):
    """Independent counter-based generator for ``(seed, index)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _draw(rng, table, keys):
    """One categorical draw per entry of ``keys`` from rows of ``table``.

    ``table`` has shape (n_keys, n_categories); uniforms are drawn for all
    rows first so the result does not depend on how keys are grouped.
    """
    u = rng.random(keys.shape[0])
    cdf = np.cumsum(table, axis=1)[:, :-1]
    out = np.empty(keys.shape[0], dtype=np.int64)
    order = np.argsort(keys, kind="stable")
    bounds = np.flatnonzero(np.diff(keys[order])) + 1
    for group in np.split(order, bounds):
        if group.size:
            out[group] = np.searchsorted(cdf[keys[group[0]]], u[group], side="right")
    return out


def _draw_shared(rng, cdf, n):
    # n draws from one categorical distribution
    return np.searchsorted(cdf[:-1], rng.random(n), side="right").astype(np.int64)


def sample_stage(mdp, behavior, xi1, K, seed):
    """Independent per-stage samples with ``(s, a) ~ nu_h`` and ``s' ~ P_h(.|s, a)``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    nu = occupancy(mdp, behavior, xi1)
    P = transition_kernels(mdp)
    R = mdp.expected_rewards()
    H, n_a = mdp.H, mdp.n_a
    shape = (H, K)
    s, a, t = (np.zeros(shape, dtype=np.int64) for _ in range(3))
    r = np.zeros(shape)
    for h in range(H):
        rng = stream(seed, h)
        flat = _draw_shared(rng, np.cumsum(nu[h].ravel()), K)
        s[h], a[h] = np.divmod(flat, n_a)
        t[h] = _draw(rng, P[h].reshape(-1, mdp.n_s), s[h] * n_a + a[h])
        r[h] = mdp.noise.realize(R[h, s[h], a[h]], rng)
    return OfflineData(s, a, r, t, int(seed), "stage_sampling")


def rollout(mdp, policy, xi1, n, rng):
    """``n`` independent episodes; returns (states, actions, expected rewards, final states)."""
    xi1 = check_distribution(xi1, mdp.n_s)
    P = transition_kernels(mdp)
    R = mdp.expected_rewards()
    H = mdp.H
    S = np.zeros((H, n), dtype=np.int64)
    A = np.zeros((H, n), dtype=np.int64)
    state = _draw_shared(rng, np.cumsum(xi1), n)
    for h in range(H):
        S[h] = state
        A[h] = _draw(rng, policy.probs[h], state)
        state = _draw(rng, P[h].reshape(-1, mdp.n_s), state * mdp.n_a + A[h])
    return S, A, R[np.arange(H)[:, None], S, A], state


def sample_trajectories(mdp, behavior, xi1, K, seed):
    """``K`` full behavior-policy episodes; ``s_next`` at stage h is ``s`` at stage h + 1."""
    if K < 1:
        raise ValueError("K must be at least 1")
    xi1 = check_distribution(xi1, mdp.n_s)
    P = transition_kernels(mdp)
    R = mdp.expected_rewards()
    rng = stream(seed, 0)
    H = mdp.H
    s, a, t = (np.zeros((H, K), dtype=np.int64) for _ in range(3))
    r = np.zeros((H, K))
    state = _draw_shared(rng, np.cumsum(xi1), K)
    for h in range(H):
        s[h] = state
        a[h] = _draw(rng, behavior.probs[h], state)
        t[h] = _draw(rng, P[h].reshape(-1, mdp.n_s), state * mdp.n_a + a[h])
        r[h] = mdp.noise.realize(R[h, state, a[h]], rng)
        state = t[h]
    return OfflineData(s, a, r, t, int(seed), "trajectory")


def split(data, mode="alias"):
    """Return ``(D, D_check)``.

    ``alias`` hands back the same dataset twice; ``halves`` gives the first
    and second ``K/2`` transitions (trajectories) of every stage.
    """
    if mode == "alias":
        return data, data
    if mode != "halves":
        raise ValueError(f"unknown split mode {mode!r}")
    if data.K % 2:
        raise OddK(f"cannot halve K={data.K}")
    m = data.K // 2

    def part(sl):
        return OfflineData(data.s[:, sl], data.a[:, sl], data.r[:, sl],
                           data.s_next[:, sl], data.seed, data.model)

    return part(slice(0, m)), part(slice(m, None))


def check_aligned(D, D_check):
    if (D.H, D.K) != (D_check.H, D_check.K):
        raise StageMismatch(f"(H, K) = {(D.H, D.K)} vs {(D_check.H, D_check.K)}")
