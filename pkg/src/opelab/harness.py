"""Seeded sweeps of both estimators over (H, p, K) and their aggregation."""

import csv
import hashlib
import io
import json
import os
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ConfigError
from .estimators import VaParams, fqi_ope, va_ope
from .mdp import NoiseSpec, exact_eval
from .sampler import sample_stage, sample_trajectories, split
from .synth import SynthConfig, build

METHODS = ("va_ope", "fqi_ope")
RUN_HEADER = ["method", "H", "p", "K", "trial", "seed", "v_true", "v_hat", "abs_error",
              "wall_time_ms"]
SUMMARY_HEADER = ["method", "H", "p", "K", "n", "mean", "q10", "q90"]
SAMPLERS = {"stage_sampling": sample_stage, "trajectory": sample_trajectories}


@dataclass(frozen=True)
class InstanceTemplate:
    """Everything about the synthetic instance except ``H`` and ``p``.

    ``alpha`` is a bit pattern repeated (and truncated) to length ``H``;
    ``None`` means all zeros.
    """

    alpha: str = None
    encoding_scale: float = 1.0
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.alpha is not None and (not self.alpha or set(self.alpha) - {"0", "1"}):
            raise ConfigError("field 'instance.alpha': must be a nonempty bit string")

    def config(self, H, p):
        bits = (0,) * H if not self.alpha else tuple(
            int(self.alpha[i % len(self.alpha)]) for i in range(H))
        return SynthConfig(H=H, p=p, alpha=bits, encoding_scale=self.encoding_scale,
                           noise=self.noise)


@dataclass(frozen=True)
class SweepConfig:
    instance: InstanceTemplate = field(default_factory=InstanceTemplate)
    K_grid: tuple = tuple(2 ** k for k in range(8, 14))
    H_list: tuple = (10,)
    p_list: tuple = (0.6,)
    trials: int = 50
    base_seed: int = 0
    methods: tuple = METHODS
    params: VaParams = field(default_factory=VaParams)
    split_mode: str = "alias"
    sampling_model: str = "stage_sampling"
    output_dir: str = "results"
    record_timing: bool = False

    def __post_init__(self):
        def bad(name, msg):
            raise ConfigError(f"field {name!r}: {msg}")

        if not self.K_grid or any(int(k) < 1 for k in self.K_grid):
            bad("K_grid", "must be a nonempty list of positive integers")
        if list(self.K_grid) != sorted(self.K_grid):
            bad("K_grid", "must be sorted ascending")
        if not self.H_list or any(int(h) < 1 for h in self.H_list):
            bad("H_list", "must be a nonempty list of positive integers")
        if not self.p_list or any(not 0 < p < 1 for p in self.p_list):
            bad("p_list", "entries must lie in (0, 1)")
        if self.trials < 1:
            bad("trials", "must be at least 1")
        if not self.methods:
            bad("methods", "must name at least one method")
        if set(self.methods) - set(METHODS):
            bad("methods", f"unknown methods {sorted(set(self.methods) - set(METHODS))}")
        if self.split_mode not in ("alias", "halves"):
            bad("split_mode", "must be 'alias' or 'halves'")
        if self.sampling_model not in SAMPLERS:
            bad("sampling_model", f"must be one of {sorted(SAMPLERS)}")
        if self.split_mode == "halves" and any(k % 2 for k in self.K_grid):
            bad("K_grid", "halves split needs even K")

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown fields {sorted(unknown)}")
        kw = dict(doc)
        try:
            if "instance" in kw:
                inst = dict(kw["instance"])
                if "noise" in inst:
                    inst["noise"] = NoiseSpec(**inst["noise"])
                kw["instance"] = InstanceTemplate(**inst)
            if "params" in kw:
                kw["params"] = VaParams(**kw["params"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field 'instance'/'params': {exc}") from exc
        for name in ("K_grid", "H_list", "p_list", "methods"):
            if name in kw:
                if not isinstance(kw[name], list):
                    raise ConfigError(f"field {name!r}: must be a list")
                kw[name] = tuple(kw[name])
        return cls(**kw)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(doc)

    def to_dict(self):
        out = asdict(self)
        for name in ("K_grid", "H_list", "p_list", "methods"):
            out[name] = list(out[name])
        return out


@dataclass(frozen=True)
class RunRecord:
    method: str
    H: int
    p: float
    K: int
    trial: int
    seed: int
    v_true: float
    v_hat: float
    abs_error: float
    wall_time_ms: float

    def row(self):
        return [self.method, self.H, repr(self.p), self.K, self.trial, self.seed,
                repr(self.v_true), repr(self.v_hat), repr(self.abs_error),
                repr(self.wall_time_ms)]


def trial_seed(base_seed, H, p, K, trial):
    """63-bit dataset seed shared by all methods of one (H, p, K, trial) cell."""
    payload = struct.pack("<qqdqq", int(base_seed), int(H), float(p), int(K), int(trial))
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little") >> 1


def _run_cell(cfg, H, p, K, trial):
    mdp, behavior, target, xi1 = build(cfg.instance.config(H, p))
    v_true = exact_eval(mdp, target, xi1).v1
    seed = trial_seed(cfg.base_seed, H, p, K, trial)
    data = SAMPLERS[cfg.sampling_model](mdp, behavior, xi1, K, seed)
    D, D_check = split(data, cfg.split_mode)
    records = []
    for method in cfg.methods:
        start = time.perf_counter()
        if method == "va_ope":
            v_hat = va_ope(D, D_check, mdp, target, xi1, cfg.params).v1_hat
        else:
            v_hat = fqi_ope(D, mdp, target, xi1, cfg.params.lam).v1_hat
        elapsed = (time.perf_counter() - start) * 1e3 if cfg.record_timing else 0.0
        records.append(RunRecord(method, H, p, K, trial, seed, v_true, v_hat,
                                 abs(v_true - v_hat), elapsed))
    return records


def _run_cell_args(args):
    return _run_cell(*args)


def record_sort_key(rec):
    return (rec.method, rec.H, rec.p, rec.K, rec.trial)


def run_sweep(cfg, jobs=1, write=True):
    """Run every (method, H, p, K, trial) cell; both methods share each dataset.

    Records are sorted by ``(method, H, p, K, trial)``.  With ``write`` the
    records are streamed to ``runs.partial.csv`` as cells finish and the
    sorted result is written to ``runs.csv`` in ``cfg.output_dir``.
    """
    tasks = [(cfg, H, p, K, trial) for H in cfg.H_list for p in cfg.p_list
             for K in cfg.K_grid for trial in range(cfg.trials)]
    partial = None
    if write:
        os.makedirs(cfg.output_dir, exist_ok=True)
        partial_path = os.path.join(cfg.output_dir, "runs.partial.csv")
        partial = open(partial_path, "w", newline="")
        writer = csv.writer(partial, lineterminator="\n")
        writer.writerow(RUN_HEADER)
    records = []
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(_run_cell_args, tasks, chunksize=4)
                for recs in results:
                    records.extend(recs)
                    if partial:
                        writer.writerows(r.row() for r in recs)
        else:
            for task in tasks:
                recs = _run_cell(*task)
                records.extend(recs)
                if partial:
                    writer.writerows(r.row() for r in recs)
                    partial.flush()
    finally:
        if partial:
            partial.close()
    records.sort(key=record_sort_key)
    if write:
        with open(os.path.join(cfg.output_dir, "runs.csv"), "w", newline="") as f:
            f.write(records_to_csv(records))
        os.remove(partial_path)
    return records


def records_to_csv(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUN_HEADER)
    writer.writerows(r.row() for r in records)
    return buf.getvalue()


def read_records(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [RunRecord(r["method"], int(r["H"]), float(r["p"]), int(r["K"]), int(r["trial"]),
                      int(r["seed"]), float(r["v_true"]), float(r["v_hat"]),
                      float(r["abs_error"]), float(r["wall_time_ms"])) for r in rows]


@dataclass(frozen=True)
class SummaryRow:
    method: str
    H: int
    p: float
    K: int
    n: int
    mean: float
    q10: float
    q90: float


def aggregate(records):
    """Mean and [10%, 90%] quantiles (linear interpolation) of ``abs_error`` per cell."""
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for rec in records:
        groups.setdefault((rec.method, rec.H, rec.p, rec.K), []).append(rec.abs_error)
    out = []
    for key in sorted(groups):
        errs = np.sort(np.asarray(groups[key]))
        q10, q90 = np.percentile(errs, [10, 90])
        out.append(SummaryRow(*key, n=len(errs), mean=float(np.mean(errs)),
                              q10=float(q10), q90=float(q90)))
    return out


def summary_to_csv(summary):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for row in summary:
        writer.writerow([row.method, row.H, repr(row.p), row.K, row.n,
                         repr(row.mean), repr(row.q10), repr(row.q90)])
    return buf.getvalue()


def read_summary(path):
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [SummaryRow(r["method"], int(r["H"]), float(r["p"]), int(r["K"]), int(r["n"]),
                       float(r["mean"]), float(r["q10"]), float(r["q90"])) for r in rows]


def loglog_slope(summary, method, H, p):
    """Least-squares slope of ``log(mean error)`` against ``log(K)`` for one curve."""
    rows = sorted((r for r in summary if (r.method, r.H, r.p) == (method, H, p)),
                  key=lambda r: r.K)
    K = np.array([r.K for r in rows], dtype=float)
    err = np.array([r.mean for r in rows])
    return float(np.polyfit(np.log(K), np.log(err), 1)[0])
