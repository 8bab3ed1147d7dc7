"""Training data: Latin hypercube designs and collocation labels from fine-grid Monte Carlo.

For Markov models the conditional collocation points of ``Y(t + dt) | Y(t) = y``
equal the marginal points of a run started at ``Y0 = y``; one fine-grid run per
design point therefore labels every ``dt`` on the grid at once.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .models import THETA_NAMES, ModelKind, SdeParams, exact_sample
from .paths import spawn_generators
from .probability import QuadratureRule, std_normal_cdf
from .schemes import Scheme, euler_step, milstein_step

@dataclass
class ParamDomain:
    """Sampling domain: ``bounds`` maps ``y0`` and every model parameter to ``(low, high)``."""

    kind: ModelKind
    bounds: dict
    dtau: float = 0.01
    n_tau: int = 160
    n_lhs: int = 500
    n_mc_paths: int = 100_000
    antithetic: bool = False

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.bounds = {k: tuple(float(v) for v in b) for k, b in self.bounds.items()}
        for name in self.param_names:
            if name not in self.bounds:
                raise ValueError(f"missing bounds for {name}")
            lo, hi = self.bounds[name]
            if not lo < hi:
                raise ValueError(f"bounds for {name} must satisfy low < high, got {(lo, hi)}")
        extra = set(self.bounds) - set(self.param_names)
        if extra:
            raise ValueError(f"unknown parameters {sorted(extra)}")
        if self.dtau <= 0 or self.n_tau < 1 or self.n_lhs < 1 or self.n_mc_paths < 2:
            raise ValueError("dtau, n_tau, n_lhs and n_mc_paths must be positive")
        if self.antithetic and self.n_mc_paths % 2:
            raise ValueError("antithetic sampling needs an even n_mc_paths")

    @property
    def param_names(self) -> tuple:
        return ("y0",) + THETA_NAMES[self.kind]

    @property
    def tau_max(self) -> float:
        return self.dtau * self.n_tau

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["bounds"] = {k: list(v) for k, v in self.bounds.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParamDomain":
        return cls(**d)


def gbm_full_domain(**overrides) -> ParamDomain:
    """GBM training domain of the reference experiment (mu, sigma, Y0 ranges; 160 steps of 0.01)."""
    d = dict(kind=ModelKind.GBM,
             bounds={"y0": (0.10, 15.0), "mu": (0.0, 0.10), "sigma": (0.05, 0.60)},
             dtau=0.01, n_tau=160, n_lhs=500, n_mc_paths=100_000)
    d.update(overrides)
    return ParamDomain(**d)


def ou_domain(**overrides) -> ParamDomain:
    d = dict(kind=ModelKind.OU,
             bounds={"y0": (-1.0, 3.0), "ybar": (0.0, 2.0), "sigma": (0.05, 0.60), "lam": (0.1, 1.0)},
             dtau=0.01, n_tau=410, n_lhs=410, n_mc_paths=100_000)
    d.update(overrides)
    return ParamDomain(**d)


def latin_hypercube(domain: ParamDomain, seed: int) -> np.ndarray:
    """``n_lhs`` rows, one column per entry of ``domain.param_names``."""
    n = domain.n_lhs
    names = domain.param_names
    rng = np.random.default_rng(seed)
    unit = np.empty((n, len(names)))
    for c in range(len(names)):
        unit[:, c] = (rng.permutation(n) + rng.random(n)) / n
    lo = np.array([domain.bounds[k][0] for k in names])
    hi = np.array([domain.bounds[k][1] for k in names])
    return lo + unit * (hi - lo)


@dataclass
class LabeledDataset:
    inputs: np.ndarray
    targets: np.ndarray
    input_names: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=float))
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("row counts of inputs and targets differ")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def m(self) -> int:
        return self.targets.shape[1]

    @property
    def target_names(self) -> list:
        return [f"y_hat_{j + 1}" for j in range(self.m)]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.inputs[idx], self.targets[idx], list(self.input_names), dict(self.meta))

    def save(self, csv_path) -> Path:
        """Write ``csv_path`` and a ``.json`` sidecar with the metadata; returns the sidecar path."""
        csv_path = Path(csv_path)
        header = ",".join(self.input_names + self.target_names)
        np.savetxt(csv_path, np.hstack([self.inputs, self.targets]), delimiter=",",
                   header=header, comments="", fmt="%.17g")
        sidecar = csv_path.with_suffix(".json")
        meta = dict(self.meta, input_names=self.input_names, n_rows=len(self), m=self.m)
        sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True))
        return sidecar

    @classmethod
    def load(cls, csv_path) -> "LabeledDataset":
        csv_path = Path(csv_path)
        meta = json.loads(csv_path.with_suffix(".json").read_text())
        data = np.atleast_2d(np.loadtxt(csv_path, delimiter=",", skiprows=1))
        k = len(meta["input_names"])
        return cls(data[:, :k], data[:, k:], list(meta["input_names"]), meta)


def input_names(kind: ModelKind) -> list:
    k = len(THETA_NAMES[ModelKind(kind)])
    return ["y_prev", "t", "dt"] + [f"theta_{i + 1}" for i in range(k)]


def _fine_step(scheme: Scheme):
    if scheme is Scheme.EULER:
        return euler_step
    if scheme is Scheme.MILSTEIN:
        return milstein_step
    return lambda p, t, y, dt, z: exact_sample(p, t, y, dt, z)


def label_point(params: SdeParams, domain: ParamDomain, nodes: np.ndarray, scheme,
                rng: np.random.Generator) -> np.ndarray:
    """Collocation points of ``Y(tau_i) | Y0`` for ``i = 1..n_tau``, shape ``(n_tau, m)``.

    With ``domain.antithetic`` every path is paired with its mirror ``-z``, so
    the driving noise is exactly symmetric and the location of the estimated
    quantiles carries far less sampling error.
    """
    step = _fine_step(Scheme(scheme))
    n = domain.n_mc_paths
    levels = std_normal_cdf(nodes)
    pos = np.clip(levels * (n + 1) - 1.0, 0.0, n - 1.0)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n - 1)
    frac = pos - lo
    kth = np.unique(np.concatenate([lo, hi]))
    y = np.full(n, params.y0)
    out = np.empty((domain.n_tau, nodes.size))
    buf = np.empty(n)
    for i in range(domain.n_tau):
        if domain.antithetic:
            h = rng.standard_normal(n // 2)
            z = np.concatenate([h, -h])
        else:
            z = rng.standard_normal(n)
        y = step(params, i * domain.dtau, y, domain.dtau, z)
        buf[:] = y
        buf.partition(kth)
        out[i] = buf[lo] + frac * (buf[hi] - buf[lo])
    return out


def generate_labels(domain: ParamDomain, rule: QuadratureRule, scheme=Scheme.EULER,
                    seed: int = 0, workers: int = 1) -> LabeledDataset:
    """Label every LHS design point at every fine-grid time.

    Rows are ``(y_prev=Y0, t=0, dt=tau_i, theta)`` with the ``m`` collocation
    points of ``Y(tau_i)`` as targets, ordered by design point then time.
    """
    if domain.n_mc_paths < 10 * rule.m:
        raise ValueError(f"n_mc_paths={domain.n_mc_paths} is too small for m={rule.m}")
    design = latin_hypercube(domain, seed)
    gens = spawn_generators(seed + 1, domain.n_lhs)
    names = domain.param_names

    def one(k):
        row = dict(zip(names, design[k]))
        y0 = row.pop("y0")
        if domain.kind is ModelKind.GBM:
            params = SdeParams.gbm(row["mu"], row["sigma"], y0)
        else:
            params = SdeParams.ou(row["lam"], row["ybar"], row["sigma"], y0)
        return params, label_point(params, domain, rule.nodes, scheme, gens[k])

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, range(domain.n_lhs)))

    taus = domain.dtau * np.arange(1, domain.n_tau + 1)
    inputs = []
    targets = []
    for params, labels in results:
        block = np.empty((domain.n_tau, 3 + len(params.theta())))
        block[:, 0] = params.y0
        block[:, 1] = 0.0
        block[:, 2] = taus
        block[:, 3:] = params.theta()
        inputs.append(block)
        targets.append(labels)
    meta = {"model_kind": domain.kind.value, "seed": seed, "scheme": Scheme(scheme).value,
            "domain": domain.to_dict(), "nodes": rule.nodes.tolist()}
    return LabeledDataset(np.vstack(inputs), np.vstack(targets), input_names(domain.kind), meta)


def merge(*datasets: LabeledDataset) -> LabeledDataset:
    names = datasets[0].input_names
    if any(d.input_names != names or d.m != datasets[0].m for d in datasets):
        raise ValueError("datasets have different layouts")
    meta = {"merged": [d.meta for d in datasets]}
    for key in ("model_kind", "nodes"):
        values = [d.meta.get(key) for d in datasets]
        if all(v == values[0] for v in values):
            meta[key] = values[0]
    return LabeledDataset(np.vstack([d.inputs for d in datasets]),
                          np.vstack([d.targets for d in datasets]), list(names), meta)


def split(dataset: LabeledDataset, fraction: float, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded shuffle into ``round(fraction * n)`` training rows and the rest."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie in (0, 1)")
    n = len(dataset)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fraction * n))
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))
