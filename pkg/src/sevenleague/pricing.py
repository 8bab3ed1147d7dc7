"""Asian and Bermudan option prices over any path source."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .paths import PathEnsemble


class OptionKind(str, Enum):
    ASIAN = "asian"
    BERMUDAN_PUT = "bermudan_put"
    EUROPEAN_PUT = "european_put"


class ExercisePolicy(str, Enum):
    REGRESSED = "regressed"
    REALIZED = "realized"


@dataclass(frozen=True)
class OptionSpec:
    """Contract on ``n_dates`` equally spaced dates ``dt, 2 dt, ..., T``."""

    kind: OptionKind
    strike: float
    rate: float
    n_dates: int
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "kind", OptionKind(self.kind))
        if not self.strike > 0:
            raise ValueError("strike must be positive")
        if self.rate < 0:
            raise ValueError("rate must be non-negative")
        if self.n_dates < 1 or not self.dt > 0:
            raise ValueError("need n_dates >= 1 and dt > 0")

    @property
    def maturity(self) -> float:
        return self.n_dates * self.dt

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptionSpec":
        return cls(**d)


@dataclass
class PriceResult:
    price: float
    stderr: float
    n_paths: int
    scheme: str
    spec: OptionSpec
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"price": self.price, "stderr": self.stderr, "n_paths": self.n_paths,
             "scheme": self.scheme, "spec": self.spec.to_dict(), "seed": self.seed}
        if self.extra:
            d["extra"] = self.extra
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def relative_error(self, reference: float) -> float:
        return abs(self.price - reference) / abs(reference)


def date_states(paths: PathEnsemble, spec: OptionSpec) -> np.ndarray:
    """States at ``t_0`` and the ``n_dates`` monitoring dates, shape ``(n_paths, n_dates + 1)``.

    Accepts any grid whose step divides ``spec.dt`` exactly, so fine-grid
    ensembles are subsampled rather than rejected.
    """
    n = paths.n_steps
    if n % spec.n_dates:
        raise ValueError(f"grid of {n} steps does not contain {spec.n_dates} monitoring dates")
    stride = n // spec.n_dates
    t = paths.times[::stride] - paths.times[0]
    expected = spec.dt * np.arange(spec.n_dates + 1)
    if not np.allclose(t, expected, rtol=1e-9, atol=1e-12):
        raise ValueError(f"path times {t.tolist()} do not match monitoring dates {expected.tolist()}")
    return paths.states[:, ::stride]


def _result(values, paths, spec, **extra) -> PriceResult:
    m = values.size
    stderr = float(values.std(ddof=1) / np.sqrt(m)) if m > 1 else float("nan")
    return PriceResult(float(values.mean()), stderr, m, paths.scheme, spec, paths.meta.get("seed"), extra)


def price_asian(paths: PathEnsemble, spec: OptionSpec) -> PriceResult:
    """Fixed-strike arithmetic Asian call, average over ``t_1..t_N`` (``t_0`` excluded)."""
    S = date_states(paths, spec)
    avg = S[:, 1:].mean(axis=1)
    disc = np.exp(-spec.rate * spec.maturity)
    return _result(disc * np.maximum(avg - spec.strike, 0.0), paths, spec)


def price_european_put(paths: PathEnsemble, spec: OptionSpec) -> PriceResult:
    S = date_states(paths, spec)
    disc = np.exp(-spec.rate * spec.maturity)
    return _result(disc * np.maximum(spec.strike - S[:, -1], 0.0), paths, spec)


def _basis(y: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones_like(y), y, y * y])


def price_bermudan_lsmc(paths: PathEnsemble, spec: OptionSpec,
                        policy: ExercisePolicy = ExercisePolicy.REGRESSED) -> PriceResult:
    """Longstaff-Schwartz put exercisable on ``t_1..t_N``.

    Continuation values are regressed on ``{1, y, y^2}`` over in-the-money
    paths only, solved by an orthogonal factorization (``lstsq``). With the
    ``regressed`` policy an in-the-money path that continues carries the
    fitted continuation value; ``realized`` keeps its discounted cash flow.
    Out-of-the-money paths always keep the discounted cash flow. There is no
    exercise at ``t_0``, so one date gives the European put.
    """
    policy = ExercisePolicy(policy)
    S = date_states(paths, spec)
    K = spec.strike
    disc = np.exp(-spec.rate * spec.dt)
    V = np.maximum(K - S[:, -1], 0.0)
    skipped = []
    for i in range(spec.n_dates - 1, 0, -1):
        V = disc * V
        y = S[:, i]
        payoff = np.maximum(K - y, 0.0)
        itm = payoff > 0
        if not itm.any():
            skipped.append(i)
            continue
        A = _basis(y[itm])
        beta = np.linalg.lstsq(A, V[itm], rcond=None)[0]
        cont = A @ beta
        ex = payoff[itm] >= cont
        v_itm = V[itm]
        if policy is ExercisePolicy.REGRESSED:
            v_itm = np.where(ex, payoff[itm], cont)
        else:
            v_itm = np.where(ex, payoff[itm], v_itm)
        V[itm] = v_itm
    return _result(disc * V, paths, spec, policy=policy.value, skipped_dates=skipped)


def price(paths: PathEnsemble, spec: OptionSpec, **kw) -> PriceResult:
    if spec.kind is OptionKind.ASIAN:
        return price_asian(paths, spec)
    if spec.kind is OptionKind.BERMUDAN_PUT:
        return price_bermudan_lsmc(paths, spec, **kw)
    return price_european_put(paths, spec)
