"""Path ensembles, random draws and their on-disk formats.

Binary layout (little-endian), written by :meth:`PathEnsemble.to_binary`::

    magic    4 bytes   b"SLPE"
    version  uint32    currently 1
    n_paths  uint32
    n_steps  uint32
    times    float64[n_steps + 1]
    states   float64[n_paths, n_steps + 1]   row-major, one row per path
    draws    float64[n_paths, n_steps]       row-major; draws[k, i] drives step i -> i+1
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_MAGIC = b"SLPE"
_VERSION = 1


def normal_draws(seed: int, n_paths: int, n_steps: int) -> np.ndarray:
    """Standard normal draws of shape ``(n_paths, n_steps)``.

    Uses the counter-based Philox generator, so entry ``(k, i)`` depends only on
    ``(seed, n_steps, k, i)`` and never on how the work is later split.
    """
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    return gen.standard_normal((n_paths, n_steps))


def spawn_generators(seed: int, n: int) -> list[np.random.Generator]:
    """Independent per-task generators, e.g. one per Latin hypercube point."""
    return [np.random.Generator(np.random.Philox(s)) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass
class PathEnsemble:
    times: np.ndarray
    states: np.ndarray
    draws: np.ndarray
    scheme: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.draws = np.asarray(self.draws, dtype=float).reshape(self.states.shape[0], -1)
        if self.states.shape[1] != self.times.size or self.draws.shape[1] != self.times.size - 1:
            raise ValueError("inconsistent ensemble shapes")

    @property
    def n_paths(self) -> int:
        return self.states.shape[0]

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def terminal(self) -> np.ndarray:
        return self.states[:, -1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["path_id", "step_index", "t", "y", "z"])
            for k in range(self.n_paths):
                for i, t in enumerate(self.times):
                    z = "" if i == 0 else repr(float(self.draws[k, i - 1]))
                    w.writerow([k, i, repr(float(t)), repr(float(self.states[k, i])), z])

    @classmethod
    def from_csv(cls, path, scheme: str = "") -> "PathEnsemble":
        rows = np.genfromtxt(path, delimiter=",", skip_header=1, filling_values=np.nan)
        rows = np.atleast_2d(rows)
        n_paths = int(rows[:, 0].max()) + 1
        n_pts = int(rows[:, 1].max()) + 1
        rows = rows[np.lexsort((rows[:, 1], rows[:, 0]))]
        times = rows[:n_pts, 2]
        states = rows[:, 3].reshape(n_paths, n_pts)
        draws = rows[:, 4].reshape(n_paths, n_pts)[:, 1:]
        return cls(times, states, draws, scheme=scheme)

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<III", _VERSION, self.n_paths, self.n_steps))
            fh.write(self.times.astype("<f8").tobytes())
            fh.write(np.ascontiguousarray(self.states, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.draws, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path, scheme: str = "") -> "PathEnsemble":
        raw = Path(path).read_bytes()
        if raw[:4] != _MAGIC:
            raise ValueError(f"{path}: not a path ensemble file")
        version, n_paths, n_steps = struct.unpack("<III", raw[4:16])
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        buf = np.frombuffer(raw, dtype="<f8", offset=16)
        n_t = n_steps + 1
        times = buf[:n_t]
        states = buf[n_t:n_t + n_paths * n_t].reshape(n_paths, n_t)
        draws = buf[n_t + n_paths * n_t:].reshape(n_paths, n_steps)
        return cls(times.copy(), states.copy(), draws.copy(), scheme=scheme)
