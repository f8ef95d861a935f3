"""Monte Carlo layer: forward path simulation, backward partial sums, two-sample tests."""
from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from . import measures as ms
from .errors import InputError
from .process import NoiseProcess, model_at
from .spectral import LinearMap

__all__ = [
    "GaussianRepr",
    "DiracRepr",
    "EmpiricalRepr",
    "MeasureRepr",
    "PathEnsemble",
    "TwoSampleResult",
    "simulate_paths",
    "backward_partial_sample",
    "energy_distance",
    "energy_distance_test",
    "ecf_distance",
    "write_samples_csv",
    "read_samples_csv",
    "write_paths_csv",
    "derive_rng",
]

DEFAULT_PERMUTATIONS = 500
# pooled size above which the d > 1 permutation test subsamples
MAX_POOLED_MULTIVARIATE = 6000


# --------------------------------------------------------------------------
# marginal representations


@dataclass(frozen=True, eq=False)
class GaussianRepr:
    mean: np.ndarray
    cov: np.ndarray
    kind = "gaussian"

    def to_model(self) -> ms.NoiseModel:
        return ms.Gaussian(self.mean, self.cov)

    def shifted(self, v) -> "GaussianRepr":
        return GaussianRepr(np.asarray(self.mean) + v, self.cov)


@dataclass(frozen=True, eq=False)
class DiracRepr:
    point: np.ndarray
    kind = "dirac"

    def to_model(self) -> ms.NoiseModel:
        return ms.Dirac(self.point)

    def shifted(self, v) -> "DiracRepr":
        return DiracRepr(np.asarray(self.point) + v)


@dataclass(frozen=True, eq=False)
class EmpiricalRepr:
    samples: np.ndarray
    seed: int
    N_truncation: int
    certified: bool = True
    kind = "empirical"

    def to_model(self) -> ms.NoiseModel:
        return ms.SampleCloud(self.samples)

    def shifted(self, v) -> "EmpiricalRepr":
        return EmpiricalRepr(np.asarray(self.samples) + v, self.seed, self.N_truncation, self.certified)


MeasureRepr = (GaussianRepr, DiracRepr, EmpiricalRepr)


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a (seed, key...) stream; negative keys allowed."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [(2 * k if k >= 0 else -2 * k - 1) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(words))


def _draw_initial(initial, n: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(initial, EmpiricalRepr):
        pts = np.asarray(initial.samples)
        return pts[rng.integers(0, pts.shape[0], size=n)]
    if isinstance(initial, (GaussianRepr, DiracRepr)):
        return ms.sample(initial.to_model(), n, None, rng=rng)
    if isinstance(initial, ms.NoiseModel):
        return ms.sample(initial, n, None, rng=rng)
    raise InputError("initial law must be a MeasureRepr or NoiseModel")


# --------------------------------------------------------------------------
# path simulation


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """paths[j, t] is eta_{k_start + t} on path j; noise[j, t] drives step t+1."""

    k_start: int
    k_end: int
    paths: np.ndarray
    noise: np.ndarray
    seed: int
    initial_law: object

    @property
    def n_paths(self) -> int:
        return self.paths.shape[0]

    def marginal(self, k: int) -> np.ndarray:
        if not self.k_start <= k <= self.k_end:
            raise InputError(f"k={k} outside [{self.k_start}, {self.k_end}]")
        return self.paths[:, k - self.k_start]

    def max_residual(self, map: LinearMap) -> float:
        phi = np.asarray(map.entries)
        pred = self.noise + self.paths[:, :-1] @ phi.T
        diff = np.abs(self.paths[:, 1:] - pred)
        scale = 1 + np.abs(self.paths[:, 1:])
        return float((diff / scale).max()) if diff.size else 0.0


def simulate_paths(process: NoiseProcess, map: LinearMap, initial, k_start: int, k_end: int, n: int, seed: int) -> PathEnsemble:
    """Run eta_k = xi_k + phi(eta_{k-1}) forward with fresh independent noise per step and path."""
    if n < 1:
        raise InputError("n must be >= 1")
    if not k_start < k_end:
        raise InputError("k_start must be < k_end")
    d = map.dim
    if process.dim != d:
        raise InputError("process and map dimensions differ")
    length = k_end - k_start + 1
    phi = np.asarray(map.entries)
    paths = np.empty((n, length, d))
    noise = np.empty((n, length - 1, d))
    paths[:, 0] = _draw_initial(initial, n, derive_rng(seed, 0, k_start))
    for t in range(1, length):
        k = k_start + t
        xi = ms.sample(model_at(process, k), n, None, rng=derive_rng(seed, 1, k))
        noise[:, t - 1] = xi
        paths[:, t] = xi + paths[:, t - 1] @ phi.T
    paths.setflags(write=False)
    noise.setflags(write=False)
    return PathEnsemble(k_start, k_end, paths, noise, seed, initial)


def backward_partial_sample(
    process: NoiseProcess,
    map: LinearMap,
    k: int,
    N: int,
    n: int,
    seed: int,
    offsets=None,
) -> EmpiricalRepr:
    """n draws of S_{k,N} = sum_{i=0}^{N} phi^i xi_{k-i}.

    ``offsets`` (callable j -> vector) is subtracted from each xi_j before
    summing, which is how coset-supported noise gets centered.
    """
    if N < 0 or n < 1:
        raise InputError("need N >= 0 and n >= 1")
    phi = np.asarray(map.entries)
    rng = derive_rng(seed, 2, k, N)
    s = np.zeros((n, map.dim))
    # Horner from the oldest term: S <- xi_{k-i} + phi S
    for i in range(N, -1, -1):
        j = k - i
        xi = ms.sample(model_at(process, j), n, None, rng=rng)
        if offsets is not None:
            xi = xi - offsets(j)
        s = xi + s @ phi.T
    s.setflags(write=False)
    return EmpiricalRepr(s, seed, N)


# --------------------------------------------------------------------------
# two-sample statistics


@dataclass(frozen=True)
class TwoSampleResult:
    statistic: float
    p_value: float
    n_a: int
    n_b: int
    permutations: int
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _as_2d(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a


def _energy_1d_perm(pooled: np.ndarray, labels: np.ndarray, n_a: int) -> np.ndarray:
    """V-statistic energy distance 2 * int (F_a - F_b)^2 for each row of boolean ``labels``.

    ``pooled`` is sorted; labels[r, i] marks pooled[i] as belonging to sample a.
    """
    n_b = pooled.shape[0] - n_a
    gaps = np.diff(pooled)
    ca = np.cumsum(labels[:, :-1], axis=1) / n_a
    cb = (np.arange(1, pooled.shape[0]) - np.cumsum(labels[:, :-1], axis=1)) / n_b
    return 2.0 * ((ca - cb) ** 2 @ gaps)


def energy_distance(a, b) -> float:
    """2 E|X-Y| - E|X-X'| - E|Y-Y'| with empirical (V-statistic) expectations."""
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[1] == 1:
        pooled = np.concatenate([a[:, 0], b[:, 0]])
        order = np.argsort(pooled, kind="stable")
        lab = (order < a.shape[0])[None, :]
        return float(_energy_1d_perm(pooled[order], lab, a.shape[0])[0])
    return float(2 * cdist(a, b).mean() - cdist(a, a).mean() - cdist(b, b).mean())


def energy_distance_test(a, b, permutations: int = DEFAULT_PERMUTATIONS, seed: int = 0) -> TwoSampleResult:
    """Energy statistic with a permutation p-value (1 + #{perm >= obs}) / (1 + permutations)."""
    a, b = _as_2d(a), _as_2d(b)
    n_a, n_b = a.shape[0], b.shape[0]
    if n_a < 50 or n_b < 50:
        raise InputError("energy test needs at least 50 points per sample")
    if permutations < 200:
        raise InputError("energy test needs at least 200 permutations")
    if a.shape[1] != b.shape[1]:
        raise InputError("samples have different dimensions")
    rng = np.random.default_rng(seed)
    if a.shape[1] == 1:
        pooled = np.concatenate([a[:, 0], b[:, 0]])
        order = np.argsort(pooled, kind="stable")
        z = pooled[order]
        is_a = order < n_a
        obs = float(_energy_1d_perm(z, is_a[None, :], n_a)[0])
        m = n_a + n_b
        chunk = max(1, int(2e7 // m))
        stats = []
        done = 0
        while done < permutations:
            c = min(chunk, permutations - done)
            lab = np.zeros((c, m), dtype=bool)
            for r in range(c):
                lab[r, rng.permutation(m)[:n_a]] = True
            stats.append(_energy_1d_perm(z, lab, n_a))
            done += c
        stats = np.concatenate(stats)
    else:
        if n_a + n_b > MAX_POOLED_MULTIVARIATE:
            half = MAX_POOLED_MULTIVARIATE // 2
            a = a[rng.choice(n_a, min(n_a, half), replace=False)]
            b = b[rng.choice(n_b, min(n_b, half), replace=False)]
            n_a, n_b = a.shape[0], b.shape[0]
        pooled = np.concatenate([a, b])
        dist = cdist(pooled, pooled)
        m = n_a + n_b
        total = dist.sum()

        def stat_for(ind: np.ndarray) -> np.ndarray:
            # ind: m x r indicator of sample a
            row_a = dist @ ind
            saa = np.einsum("ir,ir->r", ind, row_a)
            sab = row_a.sum(axis=0) - saa
            sbb = total - saa - 2 * sab
            return 2 * sab / (n_a * n_b) - saa / n_a**2 - sbb / n_b**2

        base = np.zeros((m, 1))
        base[:n_a, 0] = 1.0
        obs = float(stat_for(base)[0])
        stats = []
        for start in range(0, permutations, 50):
            c = min(50, permutations - start)
            ind = np.zeros((m, c))
            for r in range(c):
                ind[rng.permutation(m)[:n_a], r] = 1.0
            stats.append(stat_for(ind))
        stats = np.concatenate(stats)
    slack = 1e-12 * max(abs(obs), 1e-300)
    count = int(np.sum(stats >= obs - slack))
    p = (1 + count) / (1 + permutations)
    return TwoSampleResult(max(obs, 0.0), float(min(p, 1.0)), n_a, n_b, permutations, seed)


def ecf_distance(a, b, grid: Sequence) -> float:
    """max over grid points t of |mean exp(i t.X) - mean exp(i t.Y)|."""
    a, b = _as_2d(a), _as_2d(b)
    t = np.atleast_2d(np.asarray(grid, dtype=float))
    if t.size == 0:
        raise InputError("grid must be nonempty")
    if t.shape[1] != a.shape[1]:
        t = t.reshape(-1, a.shape[1])
    cfa = np.exp(1j * (a @ t.T)).mean(axis=0)
    cfb = np.exp(1j * (b @ t.T)).mean(axis=0)
    return float(np.max(np.abs(cfa - cfb)))


# --------------------------------------------------------------------------
# CSV export


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: str, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_samples_csv(path: str, samples) -> None:
    """One row per draw, header x0..x{d-1}."""
    s = _as_2d(samples)

    def w(fh):
        out = csv.writer(fh, lineterminator="\n")
        out.writerow([f"x{i}" for i in range(s.shape[1])])
        for row in s:
            out.writerow([_fmt(v) for v in row])

    _atomic_write(path, w)


def read_samples_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not all(h == f"x{i}" for i, h in enumerate(rows[0])):
        raise InputError(f"{path}: expected header x0..x{{d-1}}")
    return np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(rows[0]))


def write_paths_csv(path: str, ensemble: PathEnsemble) -> None:
    """One row per (path, k), header path,k,x0..x{d-1}."""
    d = ensemble.paths.shape[2]

    def w(fh):
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["path", "k"] + [f"x{i}" for i in range(d)])
        for j in range(ensemble.n_paths):
            for t in range(ensemble.paths.shape[1]):
                out.writerow([j, ensemble.k_start + t] + [_fmt(v) for v in ensemble.paths[j, t]])

    _atomic_write(path, w)
