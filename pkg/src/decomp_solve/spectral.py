"""Linear-algebra substrate: the drift map, its contraction subspace, and covariance series.

Everything here is a pure function of its inputs. Arrays stored on the frozen
dataclasses are copied and marked read-only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import InputError, NoFixedPointError, SpectralGapError

__all__ = [
    "LinearMap",
    "ContractionSplit",
    "SeriesResult",
    "as_map",
    "contraction_split",
    "covariance_series",
    "lyapunov_fixed_point",
    "apply_power",
    "fit_geometric_rate",
]

DEFAULT_SPLIT_TOL = 1e-8
DEFAULT_CAP = 1e12
_FIT_WINDOW = 20


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LinearMap:
    """A real d x d matrix acting on R^d, with lazily cached spectral data."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InputError(f"map must be a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("map entries must be finite")
        object.__setattr__(self, "entries", _frozen(m))

    @classmethod
    def scalar(cls, a: float, dim: int = 1) -> "LinearMap":
        return cls(a * np.eye(dim))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.entries)

    @cached_property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    @cached_property
    def condition(self) -> float:
        return float(np.linalg.cond(self.entries))

    @cached_property
    def invertible(self) -> bool:
        return bool(np.isfinite(self.condition) and self.condition < 1e12)

    @cached_property
    def inverse(self) -> np.ndarray:
        if not self.invertible:
            raise InputError("map is singular (condition number %.3g)" % self.condition)
        return _frozen(np.linalg.inv(self.entries))

    @cached_property
    def norm(self) -> float:
        """Operator 2-norm."""
        return float(np.linalg.norm(self.entries, 2))

    def power(self, n: int) -> np.ndarray:
        n = int(n)
        if n >= 0:
            return np.linalg.matrix_power(self.entries, n)
        return np.linalg.matrix_power(self.inverse, -n)

    def compose(self, other: "LinearMap") -> "LinearMap":
        """self after other."""
        return LinearMap(self.entries @ other.entries)

    def is_diagonal(self) -> bool:
        m = self.entries
        return bool(np.all(m == np.diag(np.diag(m))))

    def same_as(self, other: "LinearMap", atol: float = 0.0) -> bool:
        return self.dim == other.dim and bool(np.allclose(self.entries, other.entries, rtol=0, atol=atol))

    def __repr__(self) -> str:
        return f"LinearMap({self.entries.tolist()!r})"


def as_map(m, dim: Optional[int] = None) -> LinearMap:
    """Coerce a LinearMap, scalar or nested sequence into a LinearMap."""
    if isinstance(m, LinearMap):
        out = m
    elif np.isscalar(m):
        out = LinearMap.scalar(float(m), dim or 1)
    else:
        out = LinearMap(np.asarray(m, dtype=float))
    if dim is not None and out.dim != dim:
        raise InputError(f"map has dimension {out.dim}, expected {dim}")
    return out


def apply_power(map: LinearMap, n: int, x) -> np.ndarray:
    """Apply phi^n to a vector, or conjugate a d x d matrix: phi^n X (phi^n)^T.

    Negative ``n`` uses the inverse and requires an invertible map.
    """
    x = np.asarray(x, dtype=float)
    d = map.dim
    if n < 0 and not map.invertible:
        raise InputError("negative power of a singular map")
    pw = map.power(n)
    if x.shape == (d,):
        return pw @ x
    if x.shape == (d, d):
        return pw @ x @ pw.T
    raise InputError(f"expected a {d}-vector or {d}x{d} matrix, got shape {x.shape}")


# --------------------------------------------------------------------------
# contraction subspace


@dataclass(frozen=True, eq=False)
class ContractionSplit:
    """Invariant splitting R^d = C(phi) + U with the oblique projector onto C(phi).

    ``decay_constant`` is the K in ``|phi^n v| <= K (contraction_rate + tol)^n``
    for unit v in C(phi), measured over ``n <= decay_horizon``.
    """

    contraction_basis: np.ndarray
    complement_basis: np.ndarray
    projector: np.ndarray
    contraction_rate: float
    decay_constant: float
    tol: float
    restricted: np.ndarray = field(repr=False)
    decay_horizon: int = 200

    @property
    def dim(self) -> int:
        return self.projector.shape[0]

    @property
    def c(self) -> int:
        return self.contraction_basis.shape[1]

    @property
    def complement_projector(self) -> np.ndarray:
        return np.eye(self.dim) - self.projector

    def complement_part(self, v) -> np.ndarray:
        return self.complement_projector @ np.asarray(v, dtype=float)

    def rate_constant(self, rate: float, horizon: Optional[int] = None) -> float:
        """Smallest K with |phi^n restricted to C(phi)| <= K rate^n for n <= horizon."""
        return _decay_constant(self.restricted, rate, horizon or self.decay_horizon)


def _decay_constant(t11: np.ndarray, rate: float, horizon: int) -> float:
    c = t11.shape[0]
    if c == 0:
        return 0.0
    k, pw = 1.0, np.eye(c)
    scale = 1.0
    for _ in range(horizon):
        pw = t11 @ pw
        scale *= rate
        nrm = np.linalg.norm(pw, 2)
        if nrm == 0.0:
            break
        if scale == 0.0:
            break
        k = max(k, nrm / scale)
    return float(k)


def contraction_split(map: LinearMap, tol: float = DEFAULT_SPLIT_TOL) -> ContractionSplit:
    """Split R^d into the contraction subspace of ``map`` and an invariant complement.

    C(phi) is spanned by the generalized eigenvectors with modulus below
    ``1 - tol``; it is read off an ordered real Schur form, and the complement
    comes from block-diagonalizing that form with a Sylvester solve.
    """
    if not 0 < tol < 0.5:
        raise InputError("tol must lie in (0, 0.5)")
    a = np.asarray(map.entries)
    if not np.all(np.isfinite(a)):
        raise InputError("map entries must be finite")
    mods = np.abs(map.eigenvalues)
    bad = mods[(mods >= 1 - tol) & (mods <= 1 + tol)]
    if bad.size:
        raise SpectralGapError(bad[0], tol)

    d = map.dim
    t, z, c = scipy.linalg.schur(a, output="real", sort=lambda re, im: np.hypot(re, im) < 1 - tol)
    z1, z2 = z[:, :c], z[:, c:]
    t11, t12, t22 = t[:c, :c], t[:c, c:], t[c:, c:]
    if 0 < c < d:
        y = scipy.linalg.solve_sylvester(t11, -t22, -t12)
        comp, _ = np.linalg.qr(z1 @ y + z2)
        proj = z1 @ (z1.T - y @ z2.T)
    elif c == d:
        comp = np.zeros((d, 0))
        proj = np.eye(d)
    else:
        comp = z2.copy()
        proj = np.zeros((d, d))
    rate = float(np.max(np.abs(np.linalg.eigvals(t11)))) if c else 0.0
    return ContractionSplit(
        contraction_basis=_frozen(z1),
        complement_basis=_frozen(comp),
        projector=_frozen(proj),
        contraction_rate=rate,
        decay_constant=_decay_constant(t11, rate + tol, 200),
        tol=tol,
        restricted=_frozen(t11),
    )


# --------------------------------------------------------------------------
# covariance series


@dataclass(frozen=True, eq=False)
class SeriesResult:
    """Partial-sum evaluation of B_k = sum phi^i A_{k-i} (phi^i)^T and b_k = sum phi^i m_{k-i}."""

    value: np.ndarray
    mean: np.ndarray
    status: str
    terms_used: int
    tail_bound: float
    term_norm_trace: tuple
    reason: str = ""
    mean_status: str = "converged"
    mean_tail_bound: float = 0.0
    rate: float = float("nan")

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def fit_geometric_rate(norms: Sequence[float]) -> float:
    """Least-squares geometric ratio of a positive sequence; 0 for an all-zero one."""
    v = np.asarray(norms, dtype=float)
    idx = np.nonzero(v > 0)[0]
    if idx.size == 0:
        return 0.0
    if idx.size == 1:
        # isolated nonzero followed by zeros decays; trailing isolated value tells nothing
        return 0.0 if idx[0] < v.size - 1 else float("nan")
    slope = np.polyfit(idx.astype(float), np.log(v[idx]), 1)[0]
    return float(np.exp(slope))


def _tail(norms: list, window: int = _FIT_WINDOW) -> tuple[float, float]:
    last = norms[-window:]
    if not last or max(last) == 0.0:
        return 0.0, 0.0
    r = fit_geometric_rate(last)
    if not np.isfinite(r) or r >= 1.0:
        return r, float("inf")
    base = last[-1] if last[-1] > 0 else max(last)
    return r, base * r / (1.0 - r)


def covariance_series(
    map: LinearMap,
    cov_seq: Callable[[int], np.ndarray],
    mean_seq: Optional[Callable[[int], np.ndarray]] = None,
    k: int = 0,
    horizon: int = 1000,
    tol: float = 1e-8,
    cap: float = DEFAULT_CAP,
    min_terms: int = 0,
) -> SeriesResult:
    """Sum the pushed-forward covariance series at index ``k``.

    Summation stops early once the last 20 terms are negligible at machine
    precision. Verdict rules: converged when a geometric fit over the last 20
    term norms gives a tail bound <= ``tol``; diverged when a partial sum
    exceeds ``cap`` or the mean term norm over the last quarter of a full
    horizon exceeds ``tol``; otherwise undetermined.
    """
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    if cap <= 0:
        raise InputError("cap must be positive")
    d = map.dim
    phi = np.asarray(map.entries)
    pw = np.eye(d)
    cov = np.zeros((d, d))
    mean = np.zeros(d)
    norms: list[float] = []
    mnorms: list[float] = []
    mean_status = None
    status, reason = None, ""
    eps = np.finfo(float).eps
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(horizon):
            a = np.asarray(cov_seq(k - i), dtype=float)
            term = pw @ a @ pw.T
            tn = float(np.linalg.norm(term))
            if not np.isfinite(tn):
                status, reason = "diverged", "cap exceeded"
                norms.append(float("inf"))
                break
            cov = cov + term
            norms.append(tn)
            if mean_seq is not None and mean_status is None:
                mt = pw @ np.asarray(mean_seq(k - i), dtype=float)
                mn = float(np.linalg.norm(mt))
                if not np.isfinite(mn) or np.linalg.norm(mean + mt) > cap:
                    mean_status = "diverged"
                    mnorms.append(float("inf"))
                else:
                    mean = mean + mt
                    mnorms.append(mn)
            if np.linalg.norm(cov) > cap:
                status, reason = "diverged", "cap exceeded"
                break
            n_done = i + 1
            if n_done >= max(min_terms, _FIT_WINDOW):
                scale = eps * max(np.linalg.norm(cov), np.finfo(float).tiny)
                cov_small = max(norms[-_FIT_WINDOW:]) <= scale
                m_small = (
                    mean_seq is None
                    or mean_status is not None
                    or max(mnorms[-_FIT_WINDOW:]) <= eps * max(np.linalg.norm(mean), np.finfo(float).tiny)
                )
                if cov_small and m_small:
                    break
            pw = phi @ pw
    rate, tail = _tail(norms)
    ran_full = len(norms) >= horizon
    if status is None:
        if tail <= tol:
            status = "converged"
        elif ran_full and np.mean(norms[-max(1, horizon // 4):]) > tol:
            status = "diverged"
            reason = "series term norm non-decaying"
        else:
            status = "undetermined"
            reason = "tail bound %.3g above tol" % tail
    if mean_seq is None:
        mean_status, mtail = "converged", 0.0
    elif mean_status is None:
        _, mtail = _tail(mnorms)
        mean_status = "converged" if mtail <= tol else "undetermined"
    else:
        mtail = float("inf")
    return SeriesResult(
        value=_frozen(0.5 * (cov + cov.T)),
        mean=_frozen(mean),
        status=status,
        terms_used=len(norms),
        tail_bound=float(tail),
        term_norm_trace=tuple(norms),
        reason=reason,
        mean_status=mean_status,
        mean_tail_bound=float(mtail),
        rate=float(rate),
    )


def lyapunov_fixed_point(map: LinearMap, a, tol: float = DEFAULT_SPLIT_TOL) -> np.ndarray:
    """Solve B = A + phi B phi^T directly as a d^2 x d^2 linear system.

    When phi is not stable the system is solved on the contraction subspace,
    which requires A to be supported there.
    """
    a = np.asarray(a, dtype=float)
    d = map.dim
    if a.shape != (d, d):
        raise InputError(f"A must be {d}x{d}")
    phi = np.asarray(map.entries)
    if map.spectral_radius < 1:
        basis, phi_c = np.eye(d), phi
    else:
        try:
            split = contraction_split(map, tol)
        except SpectralGapError as exc:
            raise NoFixedPointError(f"spectral radius >= 1: {exc}") from exc
        basis = np.asarray(split.contraction_basis)
        leak = a - basis @ (basis.T @ a @ basis) @ basis.T
        if np.linalg.norm(leak) > tol * (1 + np.linalg.norm(a)):
            raise NoFixedPointError(
                "no stationary fixed point: spectral radius %.6g >= 1 and A is not "
                "supported on the contraction subspace" % map.spectral_radius
            )
        phi_c = np.asarray(split.restricted) if split.c else np.zeros((0, 0))
        # restricted() is expressed in the Schur basis, which is basis itself
    c = basis.shape[1]
    if c == 0:
        return np.zeros((d, d))
    a_c = basis.T @ a @ basis
    lhs = np.eye(c * c) - np.kron(phi_c, phi_c)
    b_c = np.linalg.solve(lhs, a_c.reshape(-1)).reshape(c, c)
    b = basis @ b_c @ basis.T
    return 0.5 * (b + b.T)
