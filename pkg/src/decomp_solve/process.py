"""Bi-infinite noise processes, l_p-path checks and the deterministic shift recursion.

A process is an explicit window of laws plus an analytic tail rule, so every
check that needs to control infinitely many indices can do so in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg
from scipy import integrate, stats

from . import measures as ms
from .errors import HypothesisError, InputError, PreconditionError
from .measures import Dirac, Gaussian, Mixture, NoiseModel, UniformBox
from .spectral import LinearMap, as_map, fit_geometric_rate

__all__ = [
    "Stationary",
    "PushforwardPower",
    "DecayMixtureFamily",
    "ZeroTail",
    "NoiseProcess",
    "ThreeSeriesReport",
    "MpReport",
    "ShiftSequence",
    "LpShiftResult",
    "model_at",
    "lp_path_check",
    "mp_log_moment",
    "solve_shift_recursion",
    "lp_shift_solvable",
    "shift_operator_matrix",
    "DEFAULT_MP_LEVELS",
]

DEFAULT_MP_LEVELS = (5, 10, 20, 40)


# --------------------------------------------------------------------------
# tail rules


@dataclass(frozen=True, eq=False)
class Stationary:
    """mu_k = model for every k outside the window."""

    model: NoiseModel
    tag = "Stationary"

    def model_at(self, k: int, dim: int) -> NoiseModel:
        return self.model


@dataclass(frozen=True, eq=False)
class PushforwardPower:
    """mu_k = psi^k(base); negative k uses the inverse of psi."""

    base: NoiseModel
    map: LinearMap
    tag = "PushforwardPower"

    def __post_init__(self):
        m = as_map(self.map, self.base.dim)
        if not m.invertible:
            raise InputError("PushforwardPower needs an invertible map")
        object.__setattr__(self, "map", m)

    def model_at(self, k: int, dim: int) -> NoiseModel:
        return ms.pushforward(self.base, LinearMap(self.map.power(k)))


@dataclass(frozen=True, eq=False)
class DecayMixtureFamily:
    """One-dimensional family mixing a shrinking uniform with a far-away uniform.

    For n >= 1: mu_n = (1 - a^n) U[0, a^n] + a^n U[n, n+1], mirrored for
    negative n, and mu_0 is the point mass at 0.
    """

    a: float
    tag = "DecayMixtureFamily"

    def __post_init__(self):
        if not 0.0 < float(self.a) < 1.0:
            raise InputError("DecayMixtureFamily needs a in (0, 1)")
        object.__setattr__(self, "a", float(self.a))

    def model_at(self, k: int, dim: int) -> NoiseModel:
        if dim != 1:
            raise InputError("DecayMixtureFamily is one-dimensional")
        if k == 0:
            return Dirac([0.0])
        m = abs(k)
        w = self.a ** m
        if k > 0:
            near, far = UniformBox([0.0], [w]), UniformBox([float(m)], [m + 1.0])
        else:
            near, far = UniformBox([-w], [0.0]), UniformBox([-m - 1.0], [-float(m)])
        return Mixture([1.0 - w, w], (near, far))


@dataclass(frozen=True, eq=False)
class ZeroTail:
    """mu_k = point mass at 0 outside the window."""

    tag = "ZeroTail"

    def model_at(self, k: int, dim: int) -> NoiseModel:
        return Dirac(np.zeros(dim))


TailRule = Union[Stationary, PushforwardPower, DecayMixtureFamily, ZeroTail]


@dataclass(frozen=True, eq=False)
class NoiseProcess:
    dim: int
    window: Mapping[int, NoiseModel] = field(default_factory=dict)
    tail_rule: TailRule = field(default_factory=ZeroTail)

    def __post_init__(self):
        d = int(self.dim)
        if d < 1:
            raise InputError("dim must be >= 1")
        win = {int(k): v for k, v in sorted(dict(self.window).items())}
        for k, v in win.items():
            if v.dim != d:
                raise InputError(f"window entry k={k} has dimension {v.dim}, expected {d}")
        t = self.tail_rule
        if isinstance(t, Stationary) and t.model.dim != d:
            raise InputError("stationary tail model has the wrong dimension")
        if isinstance(t, PushforwardPower) and t.base.dim != d:
            raise InputError("PushforwardPower base has the wrong dimension")
        if isinstance(t, DecayMixtureFamily) and d != 1:
            raise InputError("DecayMixtureFamily is one-dimensional")
        object.__setattr__(self, "dim", d)
        object.__setattr__(self, "window", MappingProxyType(win))

    @classmethod
    def stationary(cls, model: NoiseModel) -> "NoiseProcess":
        return cls(model.dim, {}, Stationary(model))

    @property
    def window_range(self) -> Optional[tuple]:
        if not self.window:
            return None
        ks = list(self.window)
        return min(ks), max(ks)

    def model_at(self, k: int) -> NoiseModel:
        return model_at(self, k)

    def mean_at(self, k: int) -> np.ndarray:
        return self.model_at(k).expectation()

    def cov_at(self, k: int) -> np.ndarray:
        return self.model_at(k).covariance()

    # ---- structural predicates certified for all k in Z

    def stationary_model(self) -> Optional[NoiseModel]:
        """The common law when every mu_k coincides, else None."""
        t = self.tail_rule
        if isinstance(t, Stationary):
            if all(ms.models_equal(v, t.model) for v in self.window.values()):
                return t.model
            return None
        if isinstance(t, ZeroTail):
            zero = Dirac(np.zeros(self.dim))
            if all(ms.models_equal(ms.normalize(v), zero) for v in self.window.values()):
                return zero
        return None

    def _tail_models(self) -> Optional[list]:
        """Representative tail laws whose structure covers every tail index."""
        t = self.tail_rule
        if isinstance(t, Stationary):
            return [t.model]
        if isinstance(t, ZeroTail):
            return [Dirac(np.zeros(self.dim))]
        if isinstance(t, PushforwardPower):
            return [t.base]
        return None

    def all_dirac(self) -> bool:
        tails = self._tail_models()
        if tails is None:
            return False
        return all(ms.dirac_point(m) is not None for m in list(self.window.values()) + tails)

    def all_gaussian(self) -> bool:
        tails = self._tail_models()
        if tails is None:
            return False
        return all(ms.is_gaussian_like(m) for m in list(self.window.values()) + tails)

    def support_radius_bound(self) -> float:
        """sup_k sup |v| over supp(mu_k); inf when not certifiably bounded."""
        t = self.tail_rule
        rads = [ms.support_radius(m) for m in self.window.values()]
        if isinstance(t, Stationary):
            rads.append(ms.support_radius(t.model))
        elif isinstance(t, ZeroTail):
            rads.append(0.0)
        elif isinstance(t, PushforwardPower):
            r0 = ms.support_radius(t.base)
            rads.append(0.0 if r0 == 0.0 else float("inf"))
        else:
            rads.append(float("inf"))
        return max(rads)


def model_at(process: NoiseProcess, k: int) -> NoiseModel:
    k = int(k)
    if k in process.window:
        return process.window[k]
    return process.tail_rule.model_at(k, process.dim)


# --------------------------------------------------------------------------
# three-series check


def _abs_power_integral(lo: float, hi: float, q: float) -> float:
    """Integral of |t|^q over [lo, hi]."""
    g = lambda t: math.copysign(abs(t) ** (q + 1) / (q + 1), t)
    return g(hi) - g(lo)


def _power_moments(model: NoiseModel, p: float, seed: int, n_mc: int) -> tuple:
    """(P(Y>1), E[Y; Y<=1], E[Y^2; Y<=1], exact) for Y = |X|^p."""
    model = ms.normalize(model)
    pt = ms.dirac_point(model)
    if pt is not None:
        y = float(np.linalg.norm(pt)) ** p
        return (1.0, 0.0, 0.0, True) if y > 1 else (0.0, y, y * y, True)
    if isinstance(model, UniformBox) and model.dim == 1:
        lo, hi = float(model.lo[0]), float(model.hi[0])
        length = hi - lo
        a, b = max(lo, -1.0), min(hi, 1.0)
        inside = max(b - a, 0.0)
        if inside > 0:
            e1 = _abs_power_integral(a, b, p) / length
            e2 = _abs_power_integral(a, b, 2 * p) / length
        else:
            e1 = e2 = 0.0
        return (length - inside) / length, e1, e2, True
    if isinstance(model, Gaussian) and model.dim == 1:
        m, s = float(model.mean[0]), math.sqrt(float(model.cov[0, 0]))
        dist = stats.norm(m, s)
        prob = float(dist.sf(1.0) + dist.cdf(-1.0))
        f1 = lambda t: abs(t) ** p * dist.pdf(t)
        f2 = lambda t: abs(t) ** (2 * p) * dist.pdf(t)
        e1 = integrate.quad(f1, -1, 1, points=[0.0], epsabs=1e-14)[0]
        e2 = integrate.quad(f2, -1, 1, points=[0.0], epsabs=1e-14)[0]
        return prob, e1, e2, True
    if isinstance(model, Mixture):
        parts = [_power_moments(c, p, seed, n_mc) for c in model.components]
        w = model.weights
        return (
            float(sum(wi * r[0] for wi, r in zip(w, parts))),
            float(sum(wi * r[1] for wi, r in zip(w, parts))),
            float(sum(wi * r[2] for wi, r in zip(w, parts))),
            all(r[3] for r in parts),
        )
    y = np.linalg.norm(ms.sample(model, n_mc, seed), axis=1) ** p
    inside = np.where(y <= 1, y, 0.0)
    return float(np.mean(y > 1)), float(inside.mean()), float((inside**2).mean()), False


@dataclass(frozen=True)
class ThreeSeriesReport:
    """Kolmogorov three-series evidence for Y_n = |X_n|^p.

    s1, s2, s3 are partial sums over the computed range of P(Y>1),
    E[Y; Y<=1] and Var(Y 1{Y<=1}); the tails are analytic upper bounds for
    the indices beyond it (inf when certified divergent, nan when unknown).
    """

    p: float
    s1: float
    s2: float
    s3: float
    tail1: float
    tail2: float
    tail3: float
    verdict: str
    horizon: int
    reason: str
    exact: bool
    s1_tail_exact: bool = False

    @property
    def s1_total(self) -> float:
        return self.s1 + self.tail1

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "s1": self.s1,
            "s2": self.s2,
            "s3": self.s3,
            "tail1": self.tail1,
            "tail2": self.tail2,
            "tail3": self.tail3,
            "s1_total": self.s1_total,
            "verdict": self.verdict,
            "horizon": self.horizon,
            "reason": self.reason,
            "exact": self.exact,
        }


def _index_range(process: NoiseProcess, horizon: int) -> range:
    lo, hi = -horizon, horizon
    if process.window:
        wl, wh = process.window_range
        lo, hi = min(lo, wl), max(hi, wh)
    return range(lo, hi + 1)


def _tail_three_series(process: NoiseProcess, p: float, lo: int, hi: int, seed: int, n_mc: int):
    """(tails, verdict_hint, reason, s1_exact) for indices k < lo or k > hi."""
    t = process.tail_rule
    nan = float("nan")
    if isinstance(t, ZeroTail):
        return (0.0, 0.0, 0.0), "yes", "finitely many nonzero terms", True
    if isinstance(t, Stationary):
        r = _power_moments(t.model, p, seed, n_mc)
        if r[0] == 0.0 and r[1] == 0.0:
            return (0.0, 0.0, 0.0), "yes", "stationary point mass at 0", True
        inf = float("inf")
        return (inf, inf, inf), "no", "identical nonzero terms; s1 or s2 diverges linearly", True
    if isinstance(t, DecayMixtureFamily):
        a = t.a
        h = min(-lo, hi)
        t1 = 2 * a ** (h + 1) / (1 - a)
        t2 = 2 * a ** ((h + 1) * p) / ((p + 1) * (1 - a**p))
        t3 = 2 * a ** (2 * (h + 1) * p) / ((2 * p + 1) * (1 - a ** (2 * p)))
        return (t1, t2, t3), "yes", "geometric tail bounds of the decay-mixture family", True
    if isinstance(t, PushforwardPower):
        if ms.dirac_point(t.base) is not None and not np.any(ms.dirac_point(t.base)):
            return (0.0, 0.0, 0.0), "yes", "pushed point mass at 0", True
        mods = np.abs(t.map.eigenvalues)
        if np.all(mods < 1) or np.all(mods > 1):
            inf = float("inf")
            return (
                (inf, inf, inf),
                "no",
                "pushforward powers expand every direction on one side; P(|X_k|>1) stays bounded below",
                True,
            )
        return (nan, nan, nan), "undetermined", "mixed spectrum: tail not certifiable", False
    return (nan, nan, nan), "undetermined", "no analytic tail control", False


def lp_path_check(process: NoiseProcess, p: float, horizon: int = 1000, seed: int = 0, n_mc: int = 20_000) -> ThreeSeriesReport:
    """Decide whether independent draws X_k ~ mu_k have sum |X_k|^p < inf a.s."""
    if not 1.0 <= p < math.inf:
        raise InputError("p must lie in [1, inf)")
    if horizon < 1:
        raise InputError("horizon must be >= 1")
    ks = _index_range(process, horizon)
    s1 = s2 = s3 = 0.0
    exact = True
    ss = np.random.SeedSequence(seed)
    for k in ks:
        kseed = int(ss.generate_state(1)[0]) ^ (k & 0xFFFFFFFF)
        pr, e1, e2, ex = _power_moments(model_at(process, k), p, kseed, n_mc)
        s1 += pr
        s2 += e1
        s3 += max(e2 - e1 * e1, 0.0)
        exact = exact and ex
    tails, hint, reason, s1_exact = _tail_three_series(process, p, ks.start, ks.stop - 1, seed, n_mc)
    return ThreeSeriesReport(
        p=float(p),
        s1=s1,
        s2=s2,
        s3=s3,
        tail1=tails[0],
        tail2=tails[1],
        tail3=tails[2],
        verdict={"yes": "lp_paths_yes", "no": "lp_paths_no"}.get(hint, "undetermined"),
        horizon=int(horizon),
        reason=reason,
        exact=exact,
        s1_tail_exact=s1_exact and isinstance(process.tail_rule, (DecayMixtureFamily, ZeroTail)),
    )


def log_moment_tail_bound(process: NoiseProcess, lo: int, hi: int) -> float:
    """Upper bound on sum of E log(|X_k|+1) over k < lo and k > hi (inf if unknown)."""
    t = process.tail_rule
    if isinstance(t, ZeroTail):
        return 0.0
    if isinstance(t, Stationary):
        pt = ms.dirac_point(t.model)
        return 0.0 if pt is not None and not np.any(pt) else float("inf")
    if isinstance(t, DecayMixtureFamily):
        # E log(|X|+1) <= a^m + a^m log(m+2) for |k| = m
        a, h = t.a, min(-lo, hi)
        total, m = 0.0, h + 1
        while True:
            term = 2 * a**m * (1 + math.log(m + 2))
            total += term
            if term < 1e-18 * max(total, 1e-300):
                break
            m += 1
        # remaining sum is bounded by the geometric majorant of the last term
        return total + term * a / (1 - a) * 2
    return float("inf")


# --------------------------------------------------------------------------
# logarithmic moment of the whole path


@dataclass(frozen=True)
class MpReport:
    """Level-n estimates of E log(|(v_{-n},...,v_n)|_p + 1) and their extrapolation."""

    value: float
    std_error: float
    method: str
    n_used: int
    seed: int
    levels: tuple
    estimates: tuple
    std_errors: tuple
    increments: tuple
    stabilized: bool
    subadditive_bound: float
    infinite: bool = False

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _level_estimate(process: NoiseProcess, p: float, n: int, samples: int, rng: np.random.Generator):
    models = [model_at(process, k) for k in range(-n, n + 1)]
    pts = [ms.dirac_point(m) for m in models]
    random = [m for m, pt in zip(models, pts) if pt is None]
    fixed = [pt for pt in pts if pt is not None]
    fixed_sum = float(sum(np.linalg.norm(x) ** p for x in fixed))
    if not random:
        return math.log1p(fixed_sum ** (1 / p)), 0.0, "closed_form"
    if len(random) == 1 and fixed_sum == 0.0:
        r = ms.log_moment(random[0], samples, int(rng.integers(2**31)))
        return r.value, r.std_error, r.method
    acc = np.full(samples, fixed_sum)
    for m in random:
        acc += np.linalg.norm(ms.sample(m, samples, None, rng=rng), axis=1) ** p
    vals = np.log1p(acc ** (1 / p))
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), "monte_carlo"


def mp_log_moment(
    process: NoiseProcess,
    p: float,
    n_levels: int = 4,
    samples: int = 20_000,
    seed: int = 0,
    levels: Optional[Sequence[int]] = None,
    horizon: int = 1000,
) -> MpReport:
    """Estimate the path log-moment M_p at truncation levels 5, 10, 20, 40, ...

    Stabilization rule: the last increment between levels lies within three
    combined standard errors.
    """
    if n_levels < 2:
        raise InputError("n_levels must be >= 2")
    check = lp_path_check(process, p, horizon)
    if check.verdict == "lp_paths_no":
        raise PreconditionError(f"process fails the l_{p:g} path check: {check.reason}")
    if levels is None:
        levels = [DEFAULT_MP_LEVELS[0] * 2**j for j in range(n_levels)]
    levels = tuple(int(n) for n in levels)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(levels))]
    est, ses, methods = [], [], []
    for n, rng in zip(levels, rngs):
        v, se, meth = _level_estimate(process, p, n, samples, rng)
        est.append(v)
        ses.append(se)
        methods.append(meth)
    incs = tuple(est[j] - est[j - 1] for j in range(1, len(est)))
    comb = math.hypot(ses[-1], ses[-2])
    stabilized = abs(incs[-1]) <= max(3 * comb, 1e-12)
    sub = sum(ms.log_moment(model_at(process, k), samples, seed).value for k in range(-levels[-1], levels[-1] + 1))
    if "monte_carlo" in methods:
        method = "monte_carlo"
    elif "quadrature" in methods:
        method = "quadrature"
    else:
        method = "closed_form"
    return MpReport(
        value=est[-1],
        std_error=ses[-1],
        method=method,
        n_used=samples if method != "closed_form" else 0,
        seed=seed,
        levels=levels,
        estimates=tuple(est),
        std_errors=tuple(ses),
        increments=incs,
        stabilized=bool(stabilized),
        subadditive_bound=float(sub),
        infinite=est[-1] > ms.MC_INFINITE_THRESHOLD,
    )


# --------------------------------------------------------------------------
# deterministic shift recursion y_k = x_k + phi(y_{k-1})


@dataclass(frozen=True, eq=False)
class ShiftSequence:
    k_min: int
    values: np.ndarray
    anchor: np.ndarray
    anchor_index: int = 0
    status: str = "exact"
    max_residual: float = 0.0

    @property
    def k_max(self) -> int:
        return self.k_min + self.values.shape[0] - 1

    def at(self, k: int) -> np.ndarray:
        if not self.k_min <= k <= self.k_max:
            raise InputError(f"k={k} outside [{self.k_min}, {self.k_max}]")
        return self.values[k - self.k_min]

    def as_dict(self) -> dict:
        return {k: self.at(k) for k in range(self.k_min, self.k_max + 1)}


def _as_sequence(x, dim: int) -> Callable[[int], np.ndarray]:
    if callable(x):
        return lambda k: np.asarray(x(k), dtype=float).reshape(dim)
    if isinstance(x, Mapping):
        zero = np.zeros(dim)
        return lambda k: np.asarray(x.get(k, zero), dtype=float).reshape(dim)
    raise InputError("x must be a callable k -> vector or a mapping")


def solve_shift_recursion(x, map: LinearMap, anchor_y0, k_min: int, k_max: int, anchor_index: int = 0) -> ShiftSequence:
    """Solve y_k = x_k + phi(y_{k-1}) on [k_min, k_max] with y_{anchor_index} given.

    Forward steps apply phi; backward steps solve against phi, so the map
    must be invertible.
    """
    map = as_map(map)
    if not map.invertible:
        raise HypothesisError("the shift recursion needs an invertible map (backward steps use its inverse)")
    if k_min > k_max:
        raise InputError("k_min must not exceed k_max")
    d = map.dim
    xs = _as_sequence(x, d)
    y0 = np.asarray(anchor_y0, dtype=float).reshape(d)
    lo, hi = min(k_min, anchor_index), max(k_max, anchor_index)
    out = np.empty((hi - lo + 1, d))
    phi = np.asarray(map.entries)
    out[anchor_index - lo] = y0
    for k in range(anchor_index + 1, hi + 1):
        out[k - lo] = xs(k) + phi @ out[k - 1 - lo]
    lu = scipy.linalg.lu_factor(phi)
    for k in range(anchor_index, lo, -1):
        out[k - 1 - lo] = scipy.linalg.lu_solve(lu, out[k - lo] - xs(k))
    res = 0.0
    for k in range(lo + 1, hi + 1):
        r = np.linalg.norm(out[k - lo] - xs(k) - phi @ out[k - 1 - lo])
        res = max(res, r / (1 + np.linalg.norm(out[k - lo])))
    vals = out[k_min - lo : k_max - lo + 1].copy()
    vals.setflags(write=False)
    return ShiftSequence(k_min, vals, y0, anchor_index, "exact", float(res))


# --------------------------------------------------------------------------
# l_p solvability of y = x + tau(y) for x_k = b^{-|k|} u


@dataclass(frozen=True, eq=False)
class LpShiftResult:
    verdict: str
    partial_sums: np.ndarray
    reason: str
    y_window: Optional[dict] = None
    lp_norm: float = float("nan")


def _forced_value(phi: np.ndarray, x: Callable[[int], np.ndarray], k: int, horizon: int, cap: float, tol: float, min_terms: int):
    """Partial sums of sum_i phi^i x_{k-i}; returns (sums, status)."""
    d = phi.shape[0]
    pw = np.eye(d)
    s = np.zeros(d)
    sums, incs = [], []
    eps = np.finfo(float).eps
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(horizon):
            inc = pw @ x(k - i)
            s = s + inc
            sums.append(s.copy())
            incs.append(float(np.linalg.norm(inc)))
            if not np.all(np.isfinite(s)) or np.linalg.norm(s) > cap:
                grow = len(incs) < 3 or incs[-1] >= incs[-3]
                return np.array(sums), ("divergent" if grow else "undetermined"), "partial sums exceed cap"
            if i + 1 >= max(20, min_terms) and max(incs[-20:]) <= eps * max(np.linalg.norm(s), 1e-300):
                break
            pw = phi @ pw
    r = fit_geometric_rate(incs[-20:])
    if max(incs[-20:]) == 0.0:
        return np.array(sums), "converged", "terms vanish"
    tail = incs[-1] * r / (1 - r) if np.isfinite(r) and r < 1 else float("inf")
    if tail <= tol * max(1.0, np.linalg.norm(s)):
        return np.array(sums), "converged", f"geometric ratio {r:.6g}"
    if len(incs) >= horizon and np.mean(incs[-max(1, horizon // 4):]) > tol:
        return np.array(sums), "divergent", "increments do not decay"
    return np.array(sums), "undetermined", "slow convergence"


def lp_shift_solvable(
    u,
    b: float,
    map: LinearMap,
    p: float = 2.0,
    horizon: int = 1000,
    cap: float = 1e12,
    tol: float = 1e-12,
    half_window: int = 60,
) -> LpShiftResult:
    """Test whether y = x + tau(y) has an l_p solution for x_k = b^{-|k|} u.

    An l_p solution must equal y_k = sum_{i>=0} phi^i x_{k-i}; the forced
    value at k = 0 is summed first, then the full sequence is checked for
    geometric decay on both ends of a window.
    """
    map = as_map(map)
    d = map.dim
    u = np.asarray(u, dtype=float).reshape(d)
    if not b > 1:
        raise InputError("b must exceed 1")
    if horizon < 10:
        raise InputError("horizon must be >= 10")
    if not np.any(u):
        return LpShiftResult("solvable", np.zeros((1, d)), "zero input: y = 0", {0: np.zeros(d)}, 0.0)
    phi = np.asarray(map.entries)
    x = lambda k: b ** (-abs(k)) * u
    sums, status, reason = _forced_value(phi, x, 0, horizon, cap, tol, 0)
    if status != "converged":
        return LpShiftResult("divergent" if status == "divergent" else "undetermined", sums, reason)
    ys = {}
    for k in range(-half_window, half_window + 1):
        s, st, _ = _forced_value(phi, x, k, horizon + abs(k), cap, tol, abs(k) + 20)
        if st != "converged":
            return LpShiftResult("undetermined", sums, f"forced value at k={k} not converged")
        ys[k] = s[-1]
    norms = np.array([np.linalg.norm(ys[k]) for k in range(-half_window, half_window + 1)])
    right = fit_geometric_rate(norms[-20:])
    left = fit_geometric_rate(norms[:20][::-1])
    if not (np.isfinite(right) and np.isfinite(left) and right < 1 and left < 1):
        return LpShiftResult("undetermined", sums, "induced sequence does not decay geometrically", ys)
    tail = norms[-1] ** p * right**p / (1 - right**p) + norms[0] ** p * left**p / (1 - left**p)
    lp = float((np.sum(norms**p) + tail) ** (1 / p))
    return LpShiftResult("solvable", sums, f"geometric decay with ratios {left:.4g}, {right:.4g}", ys, lp)


def shift_operator_matrix(map: LinearMap, length: int) -> np.ndarray:
    """Weighted shift v_i -> phi(v_{i-1}) on ``length`` consecutive copies of R^d."""
    map = as_map(map)
    if length < 1:
        raise InputError("length must be >= 1")
    d = map.dim
    out = np.zeros((length * d, length * d))
    for i in range(1, length):
        out[i * d : (i + 1) * d, (i - 1) * d : i * d] = map.entries
    return out
