"""One-step noise laws on R^d and their algebra.

A law is one of a small tagged family of immutable objects. Closed forms are
used whenever a tag combination admits one (Gaussian and Dirac algebra);
everything else falls back to structural sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .errors import InputError
from .spectral import ContractionSplit, LinearMap, as_map

__all__ = [
    "NoiseModel",
    "Dirac",
    "Gaussian",
    "UniformBox",
    "Mixture",
    "Shifted",
    "Pushforward",
    "SampleCloud",
    "Convolution",
    "Reflected",
    "LogMomentReport",
    "CosetResult",
    "pushforward",
    "convolve",
    "reflect",
    "shift",
    "symmetrize",
    "normalize",
    "sample",
    "log_moment",
    "support_coset",
    "support_radius",
    "dirac_point",
    "is_gaussian_like",
    "to_dict",
    "from_dict",
    "models_equal",
]

MC_INFINITE_THRESHOLD = 1e6
COSET_TOL = 1e-8


def _vec(x, name="vector") -> np.ndarray:
    v = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if v.ndim != 1:
        raise InputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} must be finite")
    v.setflags(write=False)
    return v


def _mat(x, d, name="matrix") -> np.ndarray:
    m = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    if m.shape != (d, d):
        raise InputError(f"{name} must be {d}x{d}, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} must be finite")
    m.setflags(write=False)
    return m


class NoiseModel:
    """Base class; concrete laws are frozen dataclasses below."""

    tag: str = ""

    @property
    def dim(self) -> int:  # pragma: no cover - overridden
        raise NotImplementedError

    def expectation(self) -> np.ndarray:
        raise NotImplementedError

    def covariance(self) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{self.tag}({to_dict(self)})"


@dataclass(frozen=True, eq=False, repr=False)
class Dirac(NoiseModel):
    point: np.ndarray
    tag = "Dirac"

    def __post_init__(self):
        object.__setattr__(self, "point", _vec(self.point, "point"))

    @property
    def dim(self):
        return self.point.shape[0]

    def expectation(self):
        return np.array(self.point)

    def covariance(self):
        return np.zeros((self.dim, self.dim))


@dataclass(frozen=True, eq=False, repr=False)
class Gaussian(NoiseModel):
    mean: np.ndarray
    cov: np.ndarray
    tag = "Gaussian"

    def __post_init__(self):
        m = _vec(self.mean, "mean")
        c = _mat(self.cov, m.shape[0], "cov")
        if not np.allclose(c, c.T, rtol=0, atol=1e-12 * (1 + np.abs(c).max())):
            raise InputError("Gaussian cov must be symmetric")
        if np.linalg.eigvalsh(c).min() < -1e-10 * max(1.0, np.abs(c).max()):
            raise InputError("Gaussian cov must be positive semidefinite")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "cov", c)

    @property
    def dim(self):
        return self.mean.shape[0]

    def expectation(self):
        return np.array(self.mean)

    def covariance(self):
        return np.array(self.cov)

    def factor(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False, repr=False)
class UniformBox(NoiseModel):
    lo: np.ndarray
    hi: np.ndarray
    tag = "UniformBox"

    def __post_init__(self):
        lo, hi = _vec(self.lo, "lo"), _vec(self.hi, "hi")
        if lo.shape != hi.shape:
            raise InputError("lo and hi must have the same length")
        if np.any(lo > hi):
            raise InputError("UniformBox requires lo <= hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def expectation(self):
        return 0.5 * (self.lo + self.hi)

    def covariance(self):
        return np.diag((self.hi - self.lo) ** 2 / 12.0)


@dataclass(frozen=True, eq=False, repr=False)
class Mixture(NoiseModel):
    weights: np.ndarray
    components: tuple
    tag = "Mixture"

    def __post_init__(self):
        w = _vec(self.weights, "weights")
        comps = tuple(self.components)
        if len(comps) == 0 or len(comps) != w.shape[0]:
            raise InputError("Mixture needs one weight per component")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("Mixture weights must be nonnegative and sum to 1")
        if len({c.dim for c in comps}) != 1:
            raise InputError("Mixture components must share a dimension")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def dim(self):
        return self.components[0].dim

    def expectation(self):
        return sum(w * c.expectation() for w, c in zip(self.weights, self.components))

    def covariance(self):
        mu = self.expectation()
        out = np.zeros((self.dim, self.dim))
        for w, c in zip(self.weights, self.components):
            dm = c.expectation() - mu
            out += w * (c.covariance() + np.outer(dm, dm))
        return out


@dataclass(frozen=True, eq=False, repr=False)
class Shifted(NoiseModel):
    base: NoiseModel
    offset: np.ndarray
    tag = "Shifted"

    def __post_init__(self):
        off = _vec(self.offset, "offset")
        if off.shape[0] != self.base.dim:
            raise InputError("offset dimension mismatch")
        object.__setattr__(self, "offset", off)

    @property
    def dim(self):
        return self.base.dim

    def expectation(self):
        return self.base.expectation() + self.offset

    def covariance(self):
        return self.base.covariance()


@dataclass(frozen=True, eq=False, repr=False)
class Pushforward(NoiseModel):
    map: LinearMap
    base: NoiseModel
    tag = "Pushforward"

    def __post_init__(self):
        m = as_map(self.map)
        if m.dim != self.base.dim:
            raise InputError("pushforward dimension mismatch")
        object.__setattr__(self, "map", m)

    @property
    def dim(self):
        return self.base.dim

    def expectation(self):
        return self.map.entries @ self.base.expectation()

    def covariance(self):
        m = self.map.entries
        return m @ self.base.covariance() @ m.T


@dataclass(frozen=True, eq=False, repr=False)
class SampleCloud(NoiseModel):
    """Uniform empirical law on the rows of ``points``."""

    points: np.ndarray
    tag = "SampleCloud"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.ndim != 2 or p.shape[0] < 1:
            raise InputError("SampleCloud needs an n x d array with n >= 1")
        if not np.all(np.isfinite(p)):
            raise InputError("SampleCloud points must be finite")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def dim(self):
        return self.points.shape[1]

    def expectation(self):
        return self.points.mean(axis=0)

    def covariance(self):
        c = self.points - self.points.mean(axis=0)
        return c.T @ c / self.points.shape[0]


@dataclass(frozen=True, eq=False, repr=False)
class Convolution(NoiseModel):
    """Law of a sum of independent draws from ``parts``."""

    parts: tuple
    tag = "Convolution"

    def __post_init__(self):
        parts = tuple(self.parts)
        if len(parts) < 1 or len({p.dim for p in parts}) != 1:
            raise InputError("Convolution parts must be nonempty and share a dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    def expectation(self):
        return sum(p.expectation() for p in self.parts)

    def covariance(self):
        return sum(p.covariance() for p in self.parts)


@dataclass(frozen=True, eq=False, repr=False)
class Reflected(NoiseModel):
    """Image of ``base`` under v -> -v."""

    base: NoiseModel
    tag = "Reflected"

    @property
    def dim(self):
        return self.base.dim

    def expectation(self):
        return -self.base.expectation()

    def covariance(self):
        return self.base.covariance()


# --------------------------------------------------------------------------
# structural algebra


def dirac_point(model: NoiseModel) -> Optional[np.ndarray]:
    """The atom of a point mass, or None when the law is not (structurally) a point mass."""
    model = normalize(model)
    if isinstance(model, Dirac):
        return np.array(model.point)
    if isinstance(model, Gaussian) and not np.any(model.cov):
        return np.array(model.mean)
    if isinstance(model, UniformBox) and np.array_equal(model.lo, model.hi):
        return np.array(model.lo)
    if isinstance(model, SampleCloud) and np.all(model.points == model.points[0]):
        return np.array(model.points[0])
    if isinstance(model, Mixture):
        pts = [dirac_point(c) for c, w in zip(model.components, model.weights) if w > 0]
        if all(p is not None for p in pts) and all(np.array_equal(p, pts[0]) for p in pts):
            return pts[0]
    return None


def is_gaussian_like(model: NoiseModel) -> bool:
    """True for Gaussians and point masses (degenerate Gaussians) after normalization."""
    model = normalize(model)
    return isinstance(model, (Gaussian, Dirac)) or dirac_point(model) is not None


def _check_dims(a: NoiseModel, b: NoiseModel):
    if a.dim != b.dim:
        raise InputError(f"dimension mismatch: {a.dim} vs {b.dim}")


def shift(model: NoiseModel, v) -> NoiseModel:
    """model * delta_v."""
    v = _vec(v, "shift")
    if v.shape[0] != model.dim:
        raise InputError("shift dimension mismatch")
    if isinstance(model, Dirac):
        return Dirac(model.point + v)
    if isinstance(model, Gaussian):
        return Gaussian(model.mean + v, model.cov)
    if isinstance(model, UniformBox):
        return UniformBox(model.lo + v, model.hi + v)
    if isinstance(model, SampleCloud):
        return SampleCloud(model.points + v)
    if isinstance(model, Shifted):
        return shift(model.base, model.offset + v)
    if not np.any(v):
        return model
    return Shifted(model, v)


def pushforward(model: NoiseModel, map) -> NoiseModel:
    """Image law of ``model`` under the linear map."""
    m = as_map(map)
    if m.dim != model.dim:
        raise InputError(f"dimension mismatch: map {m.dim} vs model {model.dim}")
    a = m.entries
    if isinstance(model, Dirac):
        return Dirac(a @ model.point)
    if isinstance(model, Gaussian):
        c = a @ model.cov @ a.T
        return Gaussian(a @ model.mean, 0.5 * (c + c.T))
    if isinstance(model, SampleCloud):
        return SampleCloud(model.points @ a.T)
    if isinstance(model, UniformBox) and m.is_diagonal():
        s = np.diag(a)
        x, y = s * model.lo, s * model.hi
        return UniformBox(np.minimum(x, y), np.maximum(x, y))
    if isinstance(model, Mixture):
        return Mixture(model.weights, tuple(pushforward(c, m) for c in model.components))
    if isinstance(model, Shifted):
        return shift(pushforward(model.base, m), a @ model.offset)
    if isinstance(model, Convolution):
        return Convolution(tuple(pushforward(p, m) for p in model.parts))
    if isinstance(model, Reflected):
        return Reflected(pushforward(model.base, m))
    if isinstance(model, Pushforward):
        return pushforward(model.base, m.compose(model.map))
    if np.array_equal(a, np.eye(m.dim)):
        return model
    return Pushforward(m, model)


def convolve(a: NoiseModel, b: NoiseModel) -> NoiseModel:
    """Law of X + Y for independent X ~ a, Y ~ b."""
    _check_dims(a, b)
    pa, pb = dirac_point(a), dirac_point(b)
    if pa is not None:
        return shift(normalize(b), pa)
    if pb is not None:
        return shift(normalize(a), pb)
    if isinstance(a, Gaussian) and isinstance(b, Gaussian):
        return Gaussian(a.mean + b.mean, a.cov + b.cov)
    parts = []
    for x in (a, b):
        parts.extend(x.parts if isinstance(x, Convolution) else (x,))
    return Convolution(tuple(parts))


def reflect(model: NoiseModel) -> NoiseModel:
    if isinstance(model, Dirac):
        return Dirac(-model.point)
    if isinstance(model, Gaussian):
        return Gaussian(-model.mean, model.cov)
    if isinstance(model, UniformBox):
        return UniformBox(-model.hi, -model.lo)
    if isinstance(model, SampleCloud):
        return SampleCloud(-model.points)
    if isinstance(model, Mixture):
        return Mixture(model.weights, tuple(reflect(c) for c in model.components))
    if isinstance(model, Shifted):
        return shift(reflect(model.base), -model.offset)
    if isinstance(model, Pushforward):
        return Pushforward(model.map, reflect(model.base))
    if isinstance(model, Convolution):
        return Convolution(tuple(reflect(p) for p in model.parts))
    if isinstance(model, Reflected):
        return model.base
    raise InputError(f"cannot reflect {type(model).__name__}")


def symmetrize(model: NoiseModel) -> NoiseModel:
    """mu * reflected(mu): always symmetric about the origin."""
    return convolve(model, reflect(model))


def normalize(model: NoiseModel) -> NoiseModel:
    """Deterministic structural normal form (collapses nested shifts and maps)."""
    if isinstance(model, Shifted):
        return shift(normalize(model.base), model.offset)
    if isinstance(model, Pushforward):
        return pushforward(normalize(model.base), model.map)
    if isinstance(model, Reflected):
        return reflect(normalize(model.base))
    if isinstance(model, Mixture):
        return Mixture(model.weights, tuple(normalize(c) for c in model.components))
    if isinstance(model, Convolution):
        out = normalize(model.parts[0])
        for p in model.parts[1:]:
            out = convolve(out, normalize(p))
        return out
    return model


# --------------------------------------------------------------------------
# sampling


def _draw(model: NoiseModel, n: int, rng: np.random.Generator) -> np.ndarray:
    d = model.dim
    if isinstance(model, Dirac):
        return np.tile(model.point, (n, 1))
    if isinstance(model, Gaussian):
        z = rng.standard_normal((n, d))
        return model.mean + z @ model.factor().T
    if isinstance(model, UniformBox):
        return model.lo + (model.hi - model.lo) * rng.random((n, d))
    if isinstance(model, Mixture):
        idx = rng.choice(len(model.components), size=n, p=model.weights)
        out = np.empty((n, d))
        for j, comp in enumerate(model.components):
            mask = idx == j
            cnt = int(mask.sum())
            if cnt:
                out[mask] = _draw(comp, cnt, rng)
        return out
    if isinstance(model, Shifted):
        return _draw(model.base, n, rng) + model.offset
    if isinstance(model, Pushforward):
        return _draw(model.base, n, rng) @ model.map.entries.T
    if isinstance(model, SampleCloud):
        return model.points[rng.integers(0, model.points.shape[0], size=n)]
    if isinstance(model, Convolution):
        out = np.zeros((n, d))
        for p in model.parts:
            out += _draw(p, n, rng)
        return out
    if isinstance(model, Reflected):
        return -_draw(model.base, n, rng)
    raise InputError(f"cannot sample {type(model).__name__}")


def sample(model: NoiseModel, n: int, seed, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """n i.i.d. draws as an n x d array; deterministic in (model, n, seed)."""
    if n < 1:
        raise InputError("n must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    return _draw(model, int(n), rng)


# --------------------------------------------------------------------------
# logarithmic moment


@dataclass(frozen=True)
class LogMomentReport:
    """Estimate of E log(|V| + 1)."""

    value: float
    std_error: float
    method: str
    n_used: int
    seed: Optional[int]
    infinite: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method,
            "n_used": self.n_used,
            "seed": self.seed,
            "infinite": self.infinite,
        }


def _log1norm(x: np.ndarray) -> np.ndarray:
    return np.log1p(np.linalg.norm(x, axis=-1))


def _uniform_1d_log_moment(lo: float, hi: float) -> float:
    f = lambda t: math.log1p(abs(t))
    pts = [0.0] if lo < 0 < hi else None
    val, _ = integrate.quad(f, lo, hi, points=pts, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val / (hi - lo)


def _exact_log_moment(model: NoiseModel):
    """(value, method) when available without sampling, else None."""
    p = dirac_point(model)
    if p is not None:
        return math.log1p(float(np.linalg.norm(p))), "closed_form"
    if isinstance(model, SampleCloud):
        return float(np.mean(_log1norm(model.points))), "closed_form"
    if isinstance(model, UniformBox) and model.dim == 1:
        return _uniform_1d_log_moment(float(model.lo[0]), float(model.hi[0])), "quadrature"
    if isinstance(model, Mixture):
        vals = [_exact_log_moment(c) for c in model.components]
        if all(v is not None for v in vals):
            method = "quadrature" if any(v[1] == "quadrature" for v in vals) else "closed_form"
            return float(sum(w * v[0] for w, v in zip(model.weights, vals))), method
    return None


def log_moment(model: NoiseModel, n: int = 100_000, seed: int = 0) -> LogMomentReport:
    """E log(|V|+1): closed form or quadrature where possible, Monte Carlo otherwise."""
    model = normalize(model)
    exact = _exact_log_moment(model)
    if exact is not None:
        return LogMomentReport(exact[0], 0.0, exact[1], 0, None)
    if n < 1:
        raise InputError("n must be >= 1 for a Monte Carlo log moment")
    vals = _log1norm(sample(model, n, seed))
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return LogMomentReport(est, se, "monte_carlo", n, seed, infinite=est > MC_INFINITE_THRESHOLD)


# --------------------------------------------------------------------------
# support geometry


@dataclass(frozen=True, eq=False)
class CosetResult:
    in_coset: bool
    offset: np.ndarray
    certificate: str


def support_coset(model: NoiseModel, split: ContractionSplit, tol: float = COSET_TOL) -> CosetResult:
    """Decide whether the law lives on a single coset u + C(phi), u in the complement."""
    if split.dim != model.dim:
        raise InputError("split and model dimensions differ")
    q = split.complement_projector
    model = normalize(model)
    nan = np.full(model.dim, np.nan)
    if isinstance(model, Dirac):
        return CosetResult(True, q @ model.point, "point mass")
    if isinstance(model, Gaussian):
        leak = float(np.linalg.norm(q @ model.cov @ q.T, 2))
        if leak <= tol:
            return CosetResult(True, q @ model.mean, "covariance range inside C(phi)")
        return CosetResult(False, q @ model.mean, f"covariance leaks {leak:.3g} into the complement")
    if isinstance(model, UniformBox):
        axes = np.nonzero(model.hi > model.lo)[0]
        leak = max((float(np.linalg.norm(q[:, i])) for i in axes), default=0.0)
        if leak <= tol:
            return CosetResult(True, q @ model.lo, "all non-degenerate axes inside C(phi)")
        return CosetResult(False, q @ model.lo, f"box axis leaks {leak:.3g} into the complement")
    if isinstance(model, SampleCloud):
        comp = model.points @ q.T
        spread = float(np.max(np.linalg.norm(comp - comp[0], axis=1)))
        if spread <= tol:
            return CosetResult(True, comp.mean(axis=0), "all points share a complement component")
        return CosetResult(False, comp.mean(axis=0), f"complement components spread {spread:.3g}")
    if isinstance(model, Mixture):
        parts = [support_coset(c, split, tol) for c, w in zip(model.components, model.weights) if w > 0]
        if not all(p.in_coset for p in parts):
            return CosetResult(False, nan, "a mixture component is not coset-supported")
        offs = np.array([p.offset for p in parts])
        if np.max(np.linalg.norm(offs - offs[0], axis=1)) <= tol:
            return CosetResult(True, offs[0], "mixture components share an offset")
        return CosetResult(False, offs[0], "mixture components sit on different cosets")
    if isinstance(model, Shifted):
        r = support_coset(model.base, split, tol)
        return CosetResult(r.in_coset, r.offset + q @ model.offset, r.certificate)
    if isinstance(model, (Pushforward, Convolution, Reflected)):
        # the affine hull of the support of a finite-variance law is mean + range(cov)
        leak = float(np.linalg.norm(q @ model.covariance() @ q.T, 2))
        off = q @ model.expectation()
        if leak <= tol:
            return CosetResult(True, off, "second-moment affine hull inside a coset")
        return CosetResult(False, off, f"second moments leak {leak:.3g} into the complement")
    return CosetResult(False, nan, "unsupported structure")


def support_radius(model: NoiseModel) -> float:
    """sup |v| over the support; inf for unbounded laws."""
    model = normalize(model)
    p = dirac_point(model)
    if p is not None:
        return float(np.linalg.norm(p))
    if isinstance(model, Gaussian):
        return float("inf")
    if isinstance(model, UniformBox):
        corner = np.maximum(np.abs(model.lo), np.abs(model.hi))
        return float(np.linalg.norm(corner))
    if isinstance(model, SampleCloud):
        return float(np.max(np.linalg.norm(model.points, axis=1)))
    if isinstance(model, Mixture):
        return max(support_radius(c) for c, w in zip(model.components, model.weights) if w > 0)
    if isinstance(model, Shifted):
        return support_radius(model.base) + float(np.linalg.norm(model.offset))
    if isinstance(model, Pushforward):
        return model.map.norm * support_radius(model.base)
    if isinstance(model, Convolution):
        return float(sum(support_radius(p) for p in model.parts))
    if isinstance(model, Reflected):
        return support_radius(model.base)
    return float("inf")


# --------------------------------------------------------------------------
# serialization


def to_dict(model: NoiseModel) -> dict:
    if isinstance(model, Dirac):
        return {"tag": "Dirac", "point": model.point.tolist()}
    if isinstance(model, Gaussian):
        return {"tag": "Gaussian", "mean": model.mean.tolist(), "cov": model.cov.tolist()}
    if isinstance(model, UniformBox):
        return {"tag": "UniformBox", "lo": model.lo.tolist(), "hi": model.hi.tolist()}
    if isinstance(model, Mixture):
        return {
            "tag": "Mixture",
            "weights": model.weights.tolist(),
            "components": [to_dict(c) for c in model.components],
        }
    if isinstance(model, Shifted):
        return {"tag": "Shifted", "base": to_dict(model.base), "offset": model.offset.tolist()}
    if isinstance(model, Pushforward):
        return {"tag": "Pushforward", "map": model.map.entries.tolist(), "base": to_dict(model.base)}
    if isinstance(model, SampleCloud):
        return {"tag": "SampleCloud", "points": model.points.tolist()}
    if isinstance(model, Convolution):
        return {"tag": "Convolution", "parts": [to_dict(p) for p in model.parts]}
    if isinstance(model, Reflected):
        return {"tag": "Reflected", "base": to_dict(model.base)}
    raise InputError(f"cannot serialize {type(model).__name__}")


def from_dict(data: dict) -> NoiseModel:
    try:
        tag = data["tag"]
        if tag == "Dirac":
            return Dirac(data["point"])
        if tag == "Gaussian":
            return Gaussian(data["mean"], data["cov"])
        if tag == "UniformBox":
            return UniformBox(data["lo"], data["hi"])
        if tag == "Mixture":
            return Mixture(data["weights"], tuple(from_dict(c) for c in data["components"]))
        if tag == "Shifted":
            return Shifted(from_dict(data["base"]), data["offset"])
        if tag == "Pushforward":
            return Pushforward(LinearMap(np.asarray(data["map"], dtype=float)), from_dict(data["base"]))
        if tag == "SampleCloud":
            return SampleCloud(np.asarray(data["points"], dtype=float))
        if tag == "Convolution":
            return Convolution(tuple(from_dict(p) for p in data["parts"]))
        if tag == "Reflected":
            return Reflected(from_dict(data["base"]))
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed noise model {data!r}: {exc}") from exc
    raise InputError(f"unknown noise model tag {data.get('tag')!r}")


def models_equal(a: NoiseModel, b: NoiseModel) -> bool:
    return to_dict(a) == to_dict(b)


def mixture(pairs: Sequence[tuple]) -> Mixture:
    """Build a mixture from (weight, model) pairs."""
    return Mixture([w for w, _ in pairs], tuple(m for _, m in pairs))
