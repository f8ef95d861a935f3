"""Existence analysis, fundamental solutions, their shift family, and verification.

Routes are tried in a fixed order (stationary, series, l_p, empirical); the
first route that certifies a verdict wins and every attempted route leaves an
evidence record. Heuristic evidence never becomes a theorem-level verdict:
the empirical route can only report "undetermined".
"""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import measures as ms
from .errors import ConsistencyError, HypothesisError, InputError, NoSolutionError, SpectralGapError
from .mc import (
    DiracRepr,
    EmpiricalRepr,
    GaussianRepr,
    backward_partial_sample,
    derive_rng,
    energy_distance_test,
)
from .process import (
    DecayMixtureFamily,
    NoiseProcess,
    PushforwardPower,
    Stationary,
    ZeroTail,
    log_moment_tail_bound,
    lp_path_check,
    model_at,
    mp_log_moment,
    solve_shift_recursion,
)
from .spectral import ContractionSplit, LinearMap, as_map, contraction_split, covariance_series, fit_geometric_rate

__all__ = [
    "SolverOptions",
    "ExistenceReport",
    "SolutionFamily",
    "ResidualRecord",
    "VerificationReport",
    "DecayReport",
    "analyze_existence",
    "solve_fundamental",
    "extremal_family",
    "verify_solution",
    "strong_decomposability_check",
]

ROUTES = ("stationary_thm", "gaussian_series", "lp_paths_thm", "dirac_exact", "mc_empirical")


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    split_tol: float = 1e-8
    coset_tol: float = 1e-8
    horizon: int = 1000
    cap: float = 1e12
    p: float = 2.0
    samples: int = 10_000
    seed: int = 0
    permutations: int = 500
    alpha: float = 0.01
    residual_tol: float = 1e-9
    max_test_samples: int = 5000
    n_truncation: Optional[int] = None
    force: bool = False
    empirical_route: bool = True

    def tolerances(self) -> dict:
        return {
            "tol": self.tol,
            "split_tol": self.split_tol,
            "coset_tol": self.coset_tol,
            "cap": self.cap,
            "residual_tol": self.residual_tol,
            "alpha": self.alpha,
        }


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _ev(name: str, value, verdict: str) -> dict:
    return {"name": name, "value": _jsonable(value), "verdict": verdict}


@dataclass
class ExistenceReport:
    status: str
    route: Optional[str]
    evidence: list
    routes_attempted: list
    horizon: int
    tolerances: dict
    coset_offset: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "route": self.route,
            "evidence": self.evidence,
            "routes_attempted": list(self.routes_attempted),
            "horizon": self.horizon,
            "tolerances": self.tolerances,
            "coset_offset": None if self.coset_offset is None else self.coset_offset.tolist(),
        }


# --------------------------------------------------------------------------
# existence


def _require_invertible(map: LinearMap):
    if not map.invertible:
        raise HypothesisError(
            "the existence theorems assume an invertible linear map "
            f"(condition number {map.condition:.3g})"
        )


def _is_point_at_zero(model: ms.NoiseModel) -> bool:
    pt = ms.dirac_point(model)
    return pt is not None and not np.any(pt)


def _series_divergence_certified(process: NoiseProcess, map: LinearMap) -> Optional[str]:
    """Why a divergent second-moment series proves non-existence, or None."""
    if process.all_gaussian():
        return "Gaussian noise: the covariance series criterion is necessary"
    t = process.tail_rule
    if isinstance(t, PushforwardPower) and t.map.same_as(map, atol=1e-12) and ms.dirac_point(t.base) is None:
        return (
            "noise is the map's own pushforward of a non-degenerate law: every pushed term "
            "phi^i(mu_{k-i}) is the same law, so partial products cannot be shift-tight"
        )
    return None


def _as_fraction(x: float) -> str:
    f = Fraction(x).limit_denominator(1000)
    if f.denominator > 1 and abs(float(f) - x) <= 1e-9 * max(abs(x), 1.0):
        return f"{f.numerator}/{f.denominator}"
    return f"{x:.6g}"


def _series_evidence(res, name: str) -> dict:
    trace = np.asarray(res.term_norm_trace)
    last = float(trace[-1]) if trace.size else 0.0
    verdict = res.status
    if res.status == "diverged":
        q = trace[-max(1, trace.size // 4):]
        if q.size and np.all(np.isfinite(q)) and q.max() - q.min() <= 1e-9 * max(q.max(), 1e-300):
            verdict = f"diverged: constant series term ≈ {_as_fraction(last)} (series term norm non-decaying)"
        else:
            verdict = f"diverged: {res.reason}"
    return _ev(
        name,
        {
            "status": res.status,
            "terms_used": res.terms_used,
            "tail_bound": res.tail_bound,
            "last_term_norm": last,
            "fitted_ratio": res.rate,
            "value": res.value,
            "reason": res.reason,
        },
        verdict,
    )


def analyze_existence(process: NoiseProcess, map, opts: Optional[SolverOptions] = None) -> ExistenceReport:
    """Decide whether lambda_k = mu_k * phi(lambda_{k-1}) has a solution."""
    opts = opts or SolverOptions()
    map = as_map(map, process.dim)
    _require_invertible(map)
    evidence: list = []
    attempted: list = []
    certified: list = []  # (route, status)
    offset = None

    try:
        split: Optional[ContractionSplit] = contraction_split(map, opts.split_tol)
        evidence.append(_ev("contraction_split", {"c": split.c, "contraction_rate": split.contraction_rate}, "ok"))
    except SpectralGapError as exc:
        split = None
        evidence.append(_ev("contraction_split", {"modulus": exc.modulus}, str(exc)))

    if process.all_dirac():
        attempted.append("dirac_exact")
        evidence.append(_ev("dirac_noise", True, "every noise law is a point mass; the shift recursion solves the equation"))
        certified.append(("dirac_exact", "exists"))

    stat = process.stationary_model()
    if stat is not None and split is not None:
        attempted.append("stationary_thm")
        coset = ms.support_coset(stat, split, opts.coset_tol)
        offset = coset.offset
        evidence.append(
            _ev(
                "support_coset",
                {"in_coset": coset.in_coset, "offset": coset.offset, "c": split.c},
                coset.certificate,
            )
        )
        if not coset.in_coset:
            why = "C(phi) = {0} and the noise is not a point mass" if split.c == 0 else "noise leaves every coset of C(phi)"
            certified.append(("stationary_thm", "not_exists"))
            evidence.append(_ev("stationary_criterion", False, why))
        else:
            lm = ms.log_moment(stat, max(opts.samples, 1), opts.seed)
            evidence.append(_ev("log_moment", lm.to_dict(), "infinite" if lm.infinite else "finite"))
            if lm.infinite:
                evidence.append(_ev("stationary_criterion", None, "undetermined: log moment estimate diverges"))
            else:
                certified.append(("stationary_thm", "exists"))
                evidence.append(_ev("stationary_criterion", True, "coset support and finite log moment"))

    attempted.append("gaussian_series")
    wr = process.window_range or (0, 0)
    res = covariance_series(
        map,
        process.cov_at,
        process.mean_at,
        k=0,
        horizon=opts.horizon,
        tol=opts.tol,
        cap=opts.cap,
        min_terms=max(0, -wr[0]) + 1,
    )
    evidence.append(_series_evidence(res, "covariance_series"))
    if res.status == "converged":
        certified.append(("gaussian_series", "exists"))
    elif res.status == "diverged":
        why = _series_divergence_certified(process, map)
        if why:
            certified.append(("gaussian_series", "not_exists"))
            evidence.append(_ev("series_divergence_certificate", True, why))
        else:
            evidence.append(_ev("series_divergence_certificate", False, "divergent second moments alone do not rule out solutions for this noise"))

    if not certified and split is not None:
        attempted.append("lp_paths_thm")
        status = _lp_route(process, map, split, opts, evidence)
        if status:
            certified.append(("lp_paths_thm", status))

    if not certified and opts.empirical_route and opts.samples > 0:
        attempted.append("mc_empirical")
        _empirical_route(process, map, opts, evidence)

    verdicts = {s for _, s in certified}
    if len(verdicts) > 1:
        raise ConsistencyError(
            "contradictory existence evidence: "
            + "; ".join(f"{r} says {s}" for r, s in certified)
        )
    if certified:
        route, status = certified[0]
    else:
        route, status = None, "undetermined"
    return ExistenceReport(status, route, evidence, attempted, opts.horizon, opts.tolerances(), offset)


def _lp_route(process: NoiseProcess, map: LinearMap, split: ContractionSplit, opts: SolverOptions, evidence: list) -> Optional[str]:
    check = lp_path_check(process, opts.p, opts.horizon, seed=opts.seed)
    evidence.append(_ev("lp_path_check", check.to_dict(), check.verdict))
    if check.verdict != "lp_paths_yes":
        return None
    if split.c == 0:
        evidence.append(_ev("lp_coset", None, "C(phi) = {0}: only point-mass noise qualifies"))
        return None
    span = min(opts.horizon, 200)
    lo, hi = -span, span
    if process.window:
        lo, hi = min(lo, process.window_range[0]), max(hi, process.window_range[1])
    offs = []
    for k in range(lo, hi + 1):
        r = ms.support_coset(model_at(process, k), split, opts.coset_tol)
        if not r.in_coset:
            evidence.append(_ev("lp_coset", {"k": k}, f"mu_k is not coset-supported: {r.certificate}"))
            return None
        offs.append(float(np.linalg.norm(r.offset)))
    t = process.tail_rule
    if isinstance(t, DecayMixtureFamily) and split.c != split.dim:
        evidence.append(_ev("lp_coset", None, "tail laws leave C(phi)"))
        return None
    if not (isinstance(t, (ZeroTail, DecayMixtureFamily)) or _is_point_at_zero(model_at(process, hi + 1))):
        evidence.append(_ev("lp_coset", None, "tail offsets not certifiable"))
        return None
    offset_norm = float(np.sum(np.asarray(offs) ** opts.p) ** (1 / opts.p))
    evidence.append(_ev("lp_coset", {"offset_lp_norm_window": offset_norm}, "offsets in l_p (zero beyond the checked range)"))
    bound = sum(ms.log_moment(model_at(process, k), min(opts.samples, 20_000), opts.seed).value for k in range(lo, hi + 1))
    bound += log_moment_tail_bound(process, lo, hi)
    if not math.isfinite(bound):
        evidence.append(_ev("mp_bound", bound, "log moment of the path not certifiable"))
        return None
    evidence.append(_ev("mp_bound", bound, "finite: subadditive bound sum_k E log(|X_k|+1)"))
    try:
        mp = mp_log_moment(process, opts.p, samples=min(opts.samples, 20_000), seed=opts.seed, horizon=opts.horizon)
        evidence.append(_ev("mp_log_moment", mp.to_dict(), "stabilized" if mp.stabilized else "not stabilized"))
    except Exception as exc:  # evidence only
        evidence.append(_ev("mp_log_moment", None, f"estimate failed: {exc}"))
    return "exists"


def _empirical_route(process: NoiseProcess, map: LinearMap, opts: SolverOptions, evidence: list) -> None:
    n = max(50, min(opts.samples, 2000))
    base = opts.n_truncation or 30
    a = backward_partial_sample(process, map, 0, base, n, opts.seed)
    b = backward_partial_sample(process, map, 0, 2 * base, n, opts.seed + 1)
    fin = bool(np.all(np.isfinite(a.samples)) and np.all(np.isfinite(b.samples)))
    if not fin:
        evidence.append(_ev("empirical_cauchy", {"N": base}, "partial products overflow"))
        return
    t = energy_distance_test(a.samples, b.samples, max(200, min(opts.permutations, 500)), opts.seed)
    verdict = "consistent with convergence (heuristic)" if t.p_value > opts.alpha else "partial products still moving"
    evidence.append(_ev("empirical_cauchy", {"N": base, "p_value": t.p_value, "statistic": t.statistic}, verdict))


# --------------------------------------------------------------------------
# solution families


@dataclass(frozen=True)
class ResidualRecord:
    k: int
    cov_residual: Optional[float] = None
    mean_residual: Optional[float] = None
    statistic: Optional[float] = None
    p_value: Optional[float] = None
    energy_p_value: Optional[float] = None
    moment_p_value: Optional[float] = None
    passed: bool = True
    note: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class VerificationReport:
    kind: str
    records: tuple
    passed: bool

    @property
    def max_residual(self) -> float:
        vals = [v for r in self.records for v in (r.cov_residual, r.mean_residual) if v is not None]
        return max(vals, default=0.0)

    @property
    def min_p_value(self) -> Optional[float]:
        vals = [r.p_value for r in self.records if r.p_value is not None]
        return min(vals) if vals else None

    @property
    def failed_ks(self) -> list:
        return [r.k for r in self.records if not r.passed]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "min_p_value": self.min_p_value,
            "failed_k": self.failed_ks,
            "records": [r.to_dict() for r in self.records],
        }


@dataclass(frozen=True, eq=False)
class SolutionFamily:
    """Marginals lambda_k over a window; ``shift`` is the v of lambda_k * delta_{phi^k v}."""

    k_min: int
    k_max: int
    marginals: dict
    kind: str
    shift_param_dim: int
    N: int
    residuals: Optional[VerificationReport] = None
    shift: Optional[np.ndarray] = None
    mean_method: str = ""
    certified: bool = True
    diagnostic: Optional[dict] = None

    def at(self, k: int):
        return self.marginals[k]

    @property
    def ks(self) -> range:
        return range(self.k_min, self.k_max + 1)


def _stationary_mean(process: NoiseProcess) -> Optional[np.ndarray]:
    t = process.tail_rule
    if isinstance(t, ZeroTail):
        m = np.zeros(process.dim)
    elif isinstance(t, Stationary):
        m = t.model.expectation()
    else:
        return None
    if all(np.array_equal(v.expectation(), m) for v in process.window.values()):
        return m
    return None


def _stationary_shift(map: LinearMap, m: np.ndarray) -> np.ndarray:
    """Constant solution of y = m + phi y (1 is never an eigenvalue once the split succeeded)."""
    return np.linalg.solve(np.eye(map.dim) - map.entries, m)


def _recursion_means(process: NoiseProcess, map: LinearMap, seq, ks: range, stationary: Optional[np.ndarray]):
    if stationary is not None:
        y = _stationary_shift(map, stationary)
        return {k: y.copy() for k in ks}, "stationary fixed point of the shift recursion"
    sol = solve_shift_recursion(seq, map, np.zeros(map.dim), ks.start, ks.stop - 1, anchor_index=0)
    return {k: np.array(sol.at(k)) for k in ks}, "shift recursion anchored at y_0 = 0"


def solve_fundamental(
    process: NoiseProcess,
    map,
    k_min: int,
    k_max: int,
    opts: Optional[SolverOptions] = None,
    report: Optional[ExistenceReport] = None,
) -> SolutionFamily:
    """Construct the fundamental solution's marginals on [k_min, k_max]."""
    opts = opts or SolverOptions()
    map = as_map(map, process.dim)
    _require_invertible(map)
    if k_min > k_max:
        raise InputError("k_min must not exceed k_max")
    if report is None:
        report = analyze_existence(process, map, replace(opts, empirical_route=False))
    if report.status != "exists" and not opts.force:
        raise NoSolutionError(f"existence is {report.status}; pass force to explore anyway")
    ks = range(k_min, k_max + 1)
    wr = process.window_range or (0, 0)
    if process.all_dirac():
        fam = _solve_means_only(process, map, ks, opts, wr)
    elif process.all_gaussian():
        fam = _solve_gaussian(process, map, ks, opts, wr)
    else:
        fam = _solve_empirical(process, map, ks, opts)
    return replace(fam, residuals=verify_solution(fam, process, map, opts))


def _series_means(process, map, ks, opts, wr, with_cov: bool):
    results = {}
    for k in ks:
        results[k] = covariance_series(
            map,
            process.cov_at if with_cov else (lambda j: np.zeros((map.dim, map.dim))),
            process.mean_at,
            k=k,
            horizon=opts.horizon,
            tol=opts.tol,
            cap=opts.cap,
            min_terms=max(0, k - wr[0]) + 1,
        )
    if all(r.mean_status == "converged" for r in results.values()):
        means = {k: np.array(r.mean) for k, r in results.items()}
        return results, means, "mean series"
    means, how = _recursion_means(process, map, process.mean_at, ks, _stationary_mean(process))
    return results, means, how


def _solve_means_only(process, map, ks, opts, wr) -> SolutionFamily:
    _, means, how = _series_means(process, map, ks, opts, wr, with_cov=False)
    marg = {k: DiracRepr(means[k]) for k in ks}
    return SolutionFamily(ks.start, ks.stop - 1, marg, "dirac_exact", map.dim, opts.horizon, mean_method=how)


def _solve_gaussian(process, map, ks, opts, wr) -> SolutionFamily:
    results, means, how = _series_means(process, map, ks, opts, wr, with_cov=True)
    bad = [k for k, r in results.items() if r.status != "converged"]
    if bad and not opts.force:
        raise NoSolutionError(f"covariance series not converged at k={bad[0]}: {results[bad[0]].reason}")
    marg = {k: GaussianRepr(means[k], np.array(results[k].value)) for k in ks}
    n_used = max(r.terms_used for r in results.values())
    return SolutionFamily(
        ks.start, ks.stop - 1, marg, "gaussian_closed_form", map.dim, n_used, mean_method=how, certified=not bad
    )


def _empirical_truncation(process: NoiseProcess, map: LinearMap, split: ContractionSplit, opts: SolverOptions, offset_bound: float):
    """(N, certified) from the geometric tail bound on C(phi)-supported centered noise."""
    radius = process.support_radius_bound()
    if split.c == 0:
        return 0, True
    if not math.isfinite(radius) or not math.isfinite(offset_bound):
        return (opts.n_truncation or 60), False
    scale = radius + offset_bound
    if scale == 0:
        return 0, True
    r = split.contraction_rate + (1 - split.contraction_rate) / 4
    k_const = split.rate_constant(r, 400)
    n = 0
    while k_const * scale * r ** (n + 1) / (1 - r) > opts.tol:
        n += 1
        if n > 10_000:
            return (opts.n_truncation or 60), False
    return n, True


def _solve_empirical(process: NoiseProcess, map: LinearMap, ks: range, opts: SolverOptions) -> SolutionFamily:
    split = contraction_split(map, opts.split_tol)
    stat = process.stationary_model()
    # coset offsets of the noise (zero when C(phi) is everything)
    if split.c == split.dim:
        offsets = None
    elif stat is not None:
        r = ms.support_coset(stat, split, opts.coset_tol)
        if not r.in_coset and not opts.force:
            raise NoSolutionError("noise is not coset-supported")
        u = r.offset
        offsets = lambda j: u
    else:
        cache: dict = {}

        def offsets(j):
            if j not in cache:
                cache[j] = ms.support_coset(model_at(process, j), split, opts.coset_tol).offset
            return cache[j]

    probe = [offsets(j) for j in range(ks.start - 5, ks.stop)] if offsets else [np.zeros(map.dim)]
    offset_bound = max(float(np.linalg.norm(o)) for o in probe) if stat is not None or offsets is None else float("inf")
    if offsets is not None and not all(np.all(np.isfinite(o)) for o in probe):
        raise NoSolutionError("noise offsets are undefined (not coset-supported)")
    n_trunc, certified = _empirical_truncation(process, map, split, opts, offset_bound)
    if opts.n_truncation is not None and not certified:
        n_trunc = opts.n_truncation
    if offsets is None:
        shifts, how = {k: np.zeros(map.dim) for k in ks}, "no centering"
    else:
        u_stat = offsets(0) if stat is not None else None
        shifts, how = _recursion_means(process, map, offsets, ks, u_stat)
    marg = {}
    for k in ks:
        s = backward_partial_sample(process, map, k, n_trunc, opts.samples, opts.seed, offsets=offsets)
        marg[k] = EmpiricalRepr(np.asarray(s.samples) + shifts[k], opts.seed, n_trunc, certified)
    # Cauchy diagnostic between truncation N and 2N at the last index; it can only
    # veto an uncertified N (a certified tail bound already settles convergence)
    n_diag = max(50, min(opts.samples, 2000))
    k_last = ks.stop - 1
    s_a = int(derive_rng(opts.seed, 6, k_last).integers(2**63))
    a = backward_partial_sample(process, map, k_last, n_trunc, n_diag, s_a, offsets=offsets)
    b = backward_partial_sample(process, map, k_last, 2 * n_trunc + 1, n_diag, s_a + 1, offsets=offsets)
    if not (np.all(np.isfinite(a.samples)) and np.all(np.isfinite(b.samples))):
        raise NoSolutionError(f"no empirical convergence at horizon {n_trunc}")
    diag = energy_distance_test(a.samples, b.samples, 200, opts.seed)
    diagnostic = {"k": k_last, "N": n_trunc, "statistic": diag.statistic, "p_value": diag.p_value}
    if diag.p_value <= opts.alpha and not certified and not opts.force:
        raise NoSolutionError(f"no empirical convergence at horizon {n_trunc}")
    return SolutionFamily(
        ks.start, ks.stop - 1, marg, "empirical", map.dim, n_trunc, mean_method=how,
        certified=certified, diagnostic=diagnostic,
    )


def extremal_family(base: SolutionFamily, v, map) -> SolutionFamily:
    """The member lambda_k * delta_{phi^k v} of the fundamental family."""
    map = as_map(map)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != map.dim or base.shift_param_dim != map.dim:
        raise InputError("shift vector, map and family dimensions must agree")
    marg = {k: base.marginals[k].shifted(map.power(k) @ v) for k in base.ks}
    prev = np.zeros(map.dim) if base.shift is None else base.shift
    return replace(base, marginals=marg, shift=prev + v)


# --------------------------------------------------------------------------
# verification


def verify_solution(family: SolutionFamily, process: NoiseProcess, map, opts: Optional[SolverOptions] = None) -> VerificationReport:
    """Check lambda_k = mu_k * phi(lambda_{k-1}) for k in (k_min, k_max]."""
    opts = opts or SolverOptions()
    map = as_map(map, process.dim)
    phi = np.asarray(map.entries)
    records = []
    # one energy test per k: Bonferroni keeps the family-wise level at alpha
    level = opts.alpha / max(1, family.k_max - family.k_min)
    for k in range(family.k_min + 1, family.k_max + 1):
        cur, prev = family.marginals[k], family.marginals[k - 1]
        mu = model_at(process, k)
        if family.kind in ("gaussian_closed_form", "dirac_exact"):
            if family.kind == "gaussian_closed_form":
                if not ms.is_gaussian_like(mu):
                    records.append(ResidualRecord(k, passed=False, note="noise law is not Gaussian"))
                    continue
                b_k, b_prev = np.asarray(cur.cov), np.asarray(prev.cov)
                c_res = float(np.linalg.norm(b_k - mu.covariance() - phi @ b_prev @ phi.T))
                m_k, m_prev = np.asarray(cur.mean), np.asarray(prev.mean)
                c_ok = c_res <= opts.residual_tol * (1 + np.linalg.norm(b_k))
            else:
                pt = ms.dirac_point(mu)
                if pt is None:
                    records.append(ResidualRecord(k, passed=False, note="noise law is not a point mass"))
                    continue
                c_res, c_ok = None, True
                m_k, m_prev = np.asarray(cur.point), np.asarray(prev.point)
            m_res = float(np.linalg.norm(m_k - mu.expectation() - phi @ m_prev))
            m_ok = m_res <= opts.residual_tol * (1 + np.linalg.norm(m_k))
            records.append(ResidualRecord(k, c_res, m_res, passed=bool(c_ok and m_ok)))
        else:
            lhs = np.asarray(cur.samples)[: opts.max_test_samples]
            pts = np.asarray(prev.samples)[: opts.max_test_samples]
            rng = derive_rng(opts.seed, 3, k)
            rhs = ms.sample(mu, pts.shape[0], None, rng=rng) + pts @ phi.T
            t = energy_distance_test(lhs, rhs, opts.permutations, int(derive_rng(opts.seed, 4, k).integers(2**63)))
            pm = _moment_identity_p(np.asarray(cur.samples), np.asarray(prev.samples), mu, phi)
            # energy distance reacts to scale errors only at second order; the
            # moment identities catch those, and Bonferroni combines the two
            p = min(1.0, 2.0 * min(t.p_value, pm))
            records.append(
                ResidualRecord(
                    k, statistic=t.statistic, p_value=p, energy_p_value=t.p_value,
                    moment_p_value=pm, passed=p > level,
                )
            )
    return VerificationReport(family.kind, tuple(records), all(r.passed for r in records))


def _moment_identity_p(cur: np.ndarray, prev: np.ndarray, mu: ms.NoiseModel, phi: np.ndarray) -> float:
    """p-value for E l_k = m_k + phi E l_{k-1} and Cov l_k = A_k + phi Cov l_{k-1} phi^T.

    Each mean and covariance entry gets a two-sided z-test whose standard
    error comes from the sample fourth moments; entries are Bonferroni-combined.
    """
    from scipy.stats import norm

    q = prev @ phi.T
    n_c, n_q = cur.shape[0], q.shape[0]
    cc, qc = cur - cur.mean(axis=0), q - q.mean(axis=0)
    r_mean = cur.mean(axis=0) - mu.expectation() - q.mean(axis=0)
    se_mean = np.sqrt(cc.var(axis=0) / n_c + qc.var(axis=0) / n_q)
    d = cur.shape[1]
    iu = np.triu_indices(d)
    prod_c = cc[:, iu[0]] * cc[:, iu[1]]
    prod_q = qc[:, iu[0]] * qc[:, iu[1]]
    r_cov = prod_c.mean(axis=0) - np.asarray(mu.covariance())[iu] - prod_q.mean(axis=0)
    se_cov = np.sqrt(prod_c.var(axis=0) / n_c + prod_q.var(axis=0) / n_q)
    r = np.concatenate([r_mean, r_cov])
    se = np.concatenate([se_mean, se_cov])
    ps = np.ones_like(r)
    live = se > 0
    ps[live] = 2 * norm.sf(np.abs(r[live]) / se[live])
    ps[~live & (np.abs(r) > 1e-12 * (1 + np.abs(r)))] = 0.0
    return float(min(1.0, ps.min() * r.size))


@dataclass(frozen=True)
class DecayReport:
    k: int
    cov_norms: tuple
    mean_norms: tuple
    cov_rate: float
    mean_rate: Optional[float]
    verdict: str
    quantiles: Optional[tuple] = None

    def to_dict(self) -> dict:
        return _jsonable(dict(self.__dict__))


def strong_decomposability_check(family: SolutionFamily, map, n_max: int, k: Optional[int] = None) -> DecayReport:
    """Track |phi^n B_{k-n} (phi^n)^T| and |phi^n b_{k-n}| (sample norms for empirical families)."""
    map = as_map(map)
    k = family.k_max if k is None else k
    if n_max < 1 or k - n_max < family.k_min or k > family.k_max:
        raise InputError(f"window [{family.k_min}, {family.k_max}] too short for n_max={n_max} at k={k}")
    cov_norms, mean_norms, quant = [], [], None
    if family.kind == "empirical":
        q = []
        for n in range(n_max + 1):
            s = np.asarray(family.marginals[k - n].samples)
            s = (s - s.mean(axis=0)) @ map.power(n).T
            q.append(float(np.median(np.linalg.norm(s, axis=1))))
        cov_norms = q
        quant = tuple(q)
    else:
        for n in range(n_max + 1):
            pw = map.power(n)
            mg = family.marginals[k - n]
            if family.kind == "gaussian_closed_form":
                cov_norms.append(float(np.linalg.norm(pw @ np.asarray(mg.cov) @ pw.T)))
                mean_norms.append(float(np.linalg.norm(pw @ np.asarray(mg.mean))))
            else:
                cov_norms.append(0.0)
                mean_norms.append(float(np.linalg.norm(pw @ np.asarray(mg.point))))
    cov_rate = fit_geometric_rate(cov_norms)
    mean_rate = fit_geometric_rate(mean_norms) if mean_norms else None
    rate = cov_rate if any(cov_norms) else mean_rate
    verdict = "decays" if math.isfinite(rate) and rate < 1 - 1e-6 else "does_not_decay"
    return DecayReport(k, tuple(cov_norms), tuple(mean_norms), cov_rate, mean_rate, verdict, quant)
