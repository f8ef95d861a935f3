import dataclasses

import numpy as np
import pytest

from decomp_solve import measures as ms
from decomp_solve.errors import HypothesisError, InputError, NoSolutionError
from decomp_solve.mc import EmpiricalRepr, GaussianRepr
from decomp_solve.process import DecayMixtureFamily, NoiseProcess, PushforwardPower, Stationary, ZeroTail, solve_shift_recursion
from decomp_solve.solver import (
    SolverOptions,
    analyze_existence,
    extremal_family,
    solve_fundamental,
    strong_decomposability_check,
    verify_solution,
)
from decomp_solve.spectral import LinearMap, lyapunov_fixed_point

HALF = LinearMap([[0.5]])
GAUSS1 = NoiseProcess.stationary(ms.Gaussian([0.0], [[1.0]]))
SPLIT_MAP = LinearMap(np.diag([0.5, 2.0]))


def _evidence(rep, name):
    return [e for e in rep.evidence if e["name"] == name]


def test_stationary_gaussian_on_contraction_subspace():
    p = NoiseProcess.stationary(ms.Gaussian([0.0, 0.0], np.diag([1.0, 0.0])))
    rep = analyze_existence(p, SPLIT_MAP)
    assert rep.status == "exists" and rep.route == "stationary_thm"
    np.testing.assert_allclose(rep.coset_offset, [0.0, 0.0])
    fam = solve_fundamental(p, SPLIT_MAP, -3, 3)
    np.testing.assert_allclose(fam.at(0).cov, lyapunov_fixed_point(SPLIT_MAP, np.diag([1.0, 0.0])), atol=1e-12)


def test_stationary_noise_off_coset_has_no_solution():
    p = NoiseProcess.stationary(ms.Gaussian([0.0, 0.0], np.eye(2)))
    rep = analyze_existence(p, SPLIT_MAP)
    assert rep.status == "not_exists" and rep.route == "stationary_thm"
    with pytest.raises(NoSolutionError):
        solve_fundamental(p, SPLIT_MAP, -1, 1)


def test_pushforward_power_counterexample():
    a = LinearMap([[0.9]])
    p = NoiseProcess(1, {}, PushforwardPower(ms.UniformBox([0.0], [1.0]), a))
    rep = analyze_existence(p, a)
    assert rep.status == "not_exists"
    series = _evidence(rep, "covariance_series")[0]
    assert "constant series term ≈ 1/12" in series["verdict"]
    assert series["value"]["last_term_norm"] == pytest.approx(1 / 12, rel=1e-9)


def test_dirac_noise_with_expanding_map():
    rep = analyze_existence(NoiseProcess.stationary(ms.Dirac([1.0, -2.0])), LinearMap(np.diag([2.0, 3.0])))
    assert rep.status == "exists" and rep.route == "dirac_exact"


def test_nondegenerate_noise_with_expanding_map():
    rep = analyze_existence(NoiseProcess.stationary(ms.UniformBox([0.0], [1.0])), LinearMap([[2.0]]))
    assert rep.status == "not_exists"


def test_expanding_map_with_growing_gaussian_noise():
    p = NoiseProcess(1, {}, PushforwardPower(ms.Gaussian([0.0], [[1.0]]), LinearMap([[np.sqrt(8.0)]])))
    rep = analyze_existence(p, LinearMap([[2.0]]))
    assert rep.status == "exists" and rep.route == "gaussian_series"
    fam = solve_fundamental(p, LinearMap([[2.0]]), -2, 2)
    assert fam.at(0).cov[0, 0] == pytest.approx(2.0, abs=1e-9)


def test_decay_mixture_exists():
    rep = analyze_existence(NoiseProcess(1, {}, DecayMixtureFamily(0.5)), HALF)
    assert rep.status == "exists"
    assert rep.routes_attempted[0] == "gaussian_series"


def test_lp_route_certifies_when_series_is_unavailable():
    # phi = 2 and a Dirac-free window: second moments explode but l_p paths and cosets are trivial
    p = NoiseProcess(1, {k: ms.Dirac([1.0]) for k in range(-2, 3)}, ZeroTail())
    rep = analyze_existence(p, LinearMap([[2.0]]))
    assert rep.status == "exists"


def test_singular_map_is_rejected():
    with pytest.raises(HypothesisError):
        analyze_existence(GAUSS1, LinearMap([[0.0]]))


def test_spectral_gap_is_recorded_not_fatal():
    rep = analyze_existence(NoiseProcess.stationary(ms.Dirac([0.0])), LinearMap([[1.0]]))
    assert rep.status == "exists" and rep.route == "dirac_exact"
    assert "spectral gap" in _evidence(rep, "contraction_split")[0]["verdict"]


def test_undetermined_is_reported_honestly():
    # unit circle eigenvalue: no split, Gaussian series diverges but only for Gaussian noise is that conclusive
    p = NoiseProcess.stationary(ms.UniformBox([0.0], [1.0]))
    rep = analyze_existence(p, LinearMap([[-1.0]]), SolverOptions(horizon=200, samples=500))
    assert rep.status == "undetermined"
    assert rep.route is None


def test_report_is_json_ready():
    import json

    rep = analyze_existence(NoiseProcess(1, {}, DecayMixtureFamily(0.5)), HALF)
    json.dumps(rep.to_dict(), allow_nan=True)


def test_gaussian_fundamental_solution():
    fam = solve_fundamental(GAUSS1, HALF, -10, 10)
    assert fam.kind == "gaussian_closed_form"
    for k in fam.ks:
        assert fam.at(k).cov[0, 0] == pytest.approx(4 / 3, abs=1e-12)
        assert fam.at(k).mean[0] == 0.0
    assert fam.residuals.passed
    assert fam.residuals.max_residual <= 1e-9


def test_dirac_fundamental_solution():
    fam = solve_fundamental(NoiseProcess.stationary(ms.Dirac([1.0])), HALF, -4, 4)
    assert fam.kind == "dirac_exact"
    for k in fam.ks:
        assert fam.at(k).point[0] == pytest.approx(2.0, abs=1e-12)
    assert fam.residuals.max_residual == 0.0


def test_empirical_fundamental_solution_moments():
    n = 20_000
    fam = solve_fundamental(NoiseProcess.stationary(ms.UniformBox([0.0], [1.0])), HALF, 0, 1, SolverOptions(samples=n, tol=1e-6))
    assert fam.kind == "empirical" and fam.certified
    s = fam.at(0).samples[:, 0]
    se_mean = s.std(ddof=1) / np.sqrt(n)
    se_var = np.sqrt((np.mean((s - s.mean()) ** 4) - s.var() ** 2) / n)
    assert abs(s.mean() - 1.0) <= 3 * se_mean
    assert abs(s.var(ddof=1) - 1 / 9) <= 3 * se_var
    assert fam.residuals.passed


def test_empirical_truncation_meets_tolerance():
    fam = solve_fundamental(NoiseProcess.stationary(ms.UniformBox([0.0], [1.0])), HALF, 0, 0, SolverOptions(samples=100, tol=1e-6))
    # sup |tail| <= sum_{i>N} 0.5^i for noise bounded by 1
    assert 0.5**fam.N <= 1e-6 * 4
    assert fam.at(0).N_truncation == fam.N


def test_empirical_centering_on_coset():
    # noise moves only along the contracting axis; the expanding coordinate is a fixed offset
    p = NoiseProcess.stationary(ms.UniformBox([0.0, 3.0], [1.0, 3.0]))
    fam = solve_fundamental(p, SPLIT_MAP, -1, 1, SolverOptions(samples=3000))
    s = fam.at(0).samples
    np.testing.assert_allclose(s[:, 1], -3.0, atol=1e-12)  # y = 3 + 2y
    assert fam.residuals.passed


def test_force_required_without_existence():
    p = NoiseProcess.stationary(ms.UniformBox([0.0], [1.0]))
    with pytest.raises(NoSolutionError):
        solve_fundamental(p, LinearMap([[2.0]]), 0, 1)


def test_uniqueness_up_to_shift():
    fam = solve_fundamental(GAUSS1, HALF, -5, 5)
    v = 3.0
    ext = extremal_family(fam, [v], HALF)
    for k in fam.ks:
        assert ext.at(k).mean[0] == pytest.approx(v * 0.5**k, rel=1e-12)
        assert ext.at(k).cov[0, 0] == fam.at(k).cov[0, 0]
    assert verify_solution(ext, GAUSS1, HALF).passed
    same = extremal_family(fam, [0.0], HALF)
    for k in fam.ks:
        assert np.array_equal(same.at(k).mean, fam.at(k).mean)


def test_distinct_shifts_give_distinct_families():
    fam = solve_fundamental(GAUSS1, HALF, -2, 2)
    a, b = extremal_family(fam, [1.0], HALF), extremal_family(fam, [-0.5], HALF)
    assert abs(a.at(0).mean[0] - b.at(0).mean[0]) == pytest.approx(1.5)


def test_anchor_choice_recovered_by_least_squares():
    phi = LinearMap([[0.5, 0.3], [0.0, 2.0]])
    p = NoiseProcess(2, {k: ms.Gaussian([0.1 * k, 1.0], np.diag([1.0, 0.0])) for k in range(-4, 5)},
                     Stationary(ms.Gaussian([0.0, 1.0], np.diag([1.0, 0.0]))))
    base = solve_fundamental(p, phi, -4, 4)
    alt = solve_shift_recursion(p.mean_at, phi, [5.0, -1.0], -4, 4, anchor_index=2)
    other = dataclasses.replace(base, marginals={k: GaussianRepr(alt.at(k), base.at(k).cov) for k in base.ks})
    assert verify_solution(other, p, phi).passed
    rows = np.vstack([phi.power(k) for k in base.ks])
    gaps = np.concatenate([other.at(k).mean - base.at(k).mean for k in base.ks])
    v, *_ = np.linalg.lstsq(rows, gaps, rcond=None)
    assert np.linalg.norm(rows @ v - gaps) <= 1e-8


def test_shifted_noise_equivariance():
    vs = {k: np.array([np.sin(k), 0.0]) for k in range(-10, 11)}
    cov = np.diag([1.0, 0.0])
    base = NoiseProcess.stationary(ms.Gaussian([0.0, 0.0], cov))
    moved = NoiseProcess(2, {k: ms.Gaussian(vs[k], cov) for k in vs}, Stationary(ms.Gaussian([0.0, 0.0], cov)))
    fa = solve_fundamental(base, SPLIT_MAP, -10, 10)
    fb = solve_fundamental(moved, SPLIT_MAP, -10, 10)
    y = solve_shift_recursion(lambda k: vs.get(k, np.zeros(2)), SPLIT_MAP, np.zeros(2), -10, 10, anchor_index=-11)
    for k in fa.ks:
        np.testing.assert_allclose(fb.at(k).mean - fa.at(k).mean, y.at(k), atol=1e-10)
        np.testing.assert_allclose(fb.at(k).cov, fa.at(k).cov, atol=1e-10)


def test_stationary_consistency():
    p = NoiseProcess.stationary(ms.Gaussian([1.0, 0.5], np.array([[1.0, 0.0], [0.0, 0.0]])))
    fam = solve_fundamental(p, SPLIT_MAP, -10, 10)
    for k in fam.ks:
        np.testing.assert_allclose(fam.at(k).cov, fam.at(0).cov, atol=1e-10)
        np.testing.assert_allclose(fam.at(k).mean, fam.at(0).mean, atol=1e-10)


def test_gaussian_inputs_give_gaussian_outputs():
    phi = LinearMap([[0.3, 0.1], [0.0, 0.6]])
    p = NoiseProcess(2, {0: ms.Gaussian([1.0, 1.0], np.eye(2))}, Stationary(ms.Gaussian([0.0, 0.0], 2 * np.eye(2))))
    fam = solve_fundamental(p, phi, -3, 3)
    assert fam.kind == "gaussian_closed_form"
    for k in fam.ks:
        assert np.linalg.eigvalsh(fam.at(k).cov).min() >= -1e-12


def test_corrupted_gaussian_family_is_flagged():
    fam = solve_fundamental(GAUSS1, HALF, -3, 3)
    bad = dict(fam.marginals)
    bad[1] = GaussianRepr(bad[1].mean, bad[1].cov * 1.1)
    rep = verify_solution(dataclasses.replace(fam, marginals=bad), GAUSS1, HALF)
    assert not rep.passed
    assert 1 in rep.failed_ks
    assert rep.max_residual > 1e-9


def test_corrupted_empirical_family_is_flagged():
    p = NoiseProcess.stationary(ms.UniformBox([0.0], [1.0]))
    fam = solve_fundamental(p, HALF, 0, 1, SolverOptions(samples=5000))
    s = fam.at(1).samples
    wide = (s - s.mean()) * np.sqrt(1.1) + s.mean()
    bad = dict(fam.marginals)
    bad[1] = EmpiricalRepr(wide, 0, fam.N)
    rep = verify_solution(dataclasses.replace(fam, marginals=bad), p, HALF, SolverOptions(samples=5000))
    assert fam.residuals.passed
    assert not rep.passed and rep.min_p_value < 0.01


def test_decay_of_gaussian_family():
    fam = solve_fundamental(GAUSS1, HALF, -10, 10)
    r = strong_decomposability_check(fam, HALF, 8)
    np.testing.assert_allclose(r.cov_norms, [4 / 3 * 0.25**n for n in range(9)], rtol=1e-12)
    assert r.cov_rate == pytest.approx(0.25)
    assert r.verdict == "decays"


def test_identity_map_does_not_decay():
    fam = solve_fundamental(GAUSS1, HALF, -5, 5)
    assert strong_decomposability_check(fam, LinearMap([[1.0]]), 5).verdict == "does_not_decay"


def test_dirac_family_decay_of_image():
    fam = solve_fundamental(NoiseProcess.stationary(ms.Dirac([1.0])), HALF, -6, 6)
    r = strong_decomposability_check(fam, HALF, 6)
    np.testing.assert_allclose(r.mean_norms, [2.0 * 0.5**n for n in range(7)])
    assert r.mean_rate == pytest.approx(0.5)


def test_decay_window_too_short():
    fam = solve_fundamental(GAUSS1, HALF, 0, 3)
    with pytest.raises(InputError):
        strong_decomposability_check(fam, HALF, 4)


def test_extremal_dimension_mismatch():
    fam = solve_fundamental(GAUSS1, HALF, 0, 1)
    with pytest.raises(InputError):
        extremal_family(fam, [1.0, 2.0], HALF)
