import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decomp_solve import measures as ms
from decomp_solve.errors import InputError
from decomp_solve.spectral import LinearMap, contraction_split


def test_gaussian_validation():
    with pytest.raises(InputError):
        ms.Gaussian([0.0, 0.0], [[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(InputError):
        ms.Gaussian([0.0], [[-1.0]])


def test_mixture_weights_must_sum_to_one():
    with pytest.raises(InputError):
        ms.Mixture([0.5, 0.4], (ms.Dirac([0.0]), ms.Dirac([1.0])))


def test_uniform_box_bounds():
    with pytest.raises(InputError):
        ms.UniformBox([1.0], [0.0])


def test_sampling_is_deterministic():
    g = ms.Gaussian([1.0, -1.0], [[2.0, 0.5], [0.5, 1.0]])
    a = ms.sample(g, 500, 7)
    b = ms.sample(g, 500, 7)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, ms.sample(g, 500, 8))


def test_moments_of_basic_models():
    u = ms.UniformBox([0.0, -1.0], [1.0, 1.0])
    np.testing.assert_allclose(u.expectation(), [0.5, 0.0])
    np.testing.assert_allclose(u.covariance(), np.diag([1 / 12, 4 / 12]))
    mix = ms.mixture([(0.25, ms.Dirac([0.0])), (0.75, ms.Dirac([4.0]))])
    assert mix.expectation()[0] == pytest.approx(3.0)
    assert mix.covariance()[0, 0] == pytest.approx(0.25 * 9 + 0.75 * 1)


def test_pushforward_closed_forms():
    phi = LinearMap([[2.0, 1.0], [0.0, 3.0]])
    g = ms.pushforward(ms.Gaussian([1.0, 1.0], np.eye(2)), phi)
    assert isinstance(g, ms.Gaussian)
    np.testing.assert_allclose(g.mean, [3.0, 3.0])
    np.testing.assert_allclose(g.cov, phi.entries @ phi.entries.T)
    d = ms.pushforward(ms.Dirac([1.0, 2.0]), phi)
    np.testing.assert_allclose(ms.dirac_point(d), [4.0, 6.0])
    u = ms.pushforward(ms.UniformBox([0.0], [1.0]), LinearMap([[-0.5]]))
    assert isinstance(u, ms.UniformBox)
    np.testing.assert_allclose([u.lo[0], u.hi[0]], [-0.5, 0.0])


def test_pushforward_general_matches_samples():
    phi = LinearMap([[1.0, 1.0], [0.0, 1.0]])
    m = ms.pushforward(ms.UniformBox([0.0, 0.0], [1.0, 1.0]), phi)
    np.testing.assert_allclose(m.covariance(), phi.entries @ np.eye(2) / 12 @ phi.entries.T)
    s = ms.sample(m, 40_000, 3)
    np.testing.assert_allclose(s.mean(axis=0), m.expectation(), atol=0.02)


def test_convolution_rules():
    a = ms.Gaussian([1.0], [[1.0]])
    b = ms.Gaussian([2.0], [[3.0]])
    c = ms.convolve(a, b)
    assert isinstance(c, ms.Gaussian)
    assert c.mean[0] == 3.0 and c.cov[0, 0] == 4.0
    shifted = ms.convolve(ms.UniformBox([0.0], [1.0]), ms.Dirac([5.0]))
    np.testing.assert_allclose(shifted.expectation(), [5.5])
    mixed = ms.convolve(ms.UniformBox([0.0], [1.0]), a)
    np.testing.assert_allclose(mixed.expectation(), [1.5])
    np.testing.assert_allclose(mixed.covariance(), [[1 + 1 / 12]])
    with pytest.raises(InputError):
        ms.convolve(a, ms.Dirac([0.0, 0.0]))


def test_symmetrize_and_reflect():
    u = ms.UniformBox([1.0], [2.0])
    r = ms.reflect(u)
    np.testing.assert_allclose(r.expectation(), [-1.5])
    s = ms.symmetrize(u)
    np.testing.assert_allclose(s.expectation(), [0.0], atol=1e-15)
    np.testing.assert_allclose(s.covariance(), [[2 / 12]])


def test_log_moment_uniform_exact():
    r = ms.log_moment(ms.UniformBox([0.0], [1.0]))
    assert r.value == pytest.approx(2 * math.log(2) - 1, abs=1e-12)
    assert r.std_error == 0.0
    assert not r.infinite


def test_log_moment_dirac_closed_form():
    r = ms.log_moment(ms.Dirac([3.0, 4.0]))
    assert r.value == pytest.approx(math.log(6.0))
    assert r.method == "closed_form"


def test_log_moment_monte_carlo_reproducible():
    g = ms.Gaussian([0.0, 0.0], np.eye(2))
    a, b = ms.log_moment(g, 20_000, 5), ms.log_moment(g, 20_000, 5)
    assert a.value == b.value
    assert a.std_error > 0
    # |X| is Rayleigh: E log(1+|X|) by quadrature
    from scipy.integrate import quad
    exact = quad(lambda r: math.log1p(r) * r * math.exp(-r * r / 2), 0, np.inf)[0]
    assert abs(a.value - exact) <= 4 * a.std_error


def test_support_coset_cases():
    split = contraction_split(LinearMap(np.diag([0.5, 2.0])))
    ok = ms.support_coset(ms.Gaussian([1.0, 3.0], np.diag([2.0, 0.0])), split)
    assert ok.in_coset
    np.testing.assert_allclose(ok.offset, [0.0, 3.0])
    bad = ms.support_coset(ms.Gaussian([0.0, 0.0], np.diag([1.0, 1.0])), split)
    assert not bad.in_coset
    box = ms.support_coset(ms.UniformBox([0.0, 2.0], [1.0, 2.0]), split)
    assert box.in_coset
    np.testing.assert_allclose(box.offset, [0.0, 2.0])
    two = ms.mixture([(0.5, ms.Dirac([0.0, 0.0])), (0.5, ms.Dirac([0.0, 1.0]))])
    assert not ms.support_coset(two, split).in_coset


def test_support_coset_empty_contraction_subspace():
    split = contraction_split(LinearMap([[2.0]]))
    assert ms.support_coset(ms.Dirac([1.0]), split).in_coset
    assert not ms.support_coset(ms.UniformBox([0.0], [1.0]), split).in_coset


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2))
def test_coset_offset_shift_equivariance(v):
    split = contraction_split(LinearMap([[0.5, 1.0], [0.0, 3.0]]))
    base = ms.pushforward(ms.UniformBox([0.0, 0.0], [1.0, 0.0]), LinearMap(np.eye(2)))
    r0 = ms.support_coset(base, split)
    r1 = ms.support_coset(ms.shift(base, v), split)
    assert r0.in_coset and r1.in_coset
    np.testing.assert_allclose(r1.offset - r0.offset, split.complement_part(v), atol=1e-9)


def test_serialization_round_trip():
    m = ms.mixture(
        [
            (0.3, ms.Gaussian([0.0, 1.0], np.eye(2))),
            (0.7, ms.Shifted(ms.UniformBox([0.0, 0.0], [1.0, 2.0]), [1.0, 1.0])),
        ]
    )
    again = ms.from_dict(ms.to_dict(m))
    assert ms.models_equal(m, again)
    with pytest.raises(InputError):
        ms.from_dict({"tag": "Cauchy"})


def test_support_radius():
    assert ms.support_radius(ms.UniformBox([-3.0, 0.0], [1.0, 4.0])) == pytest.approx(5.0)
    assert ms.support_radius(ms.Gaussian([0.0], [[1.0]])) == math.inf
    assert ms.support_radius(ms.Gaussian([2.0], [[0.0]])) == pytest.approx(2.0)
