import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gwave import bump
from gwave.genfun import (
    BumpSpec,
    GeneralizedDirection,
    GeneralizedPoint,
    NotCompact,
    NotUnit,
    OutOfDomain,
    check_derivatives,
    check_support,
    derivative_bound_test,
    embed_smooth,
    eval_at_point,
    local_equality_test,
    mollified_distribution,
    plane_wave,
    pointwise_ginf_test,
    product,
    scale,
    translate,
)
from gwave.jets import Jet, multi_indices
from gwave.netcalc import (
    DimensionMismatch,
    EpsilonGrid,
    ScaleKind,
    VectorNet,
    classify_scale,
    is_negligible,
    relate_points,
)

G = EpsilonGrid.default()
A = EpsilonGrid.analysis()

delta = mollified_distribution("delta", 0.0)
gauss = embed_smooth("exp(-x1^2)")
heav = mollified_distribution("heaviside", 0.0)


def pt(expr, grid=G):
    return GeneralizedPoint.from_exprs([expr], grid)


class TestProfiles:
    def test_phi0_plateau_and_support(self):
        x = np.linspace(-1.2, 1.2, 2001)
        v = bump.phi0(x)
        assert np.all((0 <= v) & (v <= 1))
        assert np.all(v[np.abs(x) <= 0.5] == 1)
        assert np.all(v[np.abs(x) >= 1] == 0)

    def test_mollifier_mass(self):
        assert bump.check_mollifier() == pytest.approx(1.0, abs=1e-12)

    def test_bad_mollifier(self):
        with pytest.raises(bump.BadMollifier):
            mollified_distribution("delta", 0.0, mollifier=BumpSpec(amplitude=1.5))

    def test_fast_oracles_match_quadrature(self):
        w = np.array([0.0, 0.4, 2.0, 7.5, 31.0, 120.0, 700.0])
        np.testing.assert_allclose(bump.psi_hat_fast(w), bump.psi_hat(w), atol=1e-12)
        np.testing.assert_allclose(bump.phi0_hat_1d_fast(w), bump.phi0_hat_1d(w), atol=1e-12)
        np.testing.assert_allclose(bump.phi0_hat_2d_fast(w), bump.phi0_hat_2d(w), atol=1e-12)

    def test_phi0_derivatives_fd(self):
        x = np.array([[0.6, 0.3], [-0.2, -0.7], [0.1, 0.1]])
        J = bump.phi0_jet(Jet.coordinates(x, 2))
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (bump.phi0(x + e) - bump.phi0(x - e)) / (2 * h)
            np.testing.assert_allclose(J.derivative(tuple(1 if i == j else 0 for i in range(2))), fd, atol=1e-7)


class TestEmbed:
    def test_constant_in_eps(self):
        x = np.linspace(-2, 2, 9)[:, None]
        assert np.array_equal(gauss.values(0.1, x), gauss.values(1e-9, x))

    def test_derivative_of_square(self):
        j = embed_smooth("x1^2").jet(0.1, Jet.coordinates(np.array([[3.0]]), 2))
        assert j.derivative((1,))[0] == 6.0

    def test_sqrt_eps_point(self):
        n = eval_at_point(embed_smooth("x1^2"), pt("sqrt(eps)"))
        np.testing.assert_allclose(n.samples.real, G.values)
        assert classify_scale(n).kind is ScaleKind.FAST_INFINITESIMAL

    def test_sin_at_half_pi(self):
        n = eval_at_point(embed_smooth("sin(x1)"), GeneralizedPoint.constant(G, math.pi / 2))
        np.testing.assert_allclose(n.samples.real, 1.0)

    def test_out_of_domain(self):
        u = embed_smooth("log(x1)", domain=[[0.1, 5.0]])
        with pytest.raises(OutOfDomain):
            eval_at_point(u, GeneralizedPoint.constant(G, 0.0))


class TestMollified:
    def test_delta_at_eps(self):
        n = eval_at_point(delta, pt("eps"))
        assert np.all(n.samples == 0)  # psi(1) = 0 at the support edge

    def test_delta_outside_support(self):
        assert is_negligible(eval_at_point(delta, GeneralizedPoint.constant(G, 0.5))).order == 6

    def test_heaviside_far_right(self):
        assert np.all(eval_at_point(heav, GeneralizedPoint.constant(G, 1.0)).samples == 1)

    def test_delta_slow_point_negligible(self):
        n = eval_at_point(delta, pt("1/log(1/eps)"))
        # 1/(eps log(1/eps)) > 1 already at eps = 2^-6
        assert 1 / (G.values[0] * math.log(1 / G.values[0])) > 1
        assert is_negligible(n).order == 6

    def test_delta_squared_scale(self):
        n = eval_at_point(product(delta, delta), GeneralizedPoint.constant(G, 0.0))
        v = classify_scale(n)
        assert v.kind is ScaleKind.FAST_SCALE and v.fit_exponent == pytest.approx(2.0)

    def test_oracle_at_inverse_sqrt(self):
        eps = 2.0**-16
        val = delta.fourier_oracle(eps, np.array([[eps**-0.5]]))[0]
        assert abs(val) == pytest.approx(1.0, abs=1e-3)

    def test_heaviside_derivative_is_delta(self):
        x = np.linspace(-0.02, 0.02, 41)[:, None]
        eps = 2.0**-7
        dh = heav.jet(eps, Jet.coordinates(x, 1)).derivative((1,))
        np.testing.assert_allclose(dh, delta.values(eps, x).real, atol=1e-9)

    def test_dirac_derivative(self):
        u = mollified_distribution("dirac_derivative", 0.0)
        x = np.linspace(-0.01, 0.01, 21)[:, None]
        eps = 2.0**-8
        dd = delta.jet(eps, Jet.coordinates(x, 1)).derivative((1,))
        np.testing.assert_allclose(u.values(eps, x).real, dd, rtol=1e-12, atol=1e-6)

    def test_heaviside_is_1d(self):
        with pytest.raises(DimensionMismatch):
            mollified_distribution("heaviside", 0.0, d=2)


class TestPlaneWave:
    def test_rotating_direction_slow(self):
        th = GeneralizedDirection.from_exprs(["cos(1/log(1/eps))", "sin(1/log(1/eps))"], G)
        e0 = VectorNet.constant(G, [1.0, 0.0])
        assert relate_points(th.net, e0).kind is ScaleKind.SLOW_INFINITESIMAL

    def test_oracle_peak_at_inverse_eps(self):
        u = plane_wave("1", "1/eps", ["1"], BumpSpec(0.5))
        eps = 2.0**-12
        assert u.carrier(eps)[0] == 1 / eps
        z = np.linspace(-50, 50, 101)[:, None]
        assert z[np.argmax(np.abs(u.fourier_oracle(eps, z))), 0] == 0.0

    def test_direction_normalized(self):
        u = plane_wave("1", "1/eps", ["1", "1"], BumpSpec(0.5))
        np.testing.assert_allclose(u.direction(0.1), [2**-0.5, 2**-0.5])

    def test_unit_check(self):
        with pytest.raises(NotUnit):
            GeneralizedDirection(VectorNet.constant(G, [1.0, 1.0]))


class TestAlgebra:
    def test_product_identity(self):
        one = embed_smooth("1")
        x = np.linspace(-0.05, 0.05, 33)[:, None]
        for eps in G.values:
            assert np.array_equal(product(delta, one).values(eps, x), delta.values(eps, x))

    def test_translate_matches_moved_center(self):
        t = translate(delta, ["sqrt(eps)"])
        m = mollified_distribution("delta", "sqrt(eps)")
        x = np.linspace(-0.01, 0.3, 200)[:, None]
        for eps in G.values:
            assert np.array_equal(t.values(eps, x), m.values(eps, x))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            product(delta, embed_smooth("x1 * x2", d=2))

    def test_scale_oracle(self):
        s = scale(delta, "eps^2")
        z = np.array([[3.0]])
        assert s.fourier_oracle(0.25, z)[0] == pytest.approx(0.0625 * delta.fourier_oracle(0.25, z)[0])


_families = [
    delta,
    heav,
    gauss,
    product(delta, delta),
    plane_wave("1", "1/eps", ["1"], BumpSpec(0.5)),
    translate(gauss, ["eps"]),
]


@settings(max_examples=100, deadline=None)
@given(
    i=st.integers(0, len(_families) - 1),
    j=st.integers(0, len(_families) - 1),
    k=st.integers(4, 12),
    x=st.floats(-0.02, 0.02),
)
def test_leibniz(i, j, k, x):
    u, v = _families[i], _families[j]
    eps = 2.0**-k
    c = Jet.coordinates(np.array([[x]]), 3)
    ju, jv, jp = u.jet(eps, c), v.jet(eps, c), product(u, v).jet(eps, c)
    for n in range(4):
        rule = sum(math.comb(n, r) * ju.derivative((r,)) * jv.derivative((n - r,)) for r in range(n + 1))
        got = jp.derivative((n,))
        assert np.allclose(got, rule, rtol=1e-8, atol=1e-8 * (1 + np.max(np.abs(rule))))


@pytest.mark.parametrize("u", _families[:5], ids=["delta", "heaviside", "gauss", "delta2", "wave"])
def test_finite_difference_agreement(u):
    rng = np.random.default_rng(1)
    eps = 2.0**-5
    pts = rng.uniform(-2 * eps, 2 * eps, size=(8, 1))
    assert check_derivatives(u, eps, pts, K=3, h=1e-4 * eps) < 1e-4


def test_support_sampling():
    for u in _families:
        assert check_support(u, G)


@settings(max_examples=60, deadline=None)
@given(i=st.integers(0, len(_families) - 1), y=st.sampled_from(["eps", "sqrt(eps)", "0.25", "1/log(1/eps)"]),
       x=st.sampled_from(["0", "0.1", "eps", "-sqrt(eps)"]))
def test_translation_covariance(i, y, x):
    u = _families[i]
    yp = pt(y)
    x0 = pt(x)
    lhs = eval_at_point(translate(u, yp), x0)
    rhs = eval_at_point(u, x0.shifted(yp))
    assert np.array_equal(lhs.samples, rhs.samples)


class TestLocalEquality:
    @pytest.mark.parametrize("u", _families, ids=lambda f: f.provenance)
    def test_reflexive(self, u):
        assert local_equality_test(u, u, pt("0")).equal

    def test_delta_vs_zero_at_zero(self):
        r = local_equality_test(delta, embed_smooth("0"), pt("0"))
        assert not r.equal and not any(row.passed for row in r.rows)

    def test_delta_far_away(self):
        assert local_equality_test(mollified_distribution("delta", 1.0), embed_smooth("0"), pt("0")).equal


class TestDerivativeBounds:
    def test_gaussian(self):
        r = derivative_bound_test(gauss, pt("0.3"))
        assert r.verdict == "Regular" and r.diagnostics["N_table"]["N"] == 0

    def test_delta_uniform_and_per_m_fail(self):
        assert derivative_bound_test(delta, pt("0")).verdict == "Singular"
        assert derivative_bound_test(delta, pt("0"), quantifier="per_m").verdict == "Singular"

    def test_pointwise(self):
        assert pointwise_ginf_test(embed_smooth("1 + x1 - 3 * x1^3"), pt("0.3")).verdict == "Regular"
        assert pointwise_ginf_test(delta, pt("0")).verdict == "Singular"
        assert pointwise_ginf_test(delta, pt("0.5")).verdict == "Regular"

    def test_slow_point_regular_on_deep_grid(self):
        assert derivative_bound_test(delta, pt("1/log(1/eps)", A)).verdict == "Regular"

    def test_2d_delta(self):
        d2 = mollified_distribution("delta", 0.0, d=2)
        x0 = GeneralizedPoint.constant(G, [0.0, 0.0])
        assert derivative_bound_test(d2, x0, M_max=2, A_max=3).verdict == "Singular"
        x1 = GeneralizedPoint.constant(G, [0.5, 0.0])
        assert derivative_bound_test(d2, x1, M_max=2, A_max=3).verdict == "Regular"


def test_not_compact():
    with pytest.raises(NotCompact):
        GeneralizedPoint.from_exprs(["1/eps"], G, box=[[-10, 10]])
