import math

import numpy as np
import pytest

from gwave.genfun import (
    GeneralizedDirection,
    embed_smooth,
    mollified_distribution,
    plane_wave,
    scale,
    translate,
)
from gwave.microfft import (
    CutoffFamily,
    FastTube,
    FrequencyRegion,
    PreconditionViolated,
    ResolutionExceeded,
    ScaledCutoff,
    StandardCone,
    cone_enlargement_check,
    compute_slices,
    default_schedule,
    dilation_oracle,
    oracle_error,
    oracle_window,
    region_decay_scan,
    region_membership,
    region_sup,
    scan_region,
    weighted_moderate_scan,
    windowed_spectrum,
)
from gwave.netcalc import (
    EpsilonGrid,
    ScaleKind,
    classify_scale,
    growth_exponent,
    is_negligible,
)

ANALYSIS = EpsilonGrid.analysis()
SHORT = EpsilonGrid.geometric(4, 10, 0.5)


def delta(c=0.0, d=1):
    return mollified_distribution("delta", [c] * d if d > 1 else c, d)


# --- spectra --------------------------------------------------------------------

@pytest.mark.parametrize("u", [
    delta(),
    delta(0.2),
    embed_smooth("exp(-x1^2)"),
    plane_wave(),
    mollified_distribution("heaviside", 0.0),
], ids=["delta", "delta-shift", "gauss", "wave", "heaviside"])
@pytest.mark.parametrize("eps", [2.0**-4, 2.0**-9])
def test_parseval(u, eps):
    cut = ScaledCutoff.scheduled([0.0], 1)
    sl = windowed_spectrum(u, cut, eps, )
    assert sl.parseval_rel < 1e-6


@pytest.mark.parametrize("u", [
    delta(),
    delta(0.3),
    mollified_distribution("dirac_derivative", 0.1),
    plane_wave(),
    translate(plane_wave(), 0.25),
    scale(delta(), "2 + eps"),
    delta(0.0, 2),
    plane_wave(direction=("cos(1/log(1/eps))", "sin(1/log(1/eps))"), d=2),
], ids=["delta", "delta-0.3", "ddelta", "wave", "wave-shift", "scaled", "delta2d", "rot2d"])
@pytest.mark.parametrize("eps", [2.0**-5, 2.0**-11])
def test_oracle(u, eps):
    assert oracle_error(u, eps) < 1e-3


def test_oracle_needs_closed_form():
    with pytest.raises(ValueError):
        oracle_error(mollified_distribution("heaviside", 0.0), 0.01)
    assert oracle_window(mollified_distribution("heaviside", 0.0), 0.01) is None


@pytest.mark.parametrize("m2", [1, 3, 6])
@pytest.mark.parametrize("d", [1, 2])
def test_dilation_identity(m2, d):
    eps = 2.0**-8
    cut = ScaledCutoff.of_order([0.0] * d, d, m2)
    fam = CutoffFamily(cut)
    w = ScaledCutoff.standard([0.0] * d, d, 2.0 * math.sqrt(d) * cut.width(eps) * 1.0001)
    sl = windowed_spectrum(fam, w, eps)
    z, v = sl.zeta(), sl.flat()
    idx = np.arange(0, z.shape[0], max(1, z.shape[0] // 2000))
    o = dilation_oracle(eps, m2, z[idx], d)
    assert np.max(np.abs(v[idx] - o)) / np.max(np.abs(o)) < 1e-6


def test_zero_family_slice_is_empty():
    cut = ScaledCutoff.standard([5.0], 1, 0.3)
    sl = windowed_spectrum(delta(), cut, 0.01)
    assert sl.empty
    assert region_sup(sl, FastTube([1.0], 3)).status == "zero-slice"


def test_plane_wave_peak_near_carrier():
    eps = 2.0**-10
    sl = windowed_spectrum(plane_wave(), ScaledCutoff.scheduled([0.0], 1), eps)
    v = np.abs(sl.flat())
    z = sl.zeta()[int(np.argmax(v))]
    assert np.linalg.norm(z) <= sl.spacing
    assert sl.carrier[0] == pytest.approx(1.0 / eps)


def test_precision_guard():
    u = mollified_distribution("dirac_derivative", 0.2)
    with pytest.raises(ResolutionExceeded):
        windowed_spectrum(u, ScaledCutoff.standard([0.2], 1, 0.3), 2.0**-64)


def test_slice_csv(tmp_path):
    sl = windowed_spectrum(delta(), ScaledCutoff.standard([0.0], 1, 0.3), 0.1)
    p = tmp_path / "s.csv"
    sl.dump_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0].split(",")[0].startswith("xi")
    assert len(lines) == sl.n_fft + 1


def test_resolution_ceiling_becomes_nan():
    grid = EpsilonGrid.geometric(4, 30)
    S = compute_slices(mollified_distribution("heaviside", 0.0), ScaledCutoff.standard([0.0], 1, 0.3), grid)
    assert S.ceilings > 0
    net = scan_region(S, FastTube([1.0], 2)).net
    assert np.isnan(net.magnitude[-1]) and np.isfinite(net.magnitude[0])


# --- regions --------------------------------------------------------------------

def test_membership_boundary_and_examples():
    eps, m = 2.0**-12, 4
    tube = FastTube([1.0, 0.0], m)
    floor = eps ** (-1.0 / m)
    assert region_membership([floor, 0.0], eps, tube)
    assert not region_membership([floor * 0.999, 0.0], eps, tube)
    assert not region_membership([-floor * 10, 0.0], eps, tube)
    a = 0.5 * eps ** (1.0 / m)
    assert region_membership([100 * math.cos(a), 100 * math.sin(a)], eps, tube)
    b = 2.0 * eps ** (1.0 / m)
    assert not region_membership([100 * math.cos(b), 100 * math.sin(b)], eps, tube)
    with pytest.raises(PreconditionViolated):
        region_membership([0.0, 0.0], eps, tube)


def test_membership_tiny_angle_no_cancellation():
    eps = 2.0**-100
    tube = FastTube([1.0, 0.0], 1)  # angular radius 2^-100
    kappa = np.array([2.0**100, 0.0])
    zeta = np.array([[0.0, 0.4], [0.0, 1.5]])
    ok = tube.mask(zeta, kappa, eps)
    assert ok.tolist() == [True, False]


def test_standard_cone_floor():
    cone = StandardCone([0.0, 1.0], 0.3, floor=lambda e: 10.0)
    assert region_membership([0.0, 11.0], 0.1, cone)
    assert not region_membership([0.0, 9.0], 0.1, cone)
    assert not region_membership([1.0, 1.0], 0.1, cone)


def test_cone_enlargement_examples():
    assert cone_enlargement_check([1.0, 0.0], 0.1, [[1.0, 0.0]], [[1.0, 0.1]]) == (True, None)
    with pytest.raises(PreconditionViolated):
        cone_enlargement_check([1.0, 0.0], 0.6, [[1.0, 0.0]], [[1.0, 0.0]])
    with pytest.raises(PreconditionViolated):
        cone_enlargement_check([1.0, 0.0], 0.1, [[0.0, 1.0]], [[0.0, 1.0]])
    with pytest.raises(PreconditionViolated):
        cone_enlargement_check([1.0, 0.0], 0.1, [[1.0, 0.0]], [[1.0, 0.5]])


def test_cone_enlargement_random():
    rng = np.random.default_rng(7)
    n = 10_000
    r = rng.uniform(1e-3, 0.5, n)
    a0 = rng.uniform(0, 2 * np.pi, n)
    x0 = np.stack([np.cos(a0), np.sin(a0)], axis=1)
    # zeta in the inner cone: chord distance <= r
    da = 2 * np.arcsin(np.clip(0.5 * r * rng.uniform(0, 1, n), 0, 1)) * rng.choice([-1, 1], n)
    rho = 10 ** rng.uniform(-3, 3, n)
    zeta = rho[:, None] * np.stack([np.cos(a0 + da), np.sin(a0 + da)], axis=1)
    b = rng.uniform(0, 2 * np.pi, n)
    eta = zeta + (r * rho * rng.uniform(0, 1, n))[:, None] * np.stack([np.cos(b), np.sin(b)], axis=1)
    ok, idx = cone_enlargement_check(x0, r, zeta, eta)
    assert ok, idx


# --- scans ------------------------------------------------------------------------

def test_gaussian_rapid_decay_every_tube():
    u = embed_smooth("exp(-x1^2)")
    for th in ([1.0], [-1.0]):
        for m in (1, 3, 6):
            r = region_decay_scan(u, ScaledCutoff.scheduled([0.1], 1), FastTube(th, m), m, ANALYSIS)
            assert is_negligible(r.net, 6).order >= m
            assert r.empty == 0


def test_delta_no_decay_at_origin():
    r = region_decay_scan(delta(), ScaledCutoff.scheduled([0.0], 1), FastTube([1.0], 2), 2, ANALYSIS)
    assert is_negligible(r.net, 6).order == 0


def test_plane_wave_direction_split():
    S = compute_slices(plane_wave(), ScaledCutoff.scheduled([0.0], 1), ANALYSIS)
    fwd = is_negligible(scan_region(S, FastTube([1.0], 3)).net, 6)
    back = is_negligible(scan_region(S, FastTube([-1.0], 3)).net, 6)
    assert fwd.order == 0 and back.order == 6


def test_weighted_moderate_examples():
    cut = ScaledCutoff.standard([0.0], 1, 0.3)
    cone = StandardCone([1.0], 0.3)
    for m in (1, 3):
        v, scan = weighted_moderate_scan(delta(), cut, cone, m, 10, SHORT)
        assert growth_exponent(scan.net) == pytest.approx(m, abs=0.25)
        assert v.kind is ScaleKind.MODERATE
        v, scan = weighted_moderate_scan(embed_smooth("exp(-x1^2)"), cut, cone, m, 10, SHORT)
        assert v.order == 0


def test_cutoff_order_stability():
    u = plane_wave()
    orders = []
    for k in (12, 14, 18):
        S = compute_slices(u, ScaledCutoff.of_order([0.0], 1, k), ANALYSIS)
        orders.append([is_negligible(scan_region(S, FastTube(th, 3)).net, 6).order for th in ([1.0], [-1.0])])
    assert all(o == orders[0] for o in orders)


def test_scheduled_width_is_slow_infinitesimal():
    cut = ScaledCutoff.scheduled([0.0], 1, 6)
    k = default_schedule(6)
    assert k(2.0**-2) == 12 and k(2.0**-4) == 13 and k(2.0**-128) == 16
    v = classify_scale(cut.width_net(ANALYSIS))
    assert v.kind is ScaleKind.SLOW_INFINITESIMAL


def test_generalized_tube_axis():
    th = GeneralizedDirection.from_exprs(["cos(1/log(1/eps))", "sin(1/log(1/eps))"], ANALYSIS)
    tube = FastTube(th, 2)
    eps = ANALYSIS.values[-1]
    assert np.allclose(tube.params(eps)[0], th.at(eps))


class _ThinRay(FrequencyRegion):
    """Angular radius far below one lattice cell at every radius in the band."""

    def __init__(self, angle, floor):
        self.axis = np.array([math.cos(angle), math.sin(angle)])
        self.floor = floor

    def params(self, eps):
        return self.axis, 1e-9, self.floor


def test_undilated_region_reports_empty():
    sl = windowed_spectrum(embed_smooth("exp(-x1^2-x2^2)", d=2), ScaledCutoff.standard([0.0, 0.0], 2, 0.3), 0.25)
    ray = _ThinRay(0.5 * math.pi / 7.3, 0.5 * sl.halfwidth)
    assert region_sup(sl, ray, dilate=False).status == "empty-region"
    assert region_sup(sl, ray).status == "ok"
