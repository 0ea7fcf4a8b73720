"""Fast invariant suite behind ``gwave selftest``."""
from __future__ import annotations

import math
import traceback

import numpy as np

from . import bump
from .genfun import (
    GeneralizedDirection,
    GeneralizedPoint,
    check_derivatives,
    embed_smooth,
    mollified_distribution,
    plane_wave,
)
from .microfft import (
    CutoffFamily,
    ScaledCutoff,
    cone_enlargement_check,
    dilation_oracle,
    oracle_error,
    windowed_spectrum,
)
from .netcalc import EpsilonGrid, ScalarNet, ScaleKind, classify_scale, fit_scale_exponent
from .netexpr import parse, pretty
from .report import REGULAR, SINGULAR
from .wavefront import refined_regularity_test


def _classifier():
    g = EpsilonGrid.default()
    worst = 0.0
    for p in (-3, -2, -1, -0.5, 0.5, 1, 2, 3):
        a, _ = fit_scale_exponent(ScalarNet(g, g.values**p))
        worst = max(worst, abs(a + p))
    slow = classify_scale(ScalarNet(g, g.log_inv)).kind
    slow_inf = classify_scale(ScalarNet(g, 1.0 / g.log_inv)).kind
    ok = worst < 1e-9 and slow is ScaleKind.SLOW_SCALE and slow_inf is ScaleKind.SLOW_INFINITESIMAL
    return ok, f"max exponent error {worst:.2e}, log -> {slow.value}, 1/log -> {slow_inf.value}"


def _mollifier():
    m = bump.psi_mass()
    return abs(m - 1) < 1e-10, f"mass {m!r}"


def _parseval():
    worst = 0.0
    cases = [
        (mollified_distribution("delta", 0.0), ScaledCutoff.scheduled([0.0], 1)),
        (mollified_distribution("heaviside", 0.0), ScaledCutoff.standard([0.0], 1, 0.3)),
        (plane_wave(), ScaledCutoff.scheduled([0.0], 1)),
        (embed_smooth("exp(-x1^2-x2^2)", d=2), ScaledCutoff.standard([0.0, 0.0], 2, 0.3)),
    ]
    for u, cut in cases:
        for eps in (2.0**-4, 2.0**-8):
            worst = max(worst, windowed_spectrum(u, cut, eps).parseval_rel)
    return worst < 1e-6, f"max relative Parseval defect {worst:.2e}"


def _oracles():
    fams = [
        mollified_distribution("delta", 0.0),
        mollified_distribution("dirac_derivative", 0.1),
        plane_wave(),
        plane_wave(direction=("cos(1/log(1/eps))", "sin(1/log(1/eps))"), d=2),
    ]
    worst = max(oracle_error(u, eps) for u in fams for eps in (2.0**-5, 2.0**-9))
    return worst < 1e-3, f"max relative oracle error {worst:.2e}"


def _dilation():
    worst = 0.0
    eps = 2.0**-8
    for d in (1, 2):
        for m2 in (2, 6):
            cut = ScaledCutoff.of_order([0.0] * d, d, m2)
            w = ScaledCutoff.standard([0.0] * d, d, 2.0 * math.sqrt(d) * cut.width(eps) * 1.0001)
            sl = windowed_spectrum(CutoffFamily(cut), w, eps)
            z, v = sl.zeta(), sl.flat()
            idx = np.arange(0, z.shape[0], max(1, z.shape[0] // 1000))
            o = dilation_oracle(eps, m2, z[idx], d)
            worst = max(worst, float(np.max(np.abs(v[idx] - o)) / np.max(np.abs(o))))
    return worst < 1e-3, f"max relative error {worst:.2e}"


def _cone(n: int = 10_000, seed: int = 1):
    rng = np.random.default_rng(seed)
    r = rng.uniform(1e-3, 0.5, n)
    a0 = rng.uniform(0, 2 * np.pi, n)
    x0 = np.stack([np.cos(a0), np.sin(a0)], axis=1)
    da = 2 * np.arcsin(0.5 * r * rng.uniform(0, 1, n)) * rng.choice([-1, 1], n)
    rho = 10 ** rng.uniform(-3, 3, n)
    zeta = rho[:, None] * np.stack([np.cos(a0 + da), np.sin(a0 + da)], axis=1)
    b = rng.uniform(0, 2 * np.pi, n)
    eta = zeta + (r * rho * rng.uniform(0, 1, n))[:, None] * np.stack([np.cos(b), np.sin(b)], axis=1)
    ok, idx = cone_enlargement_check(x0, r, zeta, eta)
    return ok, f"{n} trials" + ("" if ok else f", first violation at {idx}")


def _jets():
    err = check_derivatives(embed_smooth("exp(-x1^2) * sin(3*x1)"), 0.1, np.linspace(-1, 1, 9)[:, None], K=2)
    return err < 1e-4, f"max finite-difference mismatch {err:.2e}"


def _expressions():
    texts = ["eps^2 * log(1/eps)", "-(x1 + 2)^3 / sqrt(1 + eps)", "pow(eps, 1/3) - cos(x1*x1)"]
    ok = all(pretty(parse(pretty(parse(t, 1)), 1)) == pretty(parse(t, 1)) for t in texts)
    return ok, "print/parse roundtrip"


def _verdicts():
    g = EpsilonGrid.analysis()
    u = mollified_distribution("delta", 0.0)
    plus = GeneralizedDirection.constant(g, [1.0])
    at0 = refined_regularity_test(u, GeneralizedPoint.constant(g, [0.0]), plus).verdict
    at5 = refined_regularity_test(u, GeneralizedPoint.constant(g, [0.5]), plus).verdict
    return at0 == SINGULAR and at5 == REGULAR, f"delta: ({at0} at 0, {at5} at 0.5)"


CHECKS = [
    ("scale classifier", _classifier),
    ("mollifier mass", _mollifier),
    ("Parseval", _parseval),
    ("Fourier oracles", _oracles),
    ("dilation identity", _dilation),
    ("cone enlargement", _cone),
    ("jet derivatives", _jets),
    ("expression roundtrip", _expressions),
    ("delta verdicts", _verdicts),
]


def run_selftest() -> list:
    out = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as e:  # a crashing check is a failed check
            ok, detail = False, "".join(traceback.format_exception_only(type(e), e)).strip()
        out.append({"name": name, "passed": bool(ok), "detail": detail})
    return out
