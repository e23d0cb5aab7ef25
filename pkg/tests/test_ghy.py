import math

import numpy as np
import pytest

from rfmcf import ghy as G
from rfmcf.errors import DegenerateMetric, NotMeasurePreserving


def test_clenshaw_curtis_exact_for_polynomials():
    w = G.clenshaw_curtis(16)
    x = np.cos(np.pi * np.arange(17) / 16)
    for p in range(0, 17):
        assert w @ x ** p == pytest.approx(2 / (p + 1) if p % 2 == 0 else 0.0, abs=1e-14)


def test_gregory_weights_fourth_order():
    errs = []
    for M in (17, 33):
        x = np.linspace(0, 1, M)
        errs.append(abs(G.gregory_weights(M, x[1] - x[0]) @ np.exp(x) - (math.e - 1)))
    assert errs[0] / errs[1] > 14


@pytest.mark.parametrize("radius", [0.3, 1.0, 4.0])
@pytest.mark.parametrize("method", ["chebyshev", "fd"])
def test_flat_disk_gauss_bonnet(radius, method):
    dom = G.RadialDomain.ball(2, radius, 32, method=method)
    assert G.ghy_action(dom) == pytest.approx(4 * math.pi, abs=1e-6)


def test_curved_disk_gauss_bonnet():
    dom = G.RadialDomain.conformal(2, 1.3, lambda r: np.exp(0.3 * r ** 2) / (1 + r ** 2), 32)
    assert G.ghy_action(dom) == pytest.approx(4 * math.pi, abs=1e-10)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_flat_three_ball(r):
    assert G.ghy_action(G.RadialDomain.ball(3, r, 32)) == pytest.approx(16 * math.pi * r,
                                                                         rel=1e-12)


def test_flat_annulus_euler_characteristic_zero():
    dom = G.RadialDomain.annulus(2, 0.5, 1.5, 32)
    assert abs(G.ghy_action(dom)) < 1e-10


def test_weighted_equals_ghy_without_potential():
    dom = G.RadialDomain.conformal(3, 1.0, lambda r: 1 + 0.2 * r ** 2, 32)
    assert G.weighted_action(dom) == pytest.approx(G.ghy_action(dom), rel=1e-13)


def test_degenerate_metric():
    with pytest.raises(DegenerateMetric):
        G.RadialDomain.ball(2, 1.0, 16, q=lambda r: r * 0 - 1.0)


def test_zero_variation():
    dom = G.RadialDomain.ball(3, 1.0, 24, f=lambda r: r ** 2)
    var = G.VariationField.conformal(dom, lambda r: 0 * r)
    for which in ("ghy", "weighted"):
        rep = G.variation_check(dom, var, which)
        assert rep.formula == 0 and abs(rep.fd) < 1e-10


def test_conformal_variation_flat_unit_ball():
    dom = G.RadialDomain.ball(3, 1.0, 32)
    var = G.VariationField.conformal(dom, lambda r: np.cos(r) + r ** 2)
    for which in ("ghy", "weighted"):
        assert G.variation_check(dom, var, which).relative < 1e-5


def _bump(r, c=0.5, w=0.35):
    z = ((r - c) / w) ** 2
    return np.where(z < 1, np.exp(-1 / np.maximum(1e-300, 1 - z)), 0.0)


def test_lie_derivative_variations():
    dom = G.RadialDomain.conformal(3, 1.0, lambda r: 1 + 0.2 * r ** 2, 48,
                                   f=lambda r: 0.3 * r ** 2)
    xi = lambda r: r * _bump(r)
    # moving (g, f) together along a diffeomorphism leaves the weighted action fixed
    diffeo = G.VariationField.lie_derivative(dom, xi, "diffeo")
    dI = G.fd_derivative(lambda e: G.weighted_action(G.perturbed(dom, diffeo, e)))
    assert abs(dI) < 1e-5
    # with the measure-preserving h = v/2 the derivative is generally nonzero but matches
    measure = G.VariationField.lie_derivative(dom, xi, "measure")
    rep = G.variation_check(dom, measure, "weighted")
    assert rep.relative < 1e-5 and abs(rep.formula) > 1e-3


def test_random_variations_pointwise():
    from rfmcf.verify import random_variation_cases
    for dom, var in random_variation_cases(count=6, seed=3):
        for which in ("ghy", "weighted"):
            rep = G.variation_check(dom, var, which)
            assert rep.relative < 1e-5
        assert max(rep.sub.values()) < 1e-4


def test_weighted_needs_measure_preserving():
    dom = G.RadialDomain.ball(3, 1.0, 24)
    var = G.VariationField.conformal(dom, lambda r: 1 + r ** 2, h=lambda r: 0 * r)
    with pytest.raises(NotMeasurePreserving):
        G.variation_check(dom, var, "weighted")


def test_boundary_terms_flat_ball():
    dom = G.RadialDomain.ball(3, 2.0, 24)
    (bt,) = G.boundary_terms(dom, G.radial_geometry(dom))
    assert bt["kappa"] == pytest.approx(0.5) and bt["H"] == pytest.approx(1.0)
    assert bt["area"] == pytest.approx(16 * math.pi)
    dom = G.RadialDomain.annulus(3, 1.0, 2.0, 24)
    inner = [b for b in G.boundary_terms(dom, G.radial_geometry(dom)) if b["sigma"] == 1][0]
    assert inner["H"] == pytest.approx(-2.0)
