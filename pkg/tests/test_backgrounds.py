import numpy as np
import pytest

from rfmcf import backgrounds as B
from rfmcf import tensor as T
from rfmcf.errors import BadParams, UnknownBackground


def test_flat_plane(flat2):
    assert flat2.n == 2 and flat2.flat
    assert np.allclose(flat2.metric(np.zeros(2), 0.0), np.eye(2))


def test_gaussian_potential_value():
    bg = B.get_background("gaussian-shrinker", n=3)
    # |x| = 2 at tau = 1 gives |x|^2 / 4 tau = 1
    assert bg.potential(np.array([2.0, 0.0, 0.0]), -1.0) == pytest.approx(1.0)
    assert bg.potential(np.array([0.0, 1.2, 1.6]), -1.0) == pytest.approx(1.0)


def test_cigar_origin_scalar(cigar):
    assert T.curvature(cigar, np.zeros(2), 0.0, order=2).scalar == pytest.approx(4.0)


def test_selfcheck_flat():
    rep = B.catalog_selfcheck("flat-static", n_samples=100)
    assert rep["ricci_flow"] == 0 and rep["soliton_tensor"] == 0 and rep["soliton_scalar"] == 0
    assert not rep["failures"]


@pytest.mark.parametrize("name", B.catalog_names())
def test_selfcheck_catalog(name):
    rep = B.catalog_selfcheck(name, n_samples=100)
    assert not rep["failures"]
    for key in ("ricci_flow", "soliton_tensor", "soliton_scalar", "scalar_curvature"):
        assert rep[key] < 1e-7, (key, rep[key])


def test_gaussian_shrinker_taus():
    bg = B.get_background("gaussian-shrinker", n=2)
    x = np.random.default_rng(0).uniform(-2, 2, size=(100, 2))
    for tau in (0.5, 1.0, 2.0):
        assert max(T.soliton_residuals(bg, x, -tau)) < 1e-7


def test_round_sphere_ricci_flow():
    bg = B.get_background("round-shrinking-sphere", n=3)
    x = np.random.default_rng(1).uniform(-2, 2, size=(50, 3))
    for tau in (0.25, 1.0, 3.0):
        assert T.ricci_flow_residual(bg, x, -tau) < 1e-7


def test_time_domains():
    assert B.get_background("gaussian-shrinker").time_domain[1] == 0.0
    assert B.get_background("cigar-line").n == 3


def test_unknown_background_and_params():
    with pytest.raises(UnknownBackground):
        B.get_background("nope")
    with pytest.raises(BadParams):
        B.get_background("flat-static", n=5)
    with pytest.raises(BadParams):
        B.get_background("cigar-steady", n=2)


def test_soliton_map_is_isometry(cigar):
    # the pullback family g(t) = phi_t^* g(0): metric at x equals dphi^T g0(phi(x)) dphi
    if cigar.soliton_map is None:
        pytest.skip("no soliton map")
    x = np.array([0.7, -0.4])
    t = 0.6
    h = 1e-6
    phi = cigar.soliton_map
    J = np.stack([(phi(x + h * e, t) - phi(x - h * e, t)) / (2 * h) for e in np.eye(2)], axis=1)
    pulled = J.T @ cigar.metric(phi(x, t), 0.0) @ J
    assert np.allclose(pulled, cigar.metric(x, t), atol=1e-8)
