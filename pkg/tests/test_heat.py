import math

import numpy as np
import pytest
from scipy.integrate import quad

from rfmcf import backgrounds as B
from rfmcf import heat as Ht
from rfmcf.errors import PositivityLoss


def test_flat_ball_constant_data_budget(flat3):
    budgets = []
    for M in (24, 48):
        sol = Ht.conjugate_heat_solve(flat3, 1.0, 1.0, (0.0, 0.1), M=M, boundary="fixed")
        assert np.max(np.abs(sol.U[0] - 1)) > 1e-2
        assert np.max(sol.bc_residual) < 1e-10
        budgets.append(sol.budget_residual / sol.mass[-1])
    assert budgets[1] < 1e-3


def test_translating_closed_form_residual(rng):
    bg = B.get_background("translating-steady")
    x = rng.uniform(-2, 2, size=(20, 2))
    assert np.max(np.abs(Ht.closed_form_heat_residual(bg, x, 0.4))) < 1e-12


def test_linearity(cigar):
    ub = lambda r: np.exp(-0.3 * r ** 2)
    s1 = Ht.conjugate_heat_solve(cigar, 1.0, ub, (0.0, 0.1), M=24, n_out=3)
    s2 = Ht.conjugate_heat_solve(cigar, 1.0, lambda r: 2 * ub(r), (0.0, 0.1), M=24, n_out=3)
    assert np.allclose(s2.U, 2 * s1.U, rtol=1e-13)


def test_positivity():
    with pytest.raises(PositivityLoss):
        Ht.conjugate_heat_solve(B.get_background("flat-static", n=3), 1.0, -1.0, (0.0, 0.1))


def test_mcf_radius_flat_sphere(flat3):
    rho, rho_dot = Ht.mcf_radius(flat3, 2.0, (0.0, 0.5))
    for t in (0.0, 0.25, 0.5):
        assert rho(t) == pytest.approx(2 * math.sqrt(1 - t), rel=1e-9)
        assert rho_dot(t) == pytest.approx(-1 / math.sqrt(1 - t), rel=1e-7)


def _self_similar_constant():
    val, _ = quad(lambda y: (3 - y * y / 4) * math.exp(-y * y / 4) * y * y, 0, 2)
    return (4 * math.pi) ** -1.5 * 4 * math.pi * val


def test_self_similar_weighted_action(flat3):
    C = _self_similar_constant()
    sol = Ht.conjugate_heat_solve(flat3, 2.0, Ht.gaussian_terminal(3, 0.5), (0.0, 0.5), M=48)
    rows = Ht.modified_flow_dI(sol)
    for r in rows:
        assert r.I_inf == pytest.approx(C / (1 - r.t), rel=1e-6)
        assert r.res_pointwise < 1e-6


@pytest.mark.parametrize("name,rho,win", [("cigar-steady", 1.0, (0.0, 0.2)),
                                          ("round-shrinking-sphere", 1.0, (-1.0, -0.8))])
def test_dI_identity_second_order(name, rho, win):
    bg = B.get_background(name)
    ub = lambda r: np.exp(-0.3 * r ** 2)
    res = []
    for M, n_out in ((24, 11), (48, 21)):
        rows = Ht.modified_flow_dI(Ht.conjugate_heat_solve(bg, rho, ub, win, M=M, n_out=n_out))
        mid = rows[(n_out - 1) // 2]
        res.append((mid.res_boundary_form, mid.res_harnack_form))
        assert max(r.res_pointwise for r in rows) < 1e-6
    for c, f in zip(*res):
        assert math.log2(c / f) >= 1.95
