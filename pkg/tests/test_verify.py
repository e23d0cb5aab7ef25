import math

from rfmcf import verify as V


def test_order_rule():
    ok = V.refinement_row("s", "second order", 4e-4, 1e-4, 1e-3)
    assert ok.passed and math.isclose(ok.order, 2.0)
    slow = V.refinement_row("s", "first order", 2e-4, 1e-4, 1e-3)
    assert not slow.passed


def test_floor_rule():
    # spectral methods reach roundoff at both levels; the order is then meaningless
    row = V.refinement_row("s", "roundoff", 1e-13, 3e-13, 1e-3, floor=1e-10)
    assert row.passed and row.order < 0


def test_tolerance_rule():
    assert not V.refinement_row("s", "big", 4e-2, 1e-2, 1e-3).passed


def test_value_row_and_table():
    rows = [V.value_row("s", "a", 1e-9, 1e-6), V.value_row("s", "b", 1e-3, 1e-6)]
    assert [r.passed for r in rows] == [True, False]
    table = V.format_table(rows)
    assert "PASS" in table and "FAIL" in table and "1/2 checks passed" in table


def test_hypersurface_suite_passes():
    rows = V.hypersurface_suite()
    assert rows and all(r.passed for r in rows)
