"""Reserve-provision and set-maximization application builders."""

import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose

from adjrobust.apps import (
    bid_curve,
    bid_curve_csv,
    build_reserve,
    build_robustness,
    default_building,
    default_reserve,
    default_robustness,
    ingest_prices,
    reserve_family,
    reserve_series_csv,
    reserve_summary,
)
from adjrobust.reformulate import build_synthesis, solve_counterpart


def solve_reserve(rp):
    spb, fam, lam = build_reserve(rp)
    return spb, fam, solve_counterpart(build_synthesis(spb, fam, lam))


def test_default_building_is_stable():
    sys = default_building()
    assert max(abs(np.linalg.eigvals(sys.A))) < 1.0
    # the decoupled surrogate removes all inter-stage dynamics
    assert np.all(default_building(decoupled=True).A == 0.0)


def test_zero_reward_offers_no_reserve():
    rp = default_reserve(N=6, lam=0.0)
    _, _, sol = solve_reserve(rp)
    assert sol.ok
    total, _ = reserve_summary(rp, sol)
    assert total <= 1e-6


def test_high_reward_fills_every_stage():
    rp = default_reserve(N=6, lam=60.0, decoupled=True)  # above all prices
    _, _, sol = solve_reserve(rp)
    assert sol.ok
    assert all(Yk[0, 0] > 1e-6 for Yk in sol.Y)


def test_threshold_behavior_on_decoupled_surrogate():
    # 34.0 sits strictly between price levels, avoiding degenerate ties
    rp = default_reserve(N=12, lam=34.0, decoupled=True)
    _, _, sol = solve_reserve(rp)
    assert sol.ok
    for k, Yk in enumerate(sol.Y):
        if Yk[0, 0] > 1e-6:
            assert rp.lam > rp.prices[k], f"stage {k}"


def test_capacity_modes():
    sym = reserve_family("symmetric")
    assert sym.shaping.offset == "zero"
    assert_allclose(sym.primitive.extreme_points.ravel(), [-1.0, 1.0])

    asym = reserve_family("asymmetric")
    assert asym.shaping.offset == "box"

    pos = reserve_family("positive-only")
    assert_allclose(np.sort(pos.primitive.extreme_points.ravel()), [0.0, 1.0])
    neg = reserve_family("negative-only")
    assert_allclose(np.sort(neg.primitive.extreme_points.ravel()), [-1.0, 0.0])

    with pytest.raises(ValueError, match="mode"):
        reserve_family("sideways")


def test_positive_only_band_sits_above_zero():
    rp = default_reserve(N=6, lam=60.0, mode="positive-only", decoupled=True)
    _, fam, sol = solve_reserve(rp)
    assert sol.ok
    # shaped set is [y, y + Y] with y = 0: only upward deviations offered
    for Yk, yk in zip(sol.Y, sol.y):
        assert yk[0] == 0.0
        assert Yk[0, 0] >= -1e-9


def test_reserve_matching_is_exact():
    rp = default_reserve(N=6, lam=60.0)
    spb, fam, sol = solve_reserve(rp)
    assert sol.ok
    rng = np.random.default_rng(12)
    n_act, n_u = rp.n_act, 2 * rp.n_act
    for _ in range(200):
        # random demand inside the offered band w_k in [-Y_k, Y_k]
        s = rng.uniform(-1.0, 1.0, size=rp.N)
        w = np.array([sol.Y[k][0, 0] * s[k] + sol.y[k][0] for k in range(rp.N)])
        u = sol.P @ s + sol.p
        for k in range(rp.N):
            du = u[k * n_u + n_act : (k + 1) * n_u]
            assert abs(rp.eta @ du - w[k]) <= 1e-6


def test_bid_curve_zero_and_monotone():
    rp = default_reserve(N=6)
    rows = bid_curve(rp, [0.0])
    assert rows[0].status == "optimal"
    assert rows[0].total_reserve <= 1e-6

    grid = [10.0, 30.0, 60.0]
    rows = bid_curve(rp, grid)
    totals = [r.total_reserve for r in rows]
    assert all(r.status == "optimal" for r in rows)
    assert all(
        b >= a - 1e-4 * (1.0 + abs(a)) for a, b in zip(totals, totals[1:])
    )

    csv = bid_curve_csv(rows)
    assert csv.splitlines()[0] == "lam,total_reserve,nominal_energy,status"
    assert len(csv.splitlines()) == 4


def test_bid_curve_saturates_at_free_energy_maximum():
    # with zero prices the c = 0 maximum is already reached at any lam > 0
    rp = default_reserve(N=6, prices=np.zeros(6))
    rows = bid_curve(rp, [1.0])
    top = rows[0].total_reserve

    rp_priced = default_reserve(N=6)
    rows = bid_curve(rp_priced, [1e4])
    assert_allclose(rows[0].total_reserve, top, rtol=1e-5)


def test_nominal_energy_rises_with_the_reserve():
    rp = default_reserve(N=6)
    rows = bid_curve(rp, [0.0, 60.0])
    base, high = rows
    rise = high.nominal_energy - base.nominal_energy
    assert high.total_reserve > 1.0
    assert abs(rise - high.total_reserve) <= 0.05 * high.total_reserve


def test_bid_curve_records_failures_per_row():
    rp = default_reserve(N=2)
    bad = dataclasses.replace(rp, comfort_lo=np.full(2, 5.0))  # lo > hi: infeasible
    rows = bid_curve(bad, [1.0])
    assert rows[0].status != "optimal"
    assert np.isnan(rows[0].total_reserve)


def test_reserve_series_csv(tmp_path):
    rp = default_reserve(N=4, lam=60.0, decoupled=True)
    _, _, sol = solve_reserve(rp)
    text = reserve_series_csv(sol)
    lines = text.splitlines()
    assert lines[0] == "stage,capacity"
    assert len(lines) == 5


def test_ingest_prices(tmp_path):
    path = tmp_path / "prices.csv"
    path.write_text("hour,price\n" + "".join(f"{h},30\n" for h in range(24)))
    assert_allclose(ingest_prices(path), np.full(24, 30.0))

    shaped = [20 + (h % 7) for h in range(24)]
    path.write_text("hour,price\n" + "".join(f"{h},{p}\n" for h, p in enumerate(shaped)))
    assert_allclose(ingest_prices(path), shaped)

    rows = [f"{h},30\n" for h in range(24) if h != 13]
    path.write_text("hour,price\n" + "".join(rows))
    with pytest.raises(ValueError, match="13"):
        ingest_prices(path)


def test_robustness_problem_guards():
    with pytest.raises(ValueError, match="family"):
        default_robustness("octagon")
    spb, fam, lam = build_robustness(default_robustness("rectangle"))
    assert spb.N == 1 and spb.n_w == 2 and lam == 1.0
    assert np.all(spb.c == 0.0)  # pure set maximization carries no cost
