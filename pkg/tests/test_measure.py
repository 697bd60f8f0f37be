import cmath
import math

import numpy as np
import pytest

from macsest.grid import AngleGrid, grid_value, unflatten
from macsest.measure import (
    MeasurementOperator,
    MeasurementPlan,
    OperatorMode,
    Setup,
    cross_points,
    edge_points,
    effective_coherence_1d,
    first_null,
    gen_cross,
    gen_edge,
    gen_random,
    gen_random_walk,
    gen_upa,
    ideal_sinc_coherence,
    main_lobe_halfwidth,
    mutual_coherence_column,
    spacing_for_measurements,
)


def entry_oracle(plan, n, N):
    """Sensing-matrix entry straight from the phase formula, scalar arithmetic only."""
    g = AngleGrid(N)
    out = np.empty((plan.M, N**4), dtype=complex)
    for col in range(1, N**4 + 1):
        gi = unflatten(col, N)
        pt = (grid_value(g, gi.ntx), grid_value(g, gi.nty))
        pr = (grid_value(g, gi.nrx), grid_value(g, gi.nry))
        for m in range(plan.M):
            xt, yt = plan.tx[m]
            xr, yr = plan.rx[m]
            out[m, col - 1] = cmath.exp(2j * math.pi * (xt * pt[0] + yt * pt[1])) * cmath.exp(
                -2j * math.pi * (xr * pr[0] + yr * pr[1])
            )
    return out


def dirichlet_mag(M, d, delta):
    """|mean_m exp(j 2 pi (x0 + m d) delta)| via the geometric series."""
    s = math.sin(math.pi * d * delta)
    if abs(s) < 1e-15:
        return 1.0
    return abs(math.sin(M * math.pi * d * delta) / (M * s))


@pytest.fixture
def small_random_op():
    plan = gen_random(2.0, 16, np.random.default_rng(0))
    return MeasurementOperator(plan, 4)


# -- setups -------------------------------------------------------------------


def test_upa_counts():
    plan = gen_upa(2.0, 0.4)
    assert plan.M == 1296
    assert len(np.unique(plan.tx, axis=0)) == 36
    assert gen_upa(2.0, 1.0).M == 81
    assert np.all(np.abs(plan.tx) <= 1 + 1e-12) and np.all(np.abs(plan.rx) <= 1 + 1e-12)
    with pytest.raises(ValueError):
        gen_upa(2.0, 0.3)


def test_upa_is_full_product():
    plan = gen_upa(2.0, 1.0)
    pairs = {(tuple(t), tuple(r)) for t, r in zip(plan.tx, plan.rx)}
    assert len(pairs) == 81


def test_edge_counts_and_boundary():
    plan = gen_edge(2.0, 0.4)
    assert plan.M == 400
    pts = edge_points(2.0, 0.4)
    assert len(pts) == 20 and len(np.unique(pts, axis=0)) == 20
    on_edge = np.isclose(np.abs(pts[:, 0]), 1) | np.isclose(np.abs(pts[:, 1]), 1)
    assert on_edge.all()
    corners = edge_points(2.0, 2.0)
    assert sorted(map(tuple, corners)) == [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    assert gen_edge(2.0, 2.0).M == 16
    # neighbours along the perimeter are one spacing apart
    gaps = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
    assert np.allclose(gaps, 0.4)


def test_cross_counts_and_axes():
    plan = gen_cross(2.0, 0.4)
    assert plan.M == 144
    pts = cross_points(2.0, 0.4)
    assert len(pts) == 12
    assert np.all((pts[:, 0] == 0) | (pts[:, 1] == 0))
    assert np.allclose(sorted(pts[pts[:, 1] == 0][:, 0]), [-1, -0.6, -0.2, 0.2, 0.6, 1])
    degenerate = {tuple(p) for p in cross_points(2.0, 2.0)}
    assert degenerate <= {(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (0.0, 0.0)}
    # origin on the lattice is counted once
    assert len(cross_points(2.0, 0.5)) == 9


@pytest.mark.parametrize("setup,M", [("upa", 1296), ("upa", 256), ("edge", 400), ("edge", 256),
                                     ("cross", 144), ("cross", 64), ("cross", 256)])
def test_spacing_for_measurements(setup, M):
    d = spacing_for_measurements(setup, 2.0, M)
    plan = {"upa": gen_upa, "edge": gen_edge, "cross": gen_cross}[setup](2.0, d)
    assert plan.M == M


def test_spacing_reference_values():
    assert spacing_for_measurements("upa", 2.0, 1296) == pytest.approx(0.4)
    assert spacing_for_measurements("edge", 2.0, 400) == pytest.approx(0.4)
    assert spacing_for_measurements("cross", 2.0, 144) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        spacing_for_measurements("cross", 2.0, 100)


def test_random_plan():
    rng = np.random.default_rng(1)
    plan = gen_random(2.0, 144, rng)
    assert plan.M == 144 and plan.setup is Setup.RANDOM
    again = gen_random(2.0, 144, np.random.default_rng(1))
    assert np.array_equal(plan.tx, again.tx) and np.array_equal(plan.rx, again.rx)
    assert gen_random(2.0, 1, rng).M == 1
    big = gen_random(2.0, 100_000, np.random.default_rng(2))
    assert abs(big.tx[:, 0].mean()) < 0.01 * 2.0
    assert np.all(np.abs(big.tx) <= 1) and np.all(np.abs(big.rx) <= 1)
    with pytest.raises(ValueError):
        gen_random(2.0, 0, rng)


def test_random_walk_origin_and_steps():
    assert gen_random_walk(2.0, 1, 0.5, np.random.default_rng(0)).pairs[0][0].x == 0
    plan = gen_random_walk(2.0, 2000, 0.5, np.random.default_rng(3))
    assert np.array_equal(plan.tx[0], [0, 0]) and np.array_equal(plan.rx[0], [0, 0])
    for pos in (plan.tx, plan.rx):
        step = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        raw_ok = np.isclose(step, 0.5)
        # a non-unit step is only allowed right after touching the boundary region
        near_edge = np.max(np.abs(pos[1:]), axis=1) > 1 - 0.5
        assert np.all(raw_ok | near_edge)
        assert raw_ok.mean() > 0.5
    with pytest.raises(ValueError):
        gen_random_walk(2.0, 5, 2.5, np.random.default_rng(0))


def test_random_walk_stays_in_region():
    for seed in range(100):
        plan = gen_random_walk(2.0, 10_000, 0.5, np.random.default_rng(seed))
        assert np.all(np.abs(plan.tx) <= 1) and np.all(np.abs(plan.rx) <= 1)


def test_random_walk_extreme_step():
    plan = gen_random_walk(2.0, 500, 2.0, np.random.default_rng(4))
    assert np.all(np.abs(plan.tx) <= 1) and np.all(np.abs(plan.rx) <= 1)


def test_plan_validation_and_serialisation(tmp_path):
    with pytest.raises(ValueError):
        MeasurementPlan([[2, 0]], [[0, 0]], region=2.0)
    with pytest.raises(ValueError):
        MeasurementPlan([[0, 0]], [[0, 0], [0, 0]])
    plan = gen_random(2.0, 5, np.random.default_rng(0))
    text = plan.to_csv()
    assert text.splitlines()[0] == "m,tx_x,tx_y,rx_x,rx_y"
    back = MeasurementPlan.from_csv(text)
    assert np.array_equal(back.tx, plan.tx) and np.array_equal(back.rx, plan.rx)
    back = MeasurementPlan.from_json(plan.to_json())
    assert np.array_equal(back.tx, plan.tx) and back.setup is Setup.RANDOM
    with pytest.raises(ValueError):
        plan.tx[0, 0] = 1.0


# -- operator -----------------------------------------------------------------


def test_operator_matches_entry_formula(small_random_op):
    op = small_random_op
    dense = entry_oracle(op.plan, None, 4)
    assert np.allclose(op.to_dense(), dense, atol=1e-12)
    assert np.allclose(np.abs(dense), 1, atol=1e-12)


def test_explicit_vs_matrix_free(small_random_op):
    op = small_random_op
    ex = MeasurementOperator(op.plan, 4, OperatorMode.EXPLICIT)
    rng = np.random.default_rng(5)
    for _ in range(100):
        u = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        a, b = op.apply(u), ex.apply(u)
        assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)
        y = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        a, b = op.adjoint_apply(y), ex.adjoint_apply(y)
        assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("N,M", [(2, 4), (4, 16), (4, 64)])
def test_adjoint_identity(N, M):
    rng = np.random.default_rng(N * 100 + M)
    op = MeasurementOperator(gen_random(2.0, M, rng), N)
    for _ in range(100):
        u = rng.standard_normal(N**4) + 1j * rng.standard_normal(N**4)
        y = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        lhs = np.vdot(y, op.apply(u))  # <Psi u, y>
        rhs = np.vdot(op.adjoint_apply(y), u)  # <u, Psi^H y>
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs)


def test_origin_plan_probes():
    plan = MeasurementPlan(np.zeros((5, 2)), np.zeros((5, 2)))
    op = MeasurementOperator(plan, 3)
    u = np.arange(81) * (1 + 0.5j)
    assert np.allclose(op.apply(u), u.sum())
    assert np.allclose(op.adjoint_apply(np.ones(5)), 5)
    assert np.allclose(mutual_coherence_column(op, 7), 1)


def test_basis_probes(small_random_op):
    op = small_random_op
    dense = op.to_dense()
    for n in (0, 17, 255):
        e = np.zeros(256)
        e[n] = 1
        assert np.allclose(op.apply(e), dense[:, n], atol=1e-14)
        assert np.allclose(np.abs(op.apply(e)), 1, atol=1e-12)
    for m in (0, 9):
        e = np.zeros(16)
        e[m] = 1
        assert np.allclose(op.adjoint_apply(e), dense[m].conj(), atol=1e-14)
        assert np.allclose(op.row(m), dense[m], atol=1e-14)
    assert np.allclose(op.columns([1, 200]), dense[:, [0, 199]], atol=1e-14)


def test_dimension_errors(small_random_op):
    with pytest.raises(ValueError):
        small_random_op.apply(np.zeros(10))
    with pytest.raises(ValueError):
        small_random_op.adjoint_apply(np.zeros(10))
    with pytest.raises(ValueError):
        mutual_coherence_column(small_random_op, 0)
    with pytest.raises(ValueError):
        MeasurementOperator(gen_upa(2.0, 0.4), 24, OperatorMode.EXPLICIT)


# -- coherence ----------------------------------------------------------------


def test_coherence_column_matches_gram_oracle(small_random_op):
    op = small_random_op
    dense = entry_oracle(op.plan, None, 4)
    gram = dense.conj().T @ dense / op.M
    for n_ref in (1, 50, 256):
        col = mutual_coherence_column(op, n_ref)
        assert np.allclose(col, gram[:, n_ref - 1], atol=1e-10)
        assert col[n_ref - 1] == 1


def test_permutation_invariance_of_coherence():
    plan = gen_random(2.0, 30, np.random.default_rng(9))
    perm = plan.permuted(np.random.default_rng(1).permutation(30))
    a = mutual_coherence_column(MeasurementOperator(plan, 4), 3)
    b = mutual_coherence_column(MeasurementOperator(perm, 4), 3)
    assert np.allclose(a, b, atol=1e-12)


def test_effective_coherence_diagonal_and_dirichlet():
    g = AngleGrid(24)
    x = np.linspace(-1, 1, 6)  # spacing 0.4
    C = effective_coherence_1d(x, g)
    assert np.all(np.diag(C) == 1)
    vals = g.values
    for k in range(24):
        for kp in range(24):
            assert abs(C[k, kp]) == pytest.approx(
                dirichlet_mag(6, 0.4, vals[kp] - vals[k]), abs=1e-10
            )
    with pytest.raises(ValueError):
        effective_coherence_1d([], g)


def test_aliasing_at_integer_spacing():
    g = AngleGrid(24)
    C = effective_coherence_1d(np.linspace(-1, 1, 3), g)  # spacing 1.0
    # twelve grid steps = angular offset 1.0
    assert abs(C[0, 12]) >= 0.99
    assert dirichlet_mag(3, 1.0, 1.0) == 1.0


def test_kronecker_consistency_with_effective_coherence():
    N = 4
    xt = np.linspace(-1, 1, 5)
    plan = MeasurementPlan(np.c_[xt, np.zeros(5)], np.zeros((5, 2)))
    op = MeasurementOperator(plan, N)
    dense = op.to_dense()
    # column depends only on ntx: columns sharing ntx are identical
    for col in range(1, N**4 + 1):
        gi = unflatten(col, N)
        ref = N**2 * (gi.ntx - 1)  # (ntx, 1, 1, 1) zero-based
        assert np.allclose(dense[:, col - 1], dense[:, ref], atol=1e-15)
    Ce = effective_coherence_1d(xt, N)
    for kref in range(1, N + 1):
        col = mutual_coherence_column(op, N**2 * (kref - 1) + 1)
        restricted = col[[N**2 * (k - 1) for k in range(1, N + 1)]]
        assert np.allclose(restricted, Ce[:, kref - 1], atol=1e-10)


def test_ideal_sinc_values():
    g = AngleGrid(24)
    # sin(pi/6)/(pi/6) = 3/pi
    assert ideal_sinc_coherence(2.0, g, 1) == pytest.approx(3 / math.pi, abs=1e-12)
    assert ideal_sinc_coherence(2.0, g, 1) == pytest.approx(0.954930, abs=1e-6)
    assert abs(ideal_sinc_coherence(2.0, g, 6)) < 1e-15
    assert ideal_sinc_coherence(0.0, g, 3) == 1.0
    with pytest.raises(ValueError):
        ideal_sinc_coherence(2.0, g, 24)


@pytest.mark.parametrize("d", [0.1, 0.2, 0.25, 0.4])
def test_sub_half_wavelength_spacing_has_no_grating_lobe(d):
    g = AngleGrid(24)
    x = np.linspace(-1, 1, int(round(2 / d)) + 1)
    C = effective_coherence_1d(x, g)
    row = np.abs(C[0])
    null = first_null(row)
    assert row[null:].max() < 0.5


@pytest.mark.parametrize("d", [1.0, 2.0])
def test_integer_spacing_has_grating_lobe(d):
    g = AngleGrid(24)
    x = np.linspace(-1, 1, int(round(2 / d)) + 1)
    row = np.abs(effective_coherence_1d(x, g)[0])
    null = first_null(row)
    assert row[null:].max() > 0.99


@pytest.mark.parametrize("d", [0.1, 0.2, 0.25])
def test_full_aperture_narrows_main_lobe(d):
    g = AngleGrid(48)
    half_span = np.arange(-0.5, 0.5 + 1e-9, d)
    full_span = np.arange(-1, 1 + 1e-9, d)
    w_half = main_lobe_halfwidth(effective_coherence_1d(half_span, g)[0])
    w_full = main_lobe_halfwidth(effective_coherence_1d(full_span, g)[0])
    assert w_full < w_half
