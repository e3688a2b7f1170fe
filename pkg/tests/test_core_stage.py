import numpy as np
import pytest

from mpirecon.core_stage import (CoreOperator, CoreProblem, energy, gradient,
                                 predict, solve_core, trace_field)
from mpirecon.forward import ScanSeries
from mpirecon.spectral import CoeffTensor, cos_eval, synthesize
from mpirecon.trajectory import LissajousSpec, ScanGeometry, make_scan, merge_scans, rotate_scan


def small_series(L=50, seed=0, zero_signals=False):
    geom = make_scan(LissajousSpec(freq_x=3, freq_y=4), L)
    rng = np.random.default_rng(seed)
    signals = np.zeros((L, 2)) if zero_signals else rng.normal(size=(L, 2))
    return ScanSeries(geom, signals)


def test_predict_zero_coeffs():
    series = small_series()
    assert np.all(predict(CoeffTensor.zeros(6, 6), series) == 0.0)


def test_predict_constant_mode_identity():
    series = small_series()
    C = CoeffTensor.zeros(6, 6)
    C.coeffs[0, 0] = 2.0 * np.eye(2)  # u_(0,0) = 1/2, so A = I
    p = predict(C, series)
    np.testing.assert_allclose(p, series.geometry.velocities, rtol=1e-13)


def test_predict_matches_dense_evaluation():
    series = small_series(L=40, seed=1)
    rng = np.random.default_rng(2)
    C = CoeffTensor(rng.normal(size=(5, 7, 2, 2)))
    got = predict(C, series)
    want = np.zeros_like(got)
    for l, (r, v) in enumerate(zip(series.geometry.positions,
                                   series.geometry.velocities)):
        for k in range(5):
            for m in range(7):
                want[l] += cos_eval((k, m), r[0], r[1]) * (C.coeffs[k, m] @ v)
    assert np.max(np.abs(got - want)) < 1e-10 * max(1.0, np.max(np.abs(want)))


def test_energy_zero_everything():
    series = small_series(zero_signals=True)
    problem = CoreProblem(series, N=6, M=6, lam=1.0)
    assert energy(CoeffTensor.zeros(6, 6), problem) == 0.0


def test_energy_pure_fidelity():
    series = small_series(seed=3)
    problem = CoreProblem(series, N=6, M=6, lam=1.0)
    want = np.sum(series.signals ** 2) / (2 * len(series.geometry))
    assert energy(CoeffTensor.zeros(6, 6), problem) == pytest.approx(want, rel=1e-13)


def test_energy_single_mode_regularizer_value():
    # unit-Frobenius mode (1,0), zero data, lambda = 1, order 2:
    # E = (1/(2*4)) * mu^2 = (1/8) (pi^2/4)^2
    geom = ScanGeometry([0.0], [[0.5, 0.5]], [[0.0, 0.0]])  # v = 0: no fidelity
    series = ScanSeries(geom, np.zeros((1, 2)))
    problem = CoreProblem(series, N=4, M=4, order=2, lam=1.0)
    C = CoeffTensor.zeros(4, 4)
    C.coeffs[1, 0] = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]])  # Frobenius norm 1
    want = (np.pi ** 2 / 4.0) ** 2 / 8.0
    assert energy(C, problem) == pytest.approx(want, rel=1e-13)


def test_energy_single_mode_matches_quadrature_of_laplacian():
    # independent oracle: (1/(2|Omega|)) sum_pq int (Delta A_pq)^2 by midpoint
    # quadrature with closed-form second derivatives
    from mpirecon.theory_checks import cos_partial
    from mpirecon.fields import cell_centers
    geom = ScanGeometry([0.0], [[0.5, 0.5]], [[0.0, 0.0]])
    series = ScanSeries(geom, np.zeros((1, 2)))
    problem = CoreProblem(series, N=4, M=4, order=2, lam=1.0)
    rng = np.random.default_rng(4)
    C = CoeffTensor.zeros(4, 4)
    C.coeffs[2, 1] = rng.normal(size=(2, 2))
    n = 64
    xs = cell_centers(n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    lap_mode = cos_partial((2, 1), gx, gy, 2, 0) + cos_partial((2, 1), gx, gy, 0, 2)
    area = (2.0 / n) ** 2
    quad = sum(np.sum((C.coeffs[2, 1, p, q] * lap_mode) ** 2) * area
               for p in range(2) for q in range(2)) / 8.0
    assert energy(C, problem) == pytest.approx(quad, rel=1e-10)


def test_gradient_matches_finite_differences():
    series = small_series(L=30, seed=5)
    problem = CoreProblem(series, N=4, M=4, order=2, lam=0.3, ridge=0.0)
    rng = np.random.default_rng(6)
    C = CoeffTensor(rng.normal(size=(4, 4, 2, 2)))
    g = gradient(C, problem).coeffs
    step = 1e-6
    fd = np.zeros_like(g)
    for idx in np.ndindex(g.shape):
        plus = CoeffTensor(C.coeffs.copy())
        plus.coeffs[idx] += step
        minus = CoeffTensor(C.coeffs.copy())
        minus.coeffs[idx] -= step
        fd[idx] = (energy(plus, problem) - energy(minus, problem)) / (2 * step)
    assert np.max(np.abs(fd - g)) < 1e-6 * max(1.0, np.max(np.abs(g)))


def test_gradient_at_exact_fit_reduces_to_ridge():
    series = small_series(L=30, seed=7)
    rng = np.random.default_rng(8)
    C = CoeffTensor(rng.normal(size=(4, 4, 2, 2)))
    fitted = ScanSeries(series.geometry, predict(C, series))
    problem = CoreProblem(fitted, N=4, M=4, lam=1e-300, ridge=1e-3)
    g = gradient(C, problem).coeffs
    np.testing.assert_allclose(g, 1e-3 * C.coeffs, atol=1e-12)


def test_hessian_symmetric_and_positive():
    series = small_series(L=60, seed=9)
    problem = CoreProblem(series, N=6, M=6, order=1, lam=0.05, ridge=1e-10)
    op = CoreOperator(problem)
    rng = np.random.default_rng(10)
    for _ in range(5):
        a = rng.normal(size=op.shape)
        b = rng.normal(size=op.shape)
        lhs = np.vdot(op.apply_h(a), b)
        rhs = np.vdot(a, op.apply_h(b))
        assert lhs == pytest.approx(rhs, rel=1e-10)
        quad = np.vdot(op.apply_h(a), a)
        assert quad >= 1e-10 * np.vdot(a, a) * 0.999


def test_regularizer_weight_ordering_and_free_constant():
    series = small_series()
    p1 = CoreProblem(series, N=8, M=8, order=1, lam=1.0)
    p2 = CoreProblem(series, N=8, M=8, order=2, lam=1.0)
    w1 = CoreOperator(p1).weights
    w2 = CoreOperator(p2).weights
    assert w1[0, 0] == 0.0 and w2[0, 0] == 0.0  # constant mode unpenalized
    mask = w1 > 0
    np.testing.assert_allclose(w2[mask] / w1[mask],
                               w1[mask])  # per-mode ratio is exactly mu_m
    # order-2 penalty >= order-1 wherever mu_m >= 1
    big = w1 >= 1.0
    assert np.all(w2[big] >= w1[big])


def test_solve_zero_signal_gives_zero():
    series = small_series(zero_signals=True)
    sol = solve_core(CoreProblem(series, N=6, M=6, lam=0.1))
    assert np.all(sol.coeffs.coeffs == 0.0)
    assert sol.converged
    # a warm start must not leak into the zero-data solution
    warm = solve_core(CoreProblem(series, N=6, M=6, lam=0.1),
                      x0=np.ones((6, 6, 2, 2)))
    assert np.all(warm.coeffs.coeffs == 0.0)


def test_solve_energy_monotone():
    series = small_series(L=80, seed=11)
    problem = CoreProblem(series, N=8, M=8, order=2, lam=0.01)
    sol = solve_core(problem)
    energies = [e for _, _, e in sol.history]
    assert len(energies) > 3
    for a, b in zip(energies, energies[1:]):
        assert b <= a + 1e-10 * max(1.0, abs(a))


def test_solve_self_consistency_band_limited():
    # noiseless signals from a known band-limited tensor on the dense merged
    # scan; tiny lambda recovers the generating coefficients
    geom = make_scan(LissajousSpec(), 1632)
    geom = merge_scans(geom, rotate_scan(geom, 1))
    rng = np.random.default_rng(12)
    gt = CoeffTensor(rng.normal(size=(12, 12, 2, 2)))
    clean = ScanSeries(geom, np.zeros((len(geom), 2)))
    signals = predict(gt, clean)
    series = ScanSeries(geom, signals)
    problem = CoreProblem(series, N=12, M=12, order=2, lam=1e-10, tol=1e-10)
    sol = solve_core(problem)
    rel = np.linalg.norm(sol.coeffs.coeffs - gt.coeffs) / np.linalg.norm(gt.coeffs)
    assert rel < 1e-4
    assert sol.converged


def test_solve_flags_iteration_cap():
    series = small_series(L=100, seed=13)
    problem = CoreProblem(series, N=8, M=8, order=1, lam=1e-8, max_iter=2)
    sol = solve_core(problem)
    assert not sol.converged
    assert sol.iterations == 2


def test_invalid_problems_rejected():
    series = small_series()
    with pytest.raises(ValueError):
        CoreProblem(series, lam=0.0)
    with pytest.raises(ValueError):
        CoreProblem(series, order=3)
    with pytest.raises(ValueError):
        CoreProblem(series, tol=2.0)


def test_trace_field_matches_synthesize():
    rng = np.random.default_rng(14)
    C = CoeffTensor(rng.normal(size=(6, 6, 2, 2)))
    tr = trace_field(C, 20, 20)
    full = synthesize(C, 20, 20)
    want = full.values[:, :, 0, 0] + full.values[:, :, 1, 1]
    assert np.max(np.abs(tr.values - want)) < 1e-12
    assert np.all(trace_field(CoeffTensor.zeros(6, 6), 10, 10).values == 0.0)
    C2 = CoeffTensor.zeros(6, 6)
    C2.coeffs[0, 0] = np.eye(2)
    np.testing.assert_allclose(trace_field(C2, 10, 10).values, 1.0, rtol=1e-14)


def test_warm_start_reaches_same_solution():
    series = small_series(L=80, seed=15)
    problem = CoreProblem(series, N=6, M=6, order=2, lam=0.05)
    cold = solve_core(problem)
    rng = np.random.default_rng(16)
    warm = solve_core(problem, x0=rng.normal(size=(6, 6, 2, 2)))
    assert np.max(np.abs(cold.coeffs.coeffs - warm.coeffs.coeffs)) < 1e-6
