"""Stage 1: estimate the core-response coefficients from the signal series.

The unknown is the truncated coefficient tensor A_hat in R^(N x M x 2 x 2).
The quadratic energy is

    E[A_hat] = (lambda / (2|Omega|)) sum_m w_m ||A_hat_m||_F^2
             + (1/(2L)) sum_l |s_l - sum_m u_m(r_l) A_hat_m v_l|^2

with |Omega| = 4 and per-mode weights w_m = mu_m (order 1) or mu_m^2
(order 2).  Its gradient system is solved matrix-free with (Jacobi-
preconditioned) conjugate gradients; the forward map factorizes through
two 1D cosine tables thanks to the tensor-product basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField
from .forward import ScanSeries
from .spectral import CoeffTensor, basis_matrix_1d, eigenvalue_grid, synthesize_scalar

OMEGA_AREA = 4.0


@dataclass
class CoreProblem:
    scan: ScanSeries
    N: int = 64
    M: int = 64
    order: int = 2
    lam: float = 0.01
    ridge: float = 1e-12
    tol: float = 1e-8
    max_iter: int = 2000

    def __post_init__(self):
        if self.order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if len(self.scan.geometry) < 1:
            raise ValueError("scan must contain at least one sample")


@dataclass
class CoreSolution:
    coeffs: CoeffTensor
    iterations: int
    final_residual: float
    energy: float
    converged: bool
    # per-iteration (iteration, relative residual, energy) diagnostics
    history: list = field(default_factory=list)


class CoreOperator:
    """Matrix-free forward map B, its adjoint, and the SPD system H.

    B maps coefficients to predicted signals, (B A)_l = sum_m u_m(r_l) A_m v_l.
    H A = (lambda/|Omega|) w (.) A + (1/L) B^T B A + ridge * A.
    """

    def __init__(self, problem: CoreProblem):
        geom = problem.scan.geometry
        self.L = len(geom)
        self.v = geom.velocities                        # (L, 2)
        self.ux = basis_matrix_1d(problem.N, geom.positions[:, 0])  # (N, L)
        self.uy = basis_matrix_1d(problem.M, geom.positions[:, 1])  # (M, L)
        mu = eigenvalue_grid(problem.N, problem.M)
        self.weights = mu if problem.order == 1 else mu * mu
        self.reg = (problem.lam / OMEGA_AREA) * self.weights        # (N, M)
        self.ridge = problem.ridge
        self.shape = (problem.N, problem.M, 2, 2)
        # Jacobi diagonal: reg + ridge + (1/L) sum_l u_m(r_l)^2 v_l[b]^2,
        # identical for both rows a of the 2x2 block
        vsq = self.v ** 2                                           # (L, 2)
        data_diag = np.einsum("nl,ml,lb->nmb", self.ux ** 2, self.uy ** 2, vsq,
                              optimize=True) / self.L
        self.diag = (self.reg + self.ridge)[:, :, None, None] \
            + data_diag[:, :, None, :]

    def apply_b(self, coeffs: np.ndarray) -> np.ndarray:
        """(L, 2) predicted signals from (N, M, 2, 2) coefficients."""
        N, M = self.shape[:2]
        t = (self.ux.T @ coeffs.reshape(N, M * 4)).reshape(self.L, M, 2, 2)
        s = np.einsum("ml,lmab->lab", self.uy, t)
        return np.einsum("lab,lb->la", s, self.v)

    def apply_bt(self, sig: np.ndarray) -> np.ndarray:
        """Adjoint: (N, M, 2, 2) from (L, 2) signals."""
        N, M = self.shape[:2]
        outer = sig[:, :, None] * self.v[:, None, :]                # (L, 2, 2)
        t = self.uy[:, :, None, None] * outer[None, :, :, :]        # (M, L, 2, 2)
        t = np.swapaxes(t, 0, 1).reshape(self.L, M * 4)
        return (self.ux @ t).reshape(N, M, 2, 2)

    def apply_h(self, coeffs: np.ndarray) -> np.ndarray:
        out = (self.reg[:, :, None, None] + self.ridge) * coeffs
        out += self.apply_bt(self.apply_b(coeffs)) / self.L
        return out

    def rhs(self, signals: np.ndarray) -> np.ndarray:
        return self.apply_bt(signals) / self.L


def predict(coeffs: CoeffTensor, scan: ScanSeries) -> np.ndarray:
    """Predicted signals p_l = sum_m u_m(r_l) (A_m v_l); linear in coeffs."""
    problem = CoreProblem(scan, N=coeffs.N, M=coeffs.M, lam=1.0)
    return CoreOperator(problem).apply_b(coeffs.coeffs)


def energy(coeffs: CoeffTensor, problem: CoreProblem) -> float:
    """Regularizer plus data fidelity (the ridge lift is not included)."""
    op = CoreOperator(problem)
    resid = problem.scan.signals - op.apply_b(coeffs.coeffs)
    reg = float(np.sum(op.reg[:, :, None, None] * coeffs.coeffs ** 2)) / 2.0
    fid = float(np.sum(resid ** 2)) / (2.0 * op.L)
    return reg + fid


def gradient(coeffs: CoeffTensor, problem: CoreProblem) -> CoeffTensor:
    """grad E + ridge * coeffs (the system whose root solve_core finds)."""
    op = CoreOperator(problem)
    resid = problem.scan.signals - op.apply_b(coeffs.coeffs)
    g = (op.reg[:, :, None, None] + op.ridge) * coeffs.coeffs
    g -= op.apply_bt(resid) / op.L
    return CoeffTensor(g)


def solve_core(problem: CoreProblem, x0: np.ndarray | None = None,
               collect_history: bool = True) -> CoreSolution:
    """Minimize the energy by preconditioned CG on H A = (1/L) B^T s.

    Deterministic; returns diagnostics and a converged flag (False when the
    iteration cap was reached before the relative-residual tolerance).
    An optional x0 warm-starts the iteration (same solution, fewer steps).
    """
    op = CoreOperator(problem)
    s = problem.scan.signals
    b = op.rhs(s)
    const = float(np.sum(s ** 2)) / (2.0 * op.L)

    x = np.zeros(op.shape) if x0 is None else np.array(x0, dtype=float)
    r = b - op.apply_h(x) if x0 is not None else b.copy()
    bnorm = float(np.linalg.norm(b))
    history: list[tuple[int, float, float]] = []

    def record(it, rnorm):
        if collect_history:
            # E(x) = q(x) + const - ridge correction, with
            # q(x) = -(x . b + x . r)/2 for r = b - Hx
            q = -0.5 * (float(np.vdot(x, b)) + float(np.vdot(x, r)))
            e = q + const - 0.5 * op.ridge * float(np.vdot(x, x))
            history.append((it, rnorm / bnorm if bnorm > 0 else 0.0, e))

    if bnorm == 0.0:
        # b = 0 and H is SPD, so the minimizer is 0 regardless of any x0
        sol = CoeffTensor(np.zeros(op.shape))
        return CoreSolution(sol, 0, 0.0, energy(sol, problem), True, [(0, 0.0, const)])

    z = r / op.diag
    p = z.copy()
    rz = float(np.vdot(r, z))
    rnorm = float(np.linalg.norm(r))
    record(0, rnorm)
    it = 0
    converged = rnorm <= problem.tol * bnorm
    while not converged and it < problem.max_iter:
        hp = op.apply_h(p)
        alpha = rz / float(np.vdot(p, hp))
        x += alpha * p
        r -= alpha * hp
        rnorm = float(np.linalg.norm(r))
        it += 1
        record(it, rnorm)
        if rnorm <= problem.tol * bnorm:
            converged = True
            break
        z = r / op.diag
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new

    sol = CoeffTensor(x)
    return CoreSolution(sol, it, rnorm / bnorm, energy(sol, problem),
                        converged, history)


def trace_field(coeffs: CoeffTensor, nx: int, ny: int) -> ScalarField:
    """u = trace(A) synthesized on the (nx, ny) cell-centered grid."""
    tr = coeffs.coeffs[:, :, 0, 0] + coeffs.coeffs[:, :, 1, 1]
    return synthesize_scalar(tr, nx, ny)
