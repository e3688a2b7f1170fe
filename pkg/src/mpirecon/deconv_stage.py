"""Stage 2: regularized deconvolution of the trace by half-quadratic splitting.

The data model is kappa_h * rho = u.  HQS alternates a Tikhonov-coupled
data step with a denoising step:

    rho1 <- argmin ||u - C rho||^2 + nu_k ||rho - rho2||^2
    sigma <- sqrt(Var(rho1));  nu <- mu / sigma^2
    rho2 <- Denoiser(rho1, sigma)

C is the linear (zero-padded) discrete convolution with kappa_h; the FFT is
used inside the operator application, and the Tikhonov subproblem is solved
by CG on the normal equations with a circulant (periodic-kernel)
preconditioner.  The denoiser is pluggable: the built-in choice is a
Gaussian blur keyed to sigma, and an external-process protocol lets a
learned denoiser drop in without code changes.
"""

from __future__ import annotations

import logging
import os
import subprocess
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy.ndimage import gaussian_filter

from .fields import ScalarField, load_field, save_field
from .kernels import KernelParams, kernel_trace

log = logging.getLogger(__name__)


class ConvolutionOperator:
    """Linear (zero-padded) 2D convolution with a full-stencil kernel.

    The kernel array holds samples at all offsets -(n-1)..(n-1) per axis
    (shape (2nx-1, 2ny-1)), already scaled by the cell area.  The adjoint is
    correlation, i.e. convolution with the flipped kernel.
    """

    def __init__(self, kernel: np.ndarray, shape: tuple[int, int]):
        nx, ny = shape
        if kernel.shape != (2 * nx - 1, 2 * ny - 1):
            raise ValueError("kernel must cover all grid offsets")
        self.shape = (nx, ny)
        full = (nx + kernel.shape[0] - 1, ny + kernel.shape[1] - 1)
        self._fshape = (sfft.next_fast_len(full[0]), sfft.next_fast_len(full[1]))
        self._khat = sfft.rfftn(kernel, self._fshape)
        self._khat_adj = sfft.rfftn(kernel[::-1, ::-1], self._fshape)
        # periodic (wrapped) kernel spectrum, used for preconditioning
        wrapped = np.zeros(shape)
        ix = (np.arange(kernel.shape[0]) - (nx - 1)) % nx
        iy = (np.arange(kernel.shape[1]) - (ny - 1)) % ny
        np.add.at(wrapped, (ix[:, None], iy[None, :]), kernel)
        self.periodic_spectrum = sfft.fft2(wrapped)

    def _conv(self, x: np.ndarray, khat: np.ndarray) -> np.ndarray:
        nx, ny = self.shape
        out = sfft.irfftn(sfft.rfftn(x, self._fshape) * khat, self._fshape)
        return out[nx - 1: 2 * nx - 1, ny - 1: 2 * ny - 1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self._conv(x, self._khat)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        return self._conv(y, self._khat_adj)


def build_convolution_operator(params: KernelParams, nx: int,
                               ny: int) -> ConvolutionOperator:
    """C_h: convolution with kappa_h sampled on grid offsets times cell area."""
    if nx < 8 or ny < 8:
        raise ValueError("deconvolution grid must be at least 8x8")
    dx = (np.arange(2 * nx - 1) - (nx - 1)) * (2.0 / nx)
    dy = (np.arange(2 * ny - 1) - (ny - 1)) * (2.0 / ny)
    ox, oy = np.meshgrid(dx, dy, indexing="ij")
    kernel = kernel_trace((ox, oy), params) * (2.0 / nx) * (2.0 / ny)
    return ConvolutionOperator(kernel, (nx, ny))


def _pcg(apply_a, b, x0, precond, tol, max_iter):
    """Preconditioned CG; returns (x, iterations, converged)."""
    x = x0.copy()
    r = b - apply_a(x)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0, True
    if float(np.linalg.norm(r)) <= tol * bnorm:
        return x, 0, True
    z = precond(r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        alpha = rz / float(np.vdot(p, ap))
        x += alpha * p
        r -= alpha * ap
        if float(np.linalg.norm(r)) <= tol * bnorm:
            return x, it, True
        z = precond(r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, max_iter, False


def tikhonov_step(u: ScalarField, rho2: ScalarField, nu: float,
                  op: ConvolutionOperator, tol: float = 1e-8,
                  max_iter: int = 1000) -> ScalarField:
    """argmin ||u - C rho||^2 + nu ||rho - rho2||^2 via CG on the normal eqs.

    Warm-started at rho2, with a circulant preconditioner built from the
    periodic kernel spectrum.  Logs a warning when the iteration cap is hit.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    b = op.apply_adjoint(u.values) + nu * rho2.values
    denom = np.abs(op.periodic_spectrum) ** 2 + nu

    def apply_a(x):
        return op.apply_adjoint(op.apply(x)) + nu * x

    def precond(r):
        return np.real(sfft.ifft2(sfft.fft2(r) / denom))

    x, iters, ok = _pcg(apply_a, b, rho2.values, precond, tol, max_iter)
    if not ok:
        log.warning("tikhonov_step: CG hit the iteration cap (%d)", iters)
    return ScalarField(x)


def estimate_sigma(rho1: ScalarField) -> float:
    """Square root of the population variance of the iterate."""
    return float(np.std(rho1.values))


@dataclass(frozen=True)
class DenoiserSpec:
    kind: str = "gaussian_blur"
    width_factor: float = 0.3    # blur std in domain units per unit sigma
    command: str = ""            # external: executable invoked on the exchange dir
    exchange_dir: str = ""       # external: directory for the file protocol
    timeout: float = 60.0

    def __post_init__(self):
        if self.kind not in ("gaussian_blur", "external"):
            raise ValueError(f"unknown denoiser kind {self.kind!r}")
        if self.kind == "external" and not self.command:
            raise ValueError("external denoiser needs a command")


def denoise(rho: ScalarField, sigma: float, spec: DenoiserSpec) -> ScalarField:
    """Remove noise of level sigma; sigma = 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return ScalarField(rho.values.copy())
    if spec.kind == "gaussian_blur":
        std_domain = spec.width_factor * sigma
        std_px = (std_domain / (2.0 / rho.nx), std_domain / (2.0 / rho.ny))
        return ScalarField(gaussian_filter(rho.values, std_px, mode="reflect"))
    return _denoise_external(rho, sigma, spec)


def _denoise_external(rho: ScalarField, sigma: float,
                      spec: DenoiserSpec) -> ScalarField:
    """File-exchange protocol: in.pgm/in.range + sigma -> out.pgm/out.range."""
    xdir = spec.exchange_dir or "."
    os.makedirs(xdir, exist_ok=True)
    save_field(rho, os.path.join(xdir, "in.pgm"))
    with open(os.path.join(xdir, "sigma"), "w") as fh:
        fh.write(f"{sigma!r}\n")
    try:
        proc = subprocess.run([spec.command, xdir], capture_output=True,
                              timeout=spec.timeout)
    except subprocess.TimeoutExpired as exc:
        raise RuntimeError(f"external denoiser timed out after {spec.timeout}s") from exc
    if proc.returncode != 0:
        raise RuntimeError(
            f"external denoiser failed with exit status {proc.returncode}: "
            f"{proc.stderr.decode(errors='replace')[:500]}")
    out = load_field(os.path.join(xdir, "out.pgm"))
    if (out.nx, out.ny) != (rho.nx, rho.ny):
        raise RuntimeError("external denoiser returned mismatched dimensions")
    return out


@dataclass
class DeconvProblem:
    u: ScalarField
    params: KernelParams
    mu: float = 0.01
    nu0: float = 1.0
    iters: int = 8
    denoiser: DenoiserSpec = field(default_factory=DenoiserSpec)
    mode: str = "hqs"
    clamp_nonneg: bool = False
    cg_tol: float = 1e-8
    cg_max_iter: int = 1000

    def __post_init__(self):
        if not self.mu > 0 or not self.nu0 > 0:
            raise ValueError("mu and nu0 must be positive")
        if self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.mode not in ("hqs", "quadratic"):
            raise ValueError("mode must be 'hqs' or 'quadratic'")


def hqs_deconvolve(problem: DeconvProblem,
                   op: ConvolutionOperator | None = None) -> ScalarField:
    """Run the HQS loop; deterministic given the problem and denoiser spec.

    The coupling follows nu_k = mu / sigma_k^2 with sigma estimated from the
    data iterate (sigma_0 comes from nu0).  A constant iterate gives
    sigma = 0, which short-circuits the denoiser to the identity and the
    next data step to rho1 = rho2 (the infinite-coupling limit).
    """
    u = problem.u
    if op is None:
        op = build_convolution_operator(problem.params, u.nx, u.ny)
    rho2 = ScalarField.zeros(u.nx, u.ny)
    nu = problem.nu0  # equivalently sigma_0 = sqrt(mu/nu0)
    for _ in range(problem.iters):
        if not np.isfinite(nu):  # sigma collapsed to 0: infinite coupling
            rho1 = ScalarField(rho2.values.copy())
        else:
            rho1 = tikhonov_step(u, rho2, nu, op, problem.cg_tol,
                                 problem.cg_max_iter)
        sigma = estimate_sigma(rho1)
        nu = problem.mu / (sigma * sigma) if sigma > 0.0 else np.inf
        rho2 = denoise(rho1, sigma, problem.denoiser)
    if problem.clamp_nonneg:
        return ScalarField(np.maximum(rho2.values, 0.0))
    return rho2


def _neumann_laplacian(x: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """D^T D for forward differences with zero-flux boundaries (5-point stencil)."""
    out = np.zeros_like(x)
    dx = np.diff(x, axis=0) / hx
    out[:-1] -= dx / hx
    out[1:] += dx / hx
    dy = np.diff(x, axis=1) / hy
    out[:, :-1] -= dy / hy
    out[:, 1:] += dy / hy
    return out


def quadratic_deconvolve(u: ScalarField, params: KernelParams, mu: float,
                         tol: float = 1e-8, max_iter: int = 2000,
                         op: ConvolutionOperator | None = None) -> ScalarField:
    """Baseline: minimize mu ||grad rho||^2 + ||C rho - u||^2 by CG."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    if op is None:
        op = build_convolution_operator(params, u.nx, u.ny)
    hx, hy = 2.0 / u.nx, 2.0 / u.ny
    b = op.apply_adjoint(u.values)
    # periodic symbols of C^T C and the Laplacian, for the preconditioner
    kx = 2.0 * (1.0 - np.cos(2.0 * np.pi * np.arange(u.nx) / u.nx)) / hx ** 2
    ky = 2.0 * (1.0 - np.cos(2.0 * np.pi * np.arange(u.ny) / u.ny)) / hy ** 2
    denom = np.abs(op.periodic_spectrum) ** 2 + mu * (kx[:, None] + ky[None, :])
    denom[0, 0] += mu  # the constant mode is unseen by the gradient penalty

    def apply_a(x):
        return op.apply_adjoint(op.apply(x)) + mu * _neumann_laplacian(x, hx, hy)

    def precond(r):
        return np.real(sfft.ifft2(sfft.fft2(r) / denom))

    x, iters, ok = _pcg(apply_a, b, np.zeros_like(b), precond, tol, max_iter)
    if not ok:
        log.warning("quadratic_deconvolve: CG hit the iteration cap (%d)", iters)
    return ScalarField(x)


def deconvolve(problem: DeconvProblem,
               op: ConvolutionOperator | None = None) -> ScalarField:
    """Dispatch on problem.mode."""
    if problem.mode == "quadratic":
        return quadratic_deconvolve(problem.u, problem.params, problem.mu,
                                    problem.cg_tol, problem.cg_max_iter, op)
    return hqs_deconvolve(problem, op)
