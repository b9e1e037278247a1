"""
Exact per-mode solution operators for the linearised problem.

With ``v = Lambda^{-1} P div tau`` the linear velocity/stress coupling (unit
stress diffusion and unit damping) closes on the pair ``(u, v)``::

    d/dt (u_hat, v_hat) = A(xi) (u_hat, v_hat),
    A = [[0, |xi|], [-|xi|/2, -(|xi|^2 + 1)]],

whose exponential is written through three scalar kernels G1, G2, G3.
The divergence-free part of the stress without coupling obeys a damped
heat equation with factor ``exp(-(|xi|^2 + 1) t)``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import InputError
from .littlewood_paley import lp_norm
from .spectral import VECTOR, _require, random_field


@dataclass(frozen=True)
class EigenPair:
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray


def _radius_sq(r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise InputError("|xi|^2 must be nonnegative")
    return r


def mode_matrix(r):
    """2x2 block of A(xi) for ``r = |xi|^2``."""
    r = float(_radius_sq(r))
    x = np.sqrt(r)
    return np.array([[0.0, x], [-0.5 * x, -(r + 1.0)]])


def eigenvalues(r):
    """Decay rates of A(xi) for ``r = |xi|^2``.

    The discriminant ``(r+1)^2 - 2r`` equals ``r^2 + 1``. ``lambda_plus`` is
    taken from the product ``r/2`` to avoid cancellation at large r.
    """
    r = _radius_sq(r)
    gap = np.sqrt(r * r + 1.0)
    lam_m = -0.5 * ((r + 1.0) + gap)
    lam_p = -r / ((r + 1.0) + gap)
    return EigenPair(lam_p, lam_m)


def green_kernels(t, xi_abs):
    """Kernels ``(G1, G2, G3)`` at time ``t >= 0`` and radius ``|xi|``.

    G1 = (e+ - e-)/(l+ - l-), G2 = (l+ e+ - l- e-)/(l+ - l-),
    G3 = (l+ e- - l- e+)/(l+ - l-), rewritten through G1 so that the
    difference of exponentials goes through ``expm1``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InputError("t must be nonnegative")
    xi_abs = np.asarray(xi_abs, dtype=float)
    r = xi_abs**2
    ev = eigenvalues(r)
    gap = np.sqrt(r * r + 1.0)
    e_p = np.exp(ev.lambda_plus * t)
    e_m = np.exp(ev.lambda_minus * t)
    g1 = -e_p * np.expm1(-gap * t) / gap
    g2 = e_p + ev.lambda_minus * g1
    g3 = e_m - ev.lambda_minus * g1
    return g1, g2, g3


def green_matrix(t, xi_abs):
    """Assembled ``[[G3, |xi| G1], [-|xi| G1 / 2, G2]]`` with shape ``(..., 2, 2)``."""
    g1, g2, g3 = green_kernels(t, xi_abs)
    x = np.asarray(xi_abs, dtype=float)
    return np.stack(
        [np.stack([g3, x * g1], axis=-1), np.stack([-0.5 * x * g1, g2], axis=-1)], axis=-2
    )


def propagate_linear(grid, u_hat0, v_hat0, t):
    """Apply the Green's matrix mode by mode to vector fields ``(u, v)``."""
    _require(grid, u_hat0, VECTOR, "propagate_linear")
    _require(grid, v_hat0, VECTOR, "propagate_linear")
    g1, g2, g3 = green_kernels(t, grid.kabs)
    x = grid.kabs
    u = g3 * u_hat0 + x * g1 * v_hat0
    v = -0.5 * x * g1 * u_hat0 + g2 * v_hat0
    return u, v


def ptF_semigroup(grid, tau_hat, t):
    """Damped heat flow ``exp(-(|xi|^2 + 1) t)`` of the divergence-free stress part."""
    if t < 0:
        raise InputError("t must be nonnegative")
    return np.exp(-(grid.k2 + 1.0) * t) * tau_hat


def full_linear_matrices(grid, nu=1.0, a=1.0):
    """Per-mode generator of the linear ``(u, tau)`` system, shape ``(..., m, m)``.

    State ordering is ``(u_1..u_d, tau_11, tau_12, .., tau_dd)`` with
    ``u' = P(i tau xi)`` and ``tau' = -(nu |xi|^2 + a) tau + i (u xi^T + xi u^T) / 2``.
    """
    d = grid.dim
    m = d + d * d
    kd = np.moveaxis(grid.kd, 0, -1)
    inv = grid.inv_k2[..., None, None]
    proj = np.eye(d) - kd[..., :, None] * kd[..., None, :] * inv
    gen = np.zeros(grid.shape + (m, m), dtype=complex)
    for i in range(d):
        for j in range(d):
            col = d + i * d + j
            # u_l' += P_li * i tau_ij xi_j
            gen[..., :d, col] += proj[..., :, i] * (1j * kd[..., j])[..., None]
            gen[..., col, col] += -(nu * grid.k2 + a)
            # tau_ij' += i/2 (u_i xi_j + xi_i u_j)
            gen[..., col, i] += 0.5j * kd[..., j]
            gen[..., col, j] += 0.5j * kd[..., i]
    return gen


def linear_flow(grid, u_hat, tau_hat, t, nu=1.0, a=1.0):
    """Exact linear evolution of ``(u, tau)`` over time ``t`` (batched ``expm``)."""
    d = grid.dim
    gen = full_linear_matrices(grid, nu, a)
    prop = scipy.linalg.expm(gen * t)
    state = np.concatenate(
        [np.moveaxis(u_hat, 0, -1), np.moveaxis(tau_hat.reshape((d * d,) + grid.shape), 0, -1)],
        axis=-1,
    )
    out = np.einsum("...ij,...j->...i", prop, state)
    u = np.moveaxis(out[..., :d], -1, 0)
    tau = np.moveaxis(out[..., d:], -1, 0).reshape((d, d) + grid.shape)
    return u, tau


@dataclass
class DecayReport:
    """Measured ``||G_i * phi||_p / ||phi||_p`` on a band and fitted envelopes."""

    theta: float
    band: tuple
    p: float
    times: np.ndarray
    ratios: np.ndarray
    fitted_C: np.ndarray
    fitted_c: np.ndarray
    monotone: np.ndarray = field(default=None)

    @property
    def ok(self):
        return bool(np.all(self.fitted_c > 0) and np.all(self.monotone))

    def rows(self):
        """CSV rows ``(kernel_index, theta, p, t, ratio, fitted_C, fitted_c)``."""
        out = []
        for i in range(3):
            for t, ratio in zip(self.times, self.ratios[i]):
                out.append((i + 1, self.theta, self.p, float(t), float(ratio),
                            float(self.fitted_C[i]), float(self.fitted_c[i])))
        return out


def verify_decay_bound(grid, band=(1.0, 2.0), p=2, times=(1.0, 2.0, 4.0), seed=0):
    """Measure kernel decay on a random field supported in ``band[0] <= |xi| <= band[1]``.

    A log-linear fit ``log ratio = log C - c theta^2 t`` is made per kernel,
    with ``theta = band[0]``.
    """
    lo, hi = map(float, band)
    if not 0 < lo <= hi:
        raise InputError(f"bad band {band}")
    if hi > grid.n / 3:
        raise InputError(f"band edge {hi} exceeds the resolved radius {grid.n / 3:g}")
    in_band = (grid.kabs >= lo) & (grid.kabs <= hi) & grid.dealias & ~grid.nyquist
    if not in_band.any():
        raise InputError(f"no resolved modes with {lo} <= |xi| <= {hi}")
    phi_hat = random_field(grid, rng=seed) * in_band
    if not np.any(phi_hat):
        raise InputError("band field vanished")
    base = lp_norm(grid, phi_hat, p)
    times = np.asarray(times, dtype=float)
    ratios = np.empty((3, times.size))
    for j, t in enumerate(times):
        for i, g in enumerate(green_kernels(t, grid.kabs)):
            ratios[i, j] = lp_norm(grid, g * phi_hat, p) / base
    theta = lo
    fitted_C = np.empty(3)
    fitted_c = np.empty(3)
    for i in range(3):
        slope, intercept = np.polyfit(times, np.log(ratios[i]), 1)
        fitted_C[i] = np.exp(intercept)
        fitted_c[i] = -slope / theta**2
    monotone = np.all(np.diff(ratios, axis=1) < 0, axis=1)
    return DecayReport(theta, (lo, hi), p, times, ratios, fitted_C, fitted_c, monotone)
