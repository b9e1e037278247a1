"""
Fourier representation of fields on the periodic box [0, 2*pi]^d.

Fields are stored as complex coefficient arrays with the component axes in
front of the d spatial-frequency axes::

    scalar  (n,) * d
    vector  (d,) + (n,) * d
    tensor  (d, d) + (n,) * d

Coefficients are normalised so that ``f_hat[xi]`` is the amplitude of
``exp(i xi . x)``; a constant field ``c`` has ``f_hat[0] = c`` and
``cos(x_1)`` has amplitude 1/2 at ``xi = (+-1, 0)``.

Nyquist modes (any ``|xi_i| = n/2``) have no conjugate partner on the grid.
Every differential symbol treats them as zero frequency, so all operators
map real fields to real fields; the dealias mask removes them from any
evolved state.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, InputError

SCALAR, VECTOR, TENSOR = 0, 1, 2
_RANK_NAMES = {SCALAR: "scalar", VECTOR: "vector", TENSOR: "tensor"}


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid with ``n`` points per axis on ``[0, 2*pi]^dim``."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ConfigurationError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ConfigurationError(f"n must be even and >= 8, got {self.n}")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def axes(self):
        return tuple(range(-self.dim, 0))

    @cached_property
    def k(self):
        """Integer wavenumbers per axis, FFT ordering, shape ``(dim, n, ..)``."""
        k1 = sfft.fftfreq(self.n, 1.0 / self.n)
        return np.stack(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def kd(self):
        """Wavenumbers used by differential symbols (Nyquist set to zero)."""
        kd = self.k.copy()
        kd[np.abs(kd) == self.n // 2] = 0.0
        return kd

    @cached_property
    def k2(self):
        return np.sum(self.kd**2, axis=0)

    @cached_property
    def kabs(self):
        return np.sqrt(self.k2)

    @cached_property
    def nyquist(self):
        """True on modes with some ``|xi_i| = n/2``."""
        return np.any(np.abs(self.k) == self.n // 2, axis=0)

    @cached_property
    def dealias(self):
        """2/3-rule mask: keep modes with every ``|xi_i| <= n/3``."""
        return np.all(np.abs(self.k) <= self.n / 3.0, axis=0)

    @cached_property
    def inv_k2(self):
        """``1/|xi|^2`` with the zero-frequency modes mapped to 0."""
        out = np.zeros(self.shape)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.k2[nz]
        return out

    def zeros(self, rank=SCALAR):
        return np.zeros((self.dim,) * rank + self.shape, dtype=complex)

    def to_spectral(self, f):
        """Forward transform of physical samples."""
        f = np.asarray(f)
        if f.shape[-self.dim:] != self.shape or f.ndim - self.dim not in (0, 1, 2):
            raise ConfigurationError(
                f"samples of shape {f.shape} do not fit a grid {self.shape}"
            )
        return sfft.fftn(f, axes=self.axes) / self.n**self.dim

    def to_physical(self, f_hat, real=True):
        """Inverse transform; returns the real part unless ``real=False``."""
        f = sfft.ifftn(f_hat, axes=self.axes) * self.n**self.dim
        return f.real if real else f

    def points(self):
        """Physical coordinates, shape ``(dim, n, ..)``."""
        x1 = 2 * np.pi * np.arange(self.n) / self.n
        return np.stack(np.meshgrid(*([x1] * self.dim), indexing="ij"))


def rank_of(grid, f_hat):
    """Rank (0, 1, 2) of a coefficient array, checked against the grid."""
    f_hat = np.asarray(f_hat)
    rank = f_hat.ndim - grid.dim
    if rank not in (0, 1, 2) or f_hat.shape[rank:] != grid.shape:
        raise ConfigurationError(f"array of shape {f_hat.shape} is not a field on {grid}")
    if f_hat.shape[:rank] != (grid.dim,) * rank:
        raise ConfigurationError(f"component axes {f_hat.shape[:rank]} do not match dim={grid.dim}")
    return rank


def _require(grid, f_hat, rank, op):
    got = rank_of(grid, f_hat)
    if got != rank:
        raise ConfigurationError(
            f"{op} expects a {_RANK_NAMES[rank]} field, got a {_RANK_NAMES[got]} field"
        )


@dataclass
class SpectralField:
    """Coefficients plus the structural flags that travel with them."""

    grid: PeriodicGrid
    coeffs: np.ndarray
    symmetric: bool = False
    divergence_free: bool = False
    real: bool = True

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        rank_of(self.grid, self.coeffs)

    @property
    def rank(self):
        return rank_of(self.grid, self.coeffs)

    def validate(self, tol=1e-12):
        """Raise :class:`InputError` if a flagged invariant does not hold."""
        c = self.coeffs
        if self.real and conjugate_asymmetry(self.grid, c) > tol * max(np.abs(c).max(), 1e-300):
            raise InputError("coefficients are not conjugate-symmetric")
        if self.symmetric:
            if self.rank != TENSOR or not np.array_equal(c, np.swapaxes(c, 0, 1)):
                raise InputError("tensor is flagged symmetric but is not")
        if self.divergence_free:
            if self.rank != VECTOR or divergence_residual(self.grid, c) > tol:
                raise InputError("vector is flagged divergence-free but is not")
        return self


def conjugate_asymmetry(grid, f_hat):
    """Max of ``|f(xi) - conj(f(-xi))|`` over non-Nyquist modes."""
    idx = tuple((-np.arange(grid.n)) % grid.n for _ in range(grid.dim))
    flipped = f_hat[(Ellipsis,) + np.ix_(*idx)]
    diff = np.abs(f_hat - np.conj(flipped))
    return float(np.max(np.where(grid.nyquist, 0.0, diff), initial=0.0))


def grad(grid, f_hat):
    """Gradient of a scalar (returns a vector) or of a vector.

    For a vector ``u`` the result is the tensor ``(grad u)_{ij} = d_j u_i``.
    """
    rank = rank_of(grid, f_hat)
    if rank == TENSOR:
        raise ConfigurationError("grad of a tensor field is not supported")
    ik = 1j * grid.kd
    if rank == SCALAR:
        return ik * f_hat
    return f_hat[:, None] * ik[None, :]


def div(grid, v_hat):
    _require(grid, v_hat, VECTOR, "div")
    return np.sum(1j * grid.kd * v_hat, axis=0)


def div_tensor(grid, tau_hat):
    """Divergence over the second index: ``(div tau)_i = d_j tau_{ij}``."""
    _require(grid, tau_hat, TENSOR, "div_tensor")
    return np.sum(1j * grid.kd[None] * tau_hat, axis=1)


def laplacian(grid, f_hat):
    rank_of(grid, f_hat)
    return -grid.k2 * f_hat


def inv_laplacian(grid, f_hat):
    """Inverse Laplacian on the mean-free part; zero frequency maps to 0."""
    rank_of(grid, f_hat)
    return -grid.inv_k2 * f_hat


def lambda_power(grid, f_hat, s):
    """Multiply by ``|xi|**s``; the zero-frequency modes map to 0 unless s == 0."""
    rank_of(grid, f_hat)
    if s == 0:
        return np.array(f_hat, dtype=complex, copy=True)
    sym = np.zeros(grid.shape)
    nz = grid.k2 > 0
    sym[nz] = grid.kabs[nz] ** s
    return sym * f_hat


def leray_project(grid, v_hat):
    """Remove the gradient part of a vector field, mode by mode."""
    _require(grid, v_hat, VECTOR, "leray_project")
    kv = np.sum(grid.kd * v_hat, axis=0)
    return v_hat - grid.kd * (kv * grid.inv_k2)


def helmholtz_tensor(grid, tau_hat):
    """Split a tensor into ``(P tau, Q tau)`` acting on the divergence index.

    ``Q tau = tau xi xi^T / |xi|^2`` per mode, so ``div(P tau) = 0`` and
    ``div(Q tau) = div(tau)``. ``P tau`` is computed as ``tau - Q tau``.
    """
    _require(grid, tau_hat, TENSOR, "helmholtz_tensor")
    tk = np.sum(tau_hat * grid.kd[None], axis=1)
    q = (tk * grid.inv_k2)[:, None] * grid.kd[None]
    return tau_hat - q, q


def symmetrize(tau_hat):
    """``(tau + tau^T) / 2``; the result is exactly symmetric in floating point."""
    return 0.5 * (tau_hat + np.swapaxes(tau_hat, 0, 1))


def dealias_mask(grid, f_hat):
    rank_of(grid, f_hat)
    return np.where(grid.dealias, f_hat, 0.0)


def divergence_residual(grid, v_hat):
    """Largest per-mode ``|xi . v(xi)| / (|xi| |v(xi)|)`` over active modes."""
    _require(grid, v_hat, VECTOR, "divergence_residual")
    num = np.abs(np.sum(grid.kd * v_hat, axis=0))
    den = grid.kabs * np.sqrt(np.sum(np.abs(v_hat) ** 2, axis=0))
    active = den > 0
    if not active.any():
        return 0.0
    return float(np.max(num[active] / den[active]))


def inner(f_hat, g_hat):
    """Real L^2 inner product under the normalised measure (Parseval)."""
    return float(np.real(np.vdot(g_hat, f_hat)))


def l2_norm(f_hat):
    """L^2 norm under the normalised measure; components are summed."""
    return float(np.sqrt(np.sum(np.abs(f_hat) ** 2)))


def random_field(grid, rank=SCALAR, rng=None, kmax=None, decay=0.0, mean=False):
    """Real pseudo-random band-limited field (coefficients).

    White noise is filtered to ``1 <= |xi| <= kmax`` inside the dealias band
    with amplitude ``|xi|**-decay``. ``mean=True`` keeps a random mean.
    """
    rng = np.random.default_rng(rng)
    noise = rng.standard_normal((grid.dim,) * rank + grid.shape)
    f_hat = grid.to_spectral(noise)
    keep = grid.dealias & ~grid.nyquist & (grid.k2 > 0)
    if kmax is not None:
        keep &= grid.kabs <= kmax
    env = np.zeros(grid.shape)
    env[keep] = grid.kabs[keep] ** (-float(decay))
    if mean:
        env[(0,) * grid.dim] = 1.0
    return f_hat * env
