"""
Dyadic Littlewood-Paley blocks and Besov, Sobolev and Chemin-Lerner norms
on the integer wavenumber lattice of a :class:`~oldroydb.spectral.PeriodicGrid`.

The low-pass profile ``chi`` equals 1 on ``[0, 3/4]`` and vanishes from
``4/3`` on, with a smooth ``exp(-1/x)`` transition in between. The band
profile is ``phi(r) = chi(r/2) - chi(r)``, supported in ``[3/4, 8/3]``.
Sums of dilated ``phi`` telescope, so the partition of unity holds to
rounding error rather than to interpolation error.

All L^p norms use the normalised measure on the torus (mean over grid
points), so the L^2 norm of a field equals the l^2 norm of its
coefficients. Vector and tensor fields use the pointwise Euclidean
(Frobenius) norm.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigurationError, InputError
from .spectral import l2_norm, rank_of

PHI_SUPPORT = (0.75, 8.0 / 3.0)
CHI_SUPPORT = (0.0, 4.0 / 3.0)


def _smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    y = 1.0 - x
    b = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
    return a / (a + b)


def chi(r):
    """Radial low-pass profile, 1 on [0, 3/4] and 0 on [4/3, inf)."""
    r = np.abs(np.asarray(r, dtype=float))
    return 1.0 - _smooth_step((r - 0.75) / (4.0 / 3.0 - 0.75))


def phi(r):
    """Radial band profile supported in [3/4, 8/3]."""
    r = np.asarray(r, dtype=float)
    return chi(0.5 * r) - chi(r)


@dataclass(frozen=True)
class NormSpec:
    """Exponents of a Besov-type norm.

    ``p`` other than 2 or inf is only accepted with ``quadrature=True``, in
    which case the block norms are computed from physical samples.
    """

    s: float = 0.0
    p: float = 2.0
    r: float = 1.0
    q: float = np.inf
    quadrature: bool = False

    def __post_init__(self):
        for name in ("p", "q", "r"):
            if not getattr(self, name) >= 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.p not in (2, np.inf) and not self.quadrature:
            raise ConfigurationError(f"p={self.p} needs quadrature=True")


@dataclass(frozen=True)
class DyadicLadder:
    """Dyadic blocks hosted by a grid, with the low/high threshold ``k0``."""

    grid: object
    k0: int = 2

    def __post_init__(self):
        if int(self.k0) != self.k0 or self.k0 < 1:
            raise ConfigurationError(f"k0 must be an integer >= 1, got {self.k0}")
        if self.k_max < self.k_min:
            raise ConfigurationError("grid too small to host any dyadic block")

    @cached_property
    def _radii(self):
        r = self.grid.kabs
        return np.unique(r[r >= 1])

    @cached_property
    def k_min(self):
        lo, hi = PHI_SUPPORT
        return int(np.floor(np.log2(self._radii.min() / hi))) + 1

    @cached_property
    def k_max(self):
        lo, hi = PHI_SUPPORT
        return int(np.ceil(np.log2(self._radii.max() / lo))) - 1

    @property
    def k_range(self):
        return range(self.k_min, self.k_max + 1)

    def phi(self, k, r):
        return phi(2.0 ** (-k) * np.asarray(r, dtype=float))

    def block_symbol(self, k):
        if k not in self.k_range:
            raise InputError(f"block {k} outside k_range {self.k_min}..{self.k_max}")
        return self.phi(k, self.grid.kabs)

    def low_symbol(self):
        """Sum of the block symbols with ``k <= k0`` (telescoped)."""
        r = self.grid.kabs
        return np.where(r > 0, chi(2.0 ** (-self.k0 - 1) * r), 0.0)

    def high_symbol(self):
        r = self.grid.kabs
        return np.where(r > 0, 1.0 - chi(2.0 ** (-self.k0 - 1) * r), 0.0)


def build_ladder(grid, k0=2):
    return DyadicLadder(grid, k0)


def partition_defect(ladder, radii=None):
    """Max ``|sum_k phi(2^-k r) - 1|`` over lattice radii ``r >= 1``.

    The sum runs over all integers ``k``, not only the blocks the grid
    hosts, so it checks the profile itself.
    """
    r = ladder._radii if radii is None else np.asarray(radii, dtype=float)
    ks = np.arange(int(np.floor(np.log2(r.min()))) - 3, int(np.ceil(np.log2(r.max()))) + 4)
    total = np.sum(phi(2.0 ** (-ks[:, None]) * r[None, :]), axis=0)
    return float(np.max(np.abs(total - 1.0)))


def dyadic_block(ladder, k, f_hat):
    rank_of(ladder.grid, f_hat)
    return ladder.block_symbol(k) * f_hat


def low_high_split(ladder, f_hat):
    """``(f_low, f_high)`` with the threshold ``k0``; the mean is in neither."""
    rank_of(ladder.grid, f_hat)
    return ladder.low_symbol() * f_hat, ladder.high_symbol() * f_hat


def lp_norm(grid, f_hat, p, quadrature=False):
    """Discrete L^p norm of the field with coefficients ``f_hat``."""
    rank = rank_of(grid, f_hat)
    if p == 2:
        return l2_norm(f_hat)
    if p != np.inf and not quadrature:
        raise ConfigurationError(f"p={p} needs quadrature=True")
    f = grid.to_physical(f_hat)
    mag = np.sqrt(np.sum(f**2, axis=tuple(range(rank)))) if rank else np.abs(f)
    if p == np.inf:
        return float(mag.max())
    return float(np.mean(mag**p) ** (1.0 / p))


def block_norms(ladder, f_hat, p=2, quadrature=False):
    """``||Delta_k f||_{L^p}`` for every k in the ladder's range."""
    return np.array(
        [lp_norm(ladder.grid, dyadic_block(ladder, k, f_hat), p, quadrature) for k in ladder.k_range]
    )


def _lr(x, r):
    x = np.asarray(x, dtype=float)
    if r == np.inf:
        return float(x.max(initial=0.0))
    return float(np.sum(x**r) ** (1.0 / r))


def _weights(ladder, s):
    return 2.0 ** (s * np.arange(ladder.k_min, ladder.k_max + 1))


def besov_norm(ladder, f_hat, spec):
    """Homogeneous Besov norm ``|| (2^{ks} ||Delta_k f||_p)_k ||_{l^r}``."""
    norms = block_norms(ladder, f_hat, spec.p, spec.quadrature)
    return _lr(_weights(ladder, spec.s) * norms, spec.r)


def sobolev_norm(grid, f_hat, s):
    """Inhomogeneous H^s norm ``(sum (1+|xi|^2)^s |f_hat|^2)^(1/2)``."""
    rank = rank_of(grid, f_hat)
    power = np.sum(np.abs(f_hat) ** 2, axis=tuple(range(rank))) if rank else np.abs(f_hat) ** 2
    return float(np.sqrt(np.sum((1.0 + grid.k2) ** s * power)))


def hdot_norm(grid, f_hat, s):
    """Homogeneous H^s seminorm over nonzero frequencies."""
    rank = rank_of(grid, f_hat)
    power = np.sum(np.abs(f_hat) ** 2, axis=tuple(range(rank))) if rank else np.abs(f_hat) ** 2
    nz = grid.k2 > 0
    return float(np.sqrt(np.sum(grid.k2[nz] ** s * power[nz])))


def _check_series(times, weight):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise InputError("need a nonempty 1-d array of times")
    if np.any(np.diff(t) <= 0):
        raise InputError("times must be strictly increasing")
    if weight is None:
        return t, np.ones_like(t)
    w = np.asarray(weight, dtype=float)
    if w.shape != t.shape:
        raise InputError("weight must have one value per time")
    if np.any(w < 0):
        raise InputError("weight must be nonnegative")
    return t, w


def _time_norm(t, w, values, q):
    """``(int w |g|^q dt)^(1/q)`` by the trapezoid rule along axis 0; sup for q = inf."""
    w = w.reshape((-1,) + (1,) * (values.ndim - 1))
    if q == np.inf:
        return np.max(np.where(w > 0, values, 0.0), axis=0)
    return np.trapezoid(w * values**q, t, axis=0) ** (1.0 / q)


def chemin_lerner_norm(ladder, times, fields, spec, weight=None):
    """Time-space norm with the time integral inside the block sum.

    ``|| 2^{ks} ( int_0^T w(t) ||Delta_k f(t)||_p^q dt )^{1/q} ||_{l^r}``
    with trapezoid quadrature on the sample times.
    """
    t, w = _check_series(times, weight)
    if len(fields) != t.size:
        raise InputError("need one field per time")
    table = np.array([block_norms(ladder, f, spec.p, spec.quadrature) for f in fields])
    per_block = _time_norm(t, w, table, spec.q)
    return _lr(_weights(ladder, spec.s) * per_block, spec.r)


def bochner_norm(ladder, times, fields, spec, weight=None):
    """``L^q_T`` norm of ``t -> ||f(t)||_{B^s_{p,r}}`` (same quadrature)."""
    t, w = _check_series(times, weight)
    if len(fields) != t.size:
        raise InputError("need one field per time")
    values = np.array([besov_norm(ladder, f, spec) for f in fields])
    return float(_time_norm(t, w, values, spec.q))
