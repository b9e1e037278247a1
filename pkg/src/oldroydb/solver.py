"""
Pseudo-spectral integrator for the Oldroyd-B system without velocity
dissipation on the periodic box::

    u_t + u.grad u + grad p = div tau,                 div u = 0,
    tau_t + u.grad tau - nu lap tau + a tau + g_alpha(tau, grad u) = D(u),
    g_alpha(tau, grad u) = tau W - W tau - alpha (D tau + tau D),

with ``D`` and ``W`` the symmetric and antisymmetric parts of
``(grad u)_{ij} = d_j u_i``. Pressure is removed by the Leray projection.

Time stepping is integrating-factor Heun (second order): the diagonal
stress operator ``-nu |xi|^2 - a`` is applied through exact exponentials,
everything else is explicit. Products are formed on the grid and
dealiased with the 2/3 rule.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral as sp
from .diagnostics import energy_record, step_balance
from .errors import BlowUpError, ConfigurationError, InputError
from .littlewood_paley import sobolev_norm

log = logging.getLogger(__name__)

# Velocity viscosity and coupling constants are fixed for this model.
MU = 0.0
K1 = 1.0
K2 = 1.0

MAX_PROJECTION_ITERS = 200


@dataclass(frozen=True)
class InitSpec:
    """Recipe for seeded band-limited initial data.

    ``u_h3`` and ``tau_h3`` are the target H^3 norms; coefficients have
    amplitude ``|xi|**-spectrum_decay`` on ``1 <= |xi| <= kmax``.
    """

    u_h3: float = 0.005
    tau_h3: float = 0.005
    div_free_tau: bool = False
    spectrum_decay: float = 3.0
    kmax: float = 8.0

    def __post_init__(self):
        if self.u_h3 < 0 or self.tau_h3 < 0:
            raise ConfigurationError("H^3 targets must be nonnegative")
        if self.kmax < 1:
            raise ConfigurationError("kmax must be >= 1")


@dataclass(frozen=True)
class SimConfig:
    dim: int = 2
    n: int = 64
    nu: float = 1.0
    alpha: float = 0.0
    a: float = 0.0
    dt: float = 2e-3
    t_end: float = 1.0
    output_stride: int = 50
    seed: int = 0
    k0: int = 2
    nonlinear: bool = True
    init: InitSpec = field(default_factory=InitSpec)

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.nu > 0:
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if not -1 <= self.alpha <= 1:
            raise ConfigurationError(f"alpha must lie in [-1, 1], got {self.alpha}")
        if self.a < 0:
            raise ConfigurationError(f"a must be nonnegative, got {self.a}")
        if self.t_end < 0:
            raise ConfigurationError("t_end must be nonnegative")
        if self.output_stride < 1:
            raise ConfigurationError("output_stride must be >= 1")
        if self.k0 < 1:
            raise ConfigurationError("k0 must be >= 1")
        self.grid  # validates dim and n

    @property
    def grid(self):
        return sp.PeriodicGrid(self.dim, self.n)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


@dataclass
class FlowState:
    """Velocity and stress coefficients at time ``t``."""

    grid: sp.PeriodicGrid
    u: np.ndarray
    tau: np.ndarray
    t: float = 0.0

    def copy(self):
        return FlowState(self.grid, self.u.copy(), self.tau.copy(), self.t)

    def fields(self):
        """The state as flagged :class:`SpectralField` objects."""
        return (
            sp.SpectralField(self.grid, self.u, divergence_free=True),
            sp.SpectralField(self.grid, self.tau, symmetric=True),
        )


@dataclass
class NonlinearTerms:
    """``g1 = -u.grad u`` (not projected) and ``g2 = -u.grad tau - g_alpha``."""

    g1: np.ndarray
    g2: np.ndarray


def strain_and_vorticity(grid, u_hat):
    """Coefficients of ``D(u)`` and ``W(u)``."""
    gu = sp.grad(grid, u_hat)
    gt = np.swapaxes(gu, 0, 1)
    return 0.5 * (gu + gt), 0.5 * (gu - gt)


def _g_alpha_physical(tau, gu, alpha):
    """Pointwise ``tau W - W tau - alpha (D tau + tau D)`` from grid samples."""
    gt = np.swapaxes(gu, 0, 1)
    strain = 0.5 * (gu + gt)
    spin = 0.5 * (gu - gt)
    out = _matmul(tau, spin) - _matmul(spin, tau)
    if alpha:
        out = out - alpha * (_matmul(strain, tau) + _matmul(tau, strain))
    return out


def _matmul(x, y):
    return np.einsum("ik...,kj...->ij...", x, y)


def g_alpha(grid, tau_hat, u_hat, alpha):
    """Coefficients of ``g_alpha(tau, grad u)``, formed on the grid then dealiased."""
    sp._require(grid, tau_hat, sp.TENSOR, "g_alpha")
    tau = grid.to_physical(tau_hat)
    gu = grid.to_physical(sp.grad(grid, u_hat))
    out = grid.to_spectral(_g_alpha_physical(tau, gu, alpha))
    return sp.dealias_mask(grid, out)


def _products(grid, u_hat, tau_hat, alpha):
    """Nonlinear terms in physical space; also returns ``max |u|``."""
    u = grid.to_physical(u_hat)
    gu = grid.to_physical(sp.grad(grid, u_hat))
    tau = grid.to_physical(tau_hat)
    gtau = grid.to_physical(tau_hat[:, :, None] * (1j * grid.kd)[None, None])
    g1 = -np.einsum("j...,ij...->i...", u, gu)
    g2 = -np.einsum("k...,ijk...->ij...", u, gtau) - _g_alpha_physical(tau, gu, alpha)
    umax = float(np.sqrt(np.max(np.sum(u**2, axis=0))))
    return g1, g2, umax


def rhs_nonlinear(state, config):
    grid = state.grid
    if not config.nonlinear:
        return NonlinearTerms(grid.zeros(sp.VECTOR), grid.zeros(sp.TENSOR))
    g1, g2, _ = _products(grid, state.u, state.tau, config.alpha)
    g1 = sp.dealias_mask(grid, grid.to_spectral(g1))
    g2 = sp.dealias_mask(grid, grid.to_spectral(g2))
    return NonlinearTerms(g1, g2)


def _tendency(grid, u_hat, tau_hat, config):
    """Explicit part of the right-hand side and ``max |u|``."""
    du = sp.div_tensor(grid, tau_hat)
    gu = sp.grad(grid, u_hat)
    dtau = 0.5 * (gu + np.swapaxes(gu, 0, 1))
    umax = 0.0
    if config.nonlinear:
        g1, g2, umax = _products(grid, u_hat, tau_hat, config.alpha)
        du = du + sp.dealias_mask(grid, grid.to_spectral(g1))
        dtau = dtau + sp.dealias_mask(grid, grid.to_spectral(g2))
    du = sp.leray_project(grid, du)
    # The mean velocity obeys d/dt mean(u) = 0 exactly.
    du[(slice(None),) + (0,) * grid.dim] = 0.0
    return du, dtau, umax


def _integrating_factor(grid, config, dt):
    return np.exp(-(config.nu * grid.k2 + config.a) * dt)


def _advance(state, config):
    grid = state.grid
    dt = config.dt
    e = _integrating_factor(grid, config, dt)
    k1u, k1t, umax = _tendency(grid, state.u, state.tau, config)
    u_star = state.u + dt * k1u
    tau_star = e * (state.tau + dt * k1t)
    k2u, k2t, _ = _tendency(grid, u_star, tau_star, config)
    u_new = state.u + 0.5 * dt * (k1u + k2u)
    tau_new = e * (state.tau + 0.5 * dt * k1t) + 0.5 * dt * k2t

    mean = (slice(None),) + (0,) * grid.dim
    mean_u = state.u[mean].copy()
    u_new = sp.dealias_mask(grid, sp.leray_project(grid, u_new))
    u_new[mean] = mean_u
    tau_new = sp.dealias_mask(grid, sp.symmetrize(tau_new))
    t_new = state.t + dt
    if not (np.all(np.isfinite(u_new)) and np.all(np.isfinite(tau_new))):
        raise BlowUpError(t_new)
    return FlowState(grid, u_new, tau_new, t_new), umax


def step(state, config):
    """Advance one time step of size ``config.dt``."""
    return _advance(state, config)[0]


def tensor_divergence_residual(grid, tau_hat):
    """Largest per-mode ``|tau(xi) xi| / (|xi| ||tau(xi)||)``."""
    num = np.sqrt(np.sum(np.abs(np.sum(tau_hat * grid.kd[None], axis=1)) ** 2, axis=0))
    den = grid.kabs * np.sqrt(np.sum(np.abs(tau_hat) ** 2, axis=(0, 1)))
    active = den > 0
    return float(np.max(num[active] / den[active])) if active.any() else 0.0


def make_initial_data(spec, grid, seed):
    """Seeded band-limited ``(u0, tau0)`` scaled to the H^3 targets.

    ``u0`` is divergence-free with zero mean. With ``div_free_tau`` the
    stress is made symmetric with divergence-free rows by alternating the
    two projections.
    """
    rng = np.random.default_rng(seed)
    u = sp.random_field(grid, sp.VECTOR, rng, kmax=spec.kmax, decay=spec.spectrum_decay)
    u = sp.leray_project(grid, u)
    tau = sp.symmetrize(
        sp.random_field(grid, sp.TENSOR, rng, kmax=spec.kmax, decay=spec.spectrum_decay)
    )
    if spec.div_free_tau:
        for _ in range(MAX_PROJECTION_ITERS):
            tau = sp.symmetrize(sp.helmholtz_tensor(grid, tau)[0])
            if tensor_divergence_residual(grid, tau) <= 1e-12:
                break
        else:
            raise InputError(
                "alternating projections did not converge; try a different spectrum"
            )
    u = _rescale(grid, u, spec.u_h3)
    tau = _rescale(grid, tau, spec.tau_h3)
    return FlowState(grid, u, tau, 0.0)


def _rescale(grid, f_hat, target):
    norm = sobolev_norm(grid, f_hat, 3)
    if target == 0 or norm == 0:
        return np.zeros_like(f_hat)
    return f_hat * (target / norm)


@dataclass
class RunResult:
    config: SimConfig
    records: list
    states: list
    final: FlowState
    blowup_time: float = None
    stats: dict = field(default_factory=dict)

    @property
    def blew_up(self):
        return self.blowup_time is not None


def run(config, initial=None, keep_states=False, check_invariants=False, besov_specs=(),
        on_record=None):
    """Integrate from 0 to ``t_end`` and record diagnostics every ``output_stride`` steps.

    Parameters
    ----------
    config : SimConfig
    initial : FlowState, optional
        Defaults to ``make_initial_data(config.init, config.grid, config.seed)``.
    keep_states : bool
        Keep a copy of the state at every recorded time.
    check_invariants : bool
        Track the divergence residual, stress symmetry and mean drift after
        every step (in ``stats``).
    besov_specs : sequence of (name, NormSpec)
        Extra Besov norms of ``u`` and ``tau`` stored on each record.
    on_record : callable, optional
        Called with ``(state, record)`` at each recorded time.

    A blow-up stops the run; the partial records end with one flagged
    ``blowup`` and ``blowup_time`` is set.
    """
    grid = config.grid
    state = initial if initial is not None else make_initial_data(config.init, grid, config.seed)
    if state.grid != grid:
        raise ConfigurationError("initial state lives on a different grid")
    ladder = None
    if besov_specs:
        from .littlewood_paley import build_ladder

        ladder = build_ladder(grid, config.k0)

    mean_index = (slice(None),) + (0,) * grid.dim
    mean0 = state.u[mean_index].copy()
    stats = {
        "max_div_residual": sp.divergence_residual(grid, state.u),
        "max_symmetry_defect": float(np.max(np.abs(state.tau - np.swapaxes(state.tau, 0, 1)))),
        "mean_drift": 0.0,
        "max_cfl_ratio": 0.0,
        "cumulative_balance": 0.0,
        "steps": 0,
    }
    records, states = [], []

    def emit(s, residual, blowup=False):
        rec = energy_record(s, residual, blowup=blowup, ladder=ladder, besov_specs=besov_specs)
        records.append(rec)
        if keep_states:
            states.append(s.copy())
        if on_record is not None:
            on_record(s, rec)

    emit(state, float("nan"))
    t0 = state.t
    blowup_time = None
    residual = float("nan")
    for i in range(config.n_steps):
        try:
            # overflow on the way to a blow-up is reported through BlowUpError
            with np.errstate(over="ignore", invalid="ignore"):
                new, umax = _advance(state, config)
        except BlowUpError as exc:
            blowup_time = exc.t
            log.warning("blow-up at t=%.6g", exc.t)
            with np.errstate(over="ignore", invalid="ignore"):
                emit(replace(state, t=exc.t), float("nan"), blowup=True)
            break
        # time from the step count, so records land on exact multiples of dt
        new.t = t0 + (i + 1) * config.dt
        cfl = config.dt * config.n * umax / 0.5
        stats["max_cfl_ratio"] = max(stats["max_cfl_ratio"], cfl)
        if cfl > 1 and stats.get("cfl_warned") is None:
            stats["cfl_warned"] = new.t
            log.warning("CFL guard exceeded at t=%.6g (ratio %.3g)", new.t, cfl)
        signed = step_balance(state, new, config)
        stats["cumulative_balance"] += signed
        residual = abs(signed) / config.dt
        if check_invariants:
            stats["max_div_residual"] = max(
                stats["max_div_residual"], sp.divergence_residual(grid, new.u)
            )
            stats["max_symmetry_defect"] = max(
                stats["max_symmetry_defect"],
                float(np.max(np.abs(new.tau - np.swapaxes(new.tau, 0, 1)))),
            )
            stats["mean_drift"] = max(
                stats["mean_drift"], float(np.max(np.abs(new.u[mean_index] - mean0)))
            )
        state = new
        stats["steps"] = i + 1
        if (i + 1) % config.output_stride == 0 or i + 1 == config.n_steps:
            emit(state, residual)
    return RunResult(config, records, states, state, blowup_time, stats)
