"""
Post-processing of flow states and recorded runs: Sobolev-type energy
records, the time-weighted functionals, derived fields (normalised
potential stress, effective flux), L^2 balance residuals and exponential
decay fits.

States are used through their ``grid``, ``u``, ``tau`` and ``t``
attributes; configs through ``nu``, ``a``, ``alpha`` and ``nonlinear``.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import spectral as sp
from .errors import InputError
from .littlewood_paley import besov_norm

CSV_COLUMNS = (
    "t", "l2_u", "l2_tau", "h3_u", "h3_tau",
    "h2_grad_u", "h2_grad_tau", "h3_grad_tau", "balance_residual", "blowup",
)

DEFAULT_WINDOW = 0.6
FIT_FLOOR = 1e-13


def _power(grid, f_hat):
    rank = sp.rank_of(grid, f_hat)
    return np.sum(np.abs(f_hat) ** 2, axis=tuple(range(rank))) if rank else np.abs(f_hat) ** 2


def grad_sobolev_norm(grid, f_hat, order, s):
    """``|| grad^order f ||_{H^s}`` via Parseval: ``sum (1+r)^s r^order |f|^2``."""
    return float(np.sqrt(np.sum((1.0 + grid.k2) ** s * grid.k2**order * _power(grid, f_hat))))


@dataclass
class EnergyRecord:
    t: float
    l2_u: float
    l2_tau: float
    h3_u: float
    h3_tau: float
    h2_grad_u: float
    h2_grad_tau: float
    h3_grad_tau: float
    h1_grad2_u: float
    h2_grad2_tau: float
    balance_residual: float = float("nan")
    blowup: bool = False
    besov: dict = field(default_factory=dict)

    def csv_row(self):
        return [self.t, self.l2_u, self.l2_tau, self.h3_u, self.h3_tau, self.h2_grad_u,
                self.h2_grad_tau, self.h3_grad_tau, self.balance_residual, int(self.blowup)]


def energy_record(state, balance_residual=float("nan"), blowup=False, ladder=None,
                  besov_specs=()):
    """Norms of one state. ``besov_specs`` is a sequence of ``(name, NormSpec)``."""
    g, u, tau = state.grid, state.u, state.tau
    besov = {}
    for name, spec in besov_specs:
        besov[f"u:{name}"] = besov_norm(ladder, u, spec)
        besov[f"tau:{name}"] = besov_norm(ladder, tau, spec)
    return EnergyRecord(
        t=float(state.t),
        l2_u=sp.l2_norm(u),
        l2_tau=sp.l2_norm(tau),
        h3_u=grad_sobolev_norm(g, u, 0, 3),
        h3_tau=grad_sobolev_norm(g, tau, 0, 3),
        h2_grad_u=grad_sobolev_norm(g, u, 1, 2),
        h2_grad_tau=grad_sobolev_norm(g, tau, 1, 2),
        h3_grad_tau=grad_sobolev_norm(g, tau, 1, 3),
        h1_grad2_u=grad_sobolev_norm(g, u, 2, 1),
        h2_grad2_tau=grad_sobolev_norm(g, tau, 2, 2),
        balance_residual=float(balance_residual),
        blowup=bool(blowup),
        besov=besov,
    )


def _series(records):
    if not records:
        raise InputError("empty series")
    t = np.array([r.t for r in records], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise InputError("record times must be strictly increasing")
    return t


def _running_trapezoid(t, y):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def energy_tilde_1(records, running=False):
    """``sup ||(u, tau)||_{H^3}^2 + int (||grad u||_{H^2}^2 + ||grad tau||_{H^3}^2)``.

    ``||(f, g)||`` is ``||f|| + ||g||``. With ``running=True`` the value at
    every recorded horizon is returned.
    """
    t = _series(records)
    sup_part = np.maximum.accumulate(np.array([(r.h3_u + r.h3_tau) ** 2 for r in records]))
    integrand = np.array([r.h2_grad_u**2 + r.h3_grad_tau**2 for r in records])
    values = sup_part + _running_trapezoid(t, integrand)
    return values if running else float(values[-1])


def energy_tilde_2(records, running=False):
    """Time-weighted functional with weight ``(1+s)^2`` on the gradient norms."""
    t = _series(records)
    w = (1.0 + t) ** 2
    sup_part = np.maximum.accumulate(
        w * np.array([(r.h2_grad_u + r.h2_grad_tau) ** 2 for r in records])
    )
    integrand = w * np.array([r.h1_grad2_u**2 + r.h2_grad2_tau**2 for r in records])
    values = sup_part + _running_trapezoid(t, integrand)
    return values if running else float(values[-1])


@dataclass
class DerivedFields:
    delta: np.ndarray
    flux: np.ndarray
    v: np.ndarray


def derived_fields(grid, u_hat, tau_hat):
    """``delta = Lambda^-1 div Q tau``, ``G = -Q tau - grad lap^-1 u / 2``,
    ``v = Lambda^-1 P div tau``."""
    _, q = sp.helmholtz_tensor(grid, tau_hat)
    delta = sp.lambda_power(grid, sp.div_tensor(grid, q), -1)
    flux = -q - 0.5 * sp.grad(grid, sp.inv_laplacian(grid, u_hat))
    v = sp.lambda_power(grid, sp.leray_project(grid, sp.div_tensor(grid, tau_hat)), -1)
    return DerivedFields(delta, flux, v)


def effective_flux_rhs(grid, u_hat, tau_hat, nu=1.0, a=0.0, nonlinear=None):
    """Right-hand side of the effective flux equation ``G_t = ...``.

    Linear part: ``nu lap G + a Q tau - (1-nu)/2 grad u - grad lap^-1 P div tau / 2``.
    ``nonlinear=(g1, g2)`` adds ``-grad lap^-1 P g1 / 2 - Q g2``.
    """
    flux = derived_fields(grid, u_hat, tau_hat).flux
    _, q = sp.helmholtz_tensor(grid, tau_hat)
    pdiv = sp.leray_project(grid, sp.div_tensor(grid, tau_hat))
    out = (
        nu * sp.laplacian(grid, flux)
        + a * q
        - 0.5 * (1.0 - nu) * sp.grad(grid, u_hat)
        - 0.5 * sp.grad(grid, sp.inv_laplacian(grid, pdiv))
    )
    if nonlinear is not None:
        g1, g2 = nonlinear
        out = out - 0.5 * sp.grad(grid, sp.inv_laplacian(grid, sp.leray_project(grid, g1)))
        out = out - sp.helmholtz_tensor(grid, g2)[1]
    return out


def pairing_defect(grid, u_hat, tau_hat, k):
    """``<grad^k div tau, grad^k u> + <grad^k D(u), grad^k tau>`` relative to its terms."""
    w = grid.k2**k
    div_tau = sp.div_tensor(grid, tau_hat)
    gu = sp.grad(grid, u_hat)
    strain = 0.5 * (gu + np.swapaxes(gu, 0, 1))
    first = sp.inner(w * div_tau, u_hat)
    second = sp.inner(w * strain, tau_hat)
    scale = abs(first) + abs(second)
    return abs(first + second) / scale if scale else 0.0


def stretching_work(grid, u_hat, tau_hat):
    """``<D tau + tau D, tau>`` by grid quadrature."""
    gu = grid.to_physical(sp.grad(grid, u_hat))
    strain = 0.5 * (gu + np.swapaxes(gu, 0, 1))
    tau = grid.to_physical(tau_hat)
    prod = np.einsum("ik...,kj...->ij...", strain, tau)
    prod = prod + np.swapaxes(prod, 0, 1)
    return float(np.mean(np.sum(prod * tau, axis=(0, 1))))


def corotational_work(grid, u_hat, tau_hat):
    """``<tau W - W tau, tau>`` by grid quadrature (zero pointwise)."""
    gu = grid.to_physical(sp.grad(grid, u_hat))
    spin = 0.5 * (gu - np.swapaxes(gu, 0, 1))
    tau = grid.to_physical(tau_hat)
    g0 = np.einsum("ik...,kj...->ij...", tau, spin) - np.einsum("ik...,kj...->ij...", spin, tau)
    return float(np.mean(np.sum(g0 * tau, axis=(0, 1))))


def l2_energy(state):
    return 0.5 * (sp.l2_norm(state.u) ** 2 + sp.l2_norm(state.tau) ** 2)


def dissipation(state, config):
    """``nu ||grad tau||^2 + a ||tau||^2 - alpha <D tau + tau D, tau>``."""
    g = state.grid
    out = config.nu * grad_sobolev_norm(g, state.tau, 1, 0) ** 2 + config.a * sp.l2_norm(state.tau) ** 2
    if config.nonlinear and config.alpha:
        out -= config.alpha * stretching_work(g, state.u, state.tau)
    return out


def step_balance(s0, s1, config):
    """Signed defect ``E1 - E0 + dt (Dis0 + Dis1) / 2`` of the L^2 balance over one step."""
    if s0.grid != s1.grid:
        raise InputError("states live on different grids")
    dt = s1.t - s0.t
    return l2_energy(s1) - l2_energy(s0) + 0.5 * dt * (dissipation(s0, config) + dissipation(s1, config))


def balance_residual(s0, s1, config):
    """``|dE/dt + nu ||grad tau||^2 + a ||tau||^2 - alpha W|`` across two states."""
    dt = s1.t - s0.t
    if not dt > 0:
        raise InputError("states must be in increasing time order")
    return abs(step_balance(s0, s1, config)) / dt


@dataclass
class DecayFit:
    rate: float
    amplitude: float
    r2: float
    window: tuple
    samples: int

    def to_json(self, series):
        out = asdict(self)
        out["series"] = series
        out["window"] = list(self.window)
        return {k: out[k] for k in ("series", "window", "rate", "amplitude", "r2")}


def fit_decay_rate(t, values, window=DEFAULT_WINDOW, floor=FIT_FLOOR):
    """Least-squares fit of ``log value = log amplitude - rate * t``.

    ``window`` is either the trailing fraction of samples to use or an
    explicit ``(t_start, t_stop)`` interval. Samples at or below ``floor``
    are dropped. Positive ``rate`` means decay.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise InputError("t and values must be 1-d arrays of equal length")
    if isinstance(window, tuple):
        sel = (t >= window[0]) & (t <= window[1])
    else:
        if not 0 < window <= 1:
            raise InputError("window fraction must lie in (0, 1]")
        start = int(math.floor((1.0 - window) * t.size))
        sel = np.arange(t.size) >= start
    tw, yw = t[sel], y[sel]
    if np.any(~np.isfinite(yw)) or np.any(yw <= 0):
        raise InputError("nonpositive or non-finite values in the fit window")
    keep = yw > floor
    tw, yw = tw[keep], yw[keep]
    if tw.size < 5:
        raise InputError(f"need at least 5 samples above {floor:g}, got {tw.size}")
    logy = np.log(yw)
    design = np.column_stack([np.ones_like(tw), tw])
    (intercept, slope), *_ = np.linalg.lstsq(design, logy, rcond=None)
    resid = logy - (intercept + slope * tw)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(logy @ logy)):
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return DecayFit(float(-slope), float(np.exp(intercept)), float(r2),
                    (float(tw[0]), float(tw[-1])), int(tw.size))


def write_energy_csv(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(x) for x in rec.csv_row()])


def read_energy_csv(path):
    """Columns of an energy CSV as a dict of float arrays."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_fit_json(path, fits):
    with open(path, "w") as fh:
        json.dump(fits, fh, indent=2, sort_keys=True)
        fh.write("\n")
