"""Covariance dynamics  d(sigma)/dt = Y sigma + sigma Y^T + 2 D.

The exact solution is sigma(t) = M(t) (sigma(0) - sigma_inf) M(t)^T + sigma_inf
with M(t) = exp(Y t) and sigma_inf the solution of the Lyapunov equation
Y sigma_inf + sigma_inf Y^T = -2 D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteInputError, NumericalError, PreconditionError
from .model import CovarianceMatrix, EnvironmentSpec, OscillatorSpec, as_array


@dataclass(frozen=True, eq=False)
class DriftMatrix:
    """Block-diagonal drift Y with two blocks [[-lam, 1/m], [-m w^2, -lam]]."""

    m: float
    omega: float
    lam: float

    @property
    def block(self) -> np.ndarray:
        return np.array([[-self.lam, 1.0 / self.m],
                         [-self.m * self.omega ** 2, -self.lam]])

    @property
    def entries(self) -> np.ndarray:
        return np.kron(np.eye(2), self.block)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.entries)


@dataclass(frozen=True, eq=False)
class DiffusionMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)


@dataclass(frozen=True, eq=False)
class Propagator:
    entries: np.ndarray
    t: float


def build_drift(osc: OscillatorSpec, env: EnvironmentSpec) -> DriftMatrix:
    return DriftMatrix(osc.m, osc.omega, env.lam)


def build_diffusion(env: EnvironmentSpec) -> DiffusionMatrix:
    e = env
    return DiffusionMatrix(np.array([
        [e.d_xx, e.d_xpx, e.d_xy, e.d_xpy],
        [e.d_xpx, e.d_pxpx, e.d_ypx, e.d_pxpy],
        [e.d_xy, e.d_ypx, e.d_yy, e.d_ypy],
        [e.d_xpy, e.d_pxpy, e.d_ypy, e.d_pypy],
    ], dtype=float))


def expm_scaling_squaring(a, *, theta: float = 0.5, order: int = 18) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Taylor core.

    ``a`` is scaled by 2**-s until its 1-norm is at most ``theta``; the
    truncated Taylor series (Horner form) is then squared s times. With
    the defaults the truncation error is below 1e-22 relative.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    norm = np.linalg.norm(a, 1)
    s = int(math.ceil(math.log2(norm / theta))) if norm > theta else 0
    x = a / 2.0 ** s
    eye = np.eye(n)
    result = eye.copy()
    for k in range(order, 0, -1):
        result = eye + (x @ result) / k
    for _ in range(s):
        result = result @ result
    return result


def _check_time(t):
    if not math.isfinite(t):
        raise NonFiniteInputError(f"time must be finite, got {t!r}")
    if t < 0:
        raise PreconditionError(f"backward evolution is not supported (t={t})")


def block_propagators(y: DriftMatrix, times) -> np.ndarray:
    """Stack of exp(Y t) for every t in ``times``, shape (n, 4, 4)."""
    t = np.asarray(times, dtype=float)
    mw = y.m * y.omega
    decay = np.exp(-y.lam * t)
    c = np.cos(y.omega * t)
    s = np.sin(y.omega * t)
    out = np.zeros(t.shape + (4, 4))
    for k in (0, 2):
        out[..., k, k] = decay * c
        out[..., k, k + 1] = decay * s / mw
        out[..., k + 1, k] = -decay * mw * s
        out[..., k + 1, k + 1] = decay * c
    return out


def propagator(y: DriftMatrix, t: float, method: str = "block") -> Propagator:
    """M(t) = exp(Y t).

    ``method="block"`` uses the exact per-block rotation-times-decay form;
    ``method="generic"`` runs :func:`expm_scaling_squaring` on ``Y t`` and
    exists for cross-checking.
    """
    _check_time(t)
    if method == "block":
        m = block_propagators(y, t)
    elif method == "generic":
        m = expm_scaling_squaring(y.entries * t)
    else:
        raise ValueError(f"unknown propagator method {method!r}")
    return Propagator(m, float(t))


def lyapunov_residual(y: DriftMatrix, d: DiffusionMatrix, sigma) -> float:
    ye = y.entries
    s = np.asarray(sigma, dtype=float)
    return float(np.max(np.abs(ye @ s + s @ ye.T + 2.0 * d.entries)))


def steady_state(y: DriftMatrix, d: DiffusionMatrix) -> CovarianceMatrix:
    """Solve Y sigma + sigma Y^T = -2 D as a 16x16 linear system.

    Row-major vectorisation turns ``Y sigma`` into ``kron(Y, I)`` and
    ``sigma Y^T`` into ``kron(I, Y)``.
    """
    if not y.lam > 0:
        raise NumericalError(
            f"Lyapunov system has no stable solution for lambda = {y.lam} (need lambda > 0)")
    ye = y.entries
    eye = np.eye(4)
    op = np.kron(ye, eye) + np.kron(eye, ye)
    try:
        vec = np.linalg.solve(op, -2.0 * d.entries.ravel())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Lyapunov system is singular: {exc}") from exc
    sigma = vec.reshape(4, 4)
    return CovarianceMatrix(0.5 * (sigma + sigma.T))


def _evolve_array(m, sigma0, sigma_inf):
    delta = sigma0 - sigma_inf
    out = m @ delta @ np.swapaxes(m, -1, -2) + sigma_inf
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def evolve(sigma0, y: DriftMatrix, d: DiffusionMatrix, t: float, *,
           sigma_inf: CovarianceMatrix | None = None) -> CovarianceMatrix:
    """sigma(t) from the exact solution; pass ``sigma_inf`` to skip the Lyapunov solve."""
    _check_time(t)
    s0 = as_array(sigma0)
    if t == 0:
        return CovarianceMatrix(s0)
    if sigma_inf is None:
        sigma_inf = steady_state(y, d)
    m = block_propagators(y, t)
    return CovarianceMatrix(_evolve_array(m, s0, sigma_inf.entries))


@dataclass(frozen=True, eq=False)
class CovarianceFlow:
    """Precomputed (Y, D, sigma_inf) for one oscillator/environment pair.

    Immutable, so one instance can be shared by concurrent workers.
    """

    drift: DriftMatrix
    diffusion: DiffusionMatrix
    sigma_inf: CovarianceMatrix

    @classmethod
    def from_specs(cls, osc: OscillatorSpec, env: EnvironmentSpec) -> "CovarianceFlow":
        y = build_drift(osc, env)
        d = build_diffusion(env)
        return cls(y, d, steady_state(y, d))

    def at(self, sigma0, t: float) -> CovarianceMatrix:
        return evolve(sigma0, self.drift, self.diffusion, t, sigma_inf=self.sigma_inf)

    def trajectory(self, sigma0, times) -> np.ndarray:
        """sigma(t) for each t in ``times`` as an (n, 4, 4) array."""
        t = np.asarray(times, dtype=float)
        if np.any(t < 0):
            raise PreconditionError("backward evolution is not supported")
        m = block_propagators(self.drift, t)
        return _evolve_array(m, as_array(sigma0), self.sigma_inf.entries)


def _rk4_segment(s, ye, two_d, span, dt):
    # works on a single 4x4 system or a stack (n, 4, 4) stepped in lockstep
    n = max(1, math.ceil(span / dt - 1e-9))
    h = span / n
    yt = np.swapaxes(ye, -1, -2)

    def rhs(x):
        return ye @ x + x @ yt + two_d

    for _ in range(n):
        k1 = rhs(s)
        k2 = rhs(s + 0.5 * h * k1)
        k3 = rhs(s + 0.5 * h * k2)
        k4 = rhs(s + h * k3)
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return s


def _rk4_checkpoints(s, ye, two_d, times, dt):
    if not dt > 0:
        raise PreconditionError(f"dt must be positive, got {dt}")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise PreconditionError("checkpoint times must be non-negative and ascending")
    out = np.empty(times.shape + s.shape)
    now = 0.0
    for i, t in enumerate(times):
        if t > now:
            s = _rk4_segment(s, ye, two_d, t - now, dt)
            now = t
        out[i] = s
    return out


def ode_oracle_path(sigma0, y: DriftMatrix, d: DiffusionMatrix, times,
                    dt: float | None = None) -> np.ndarray:
    """Integrate the covariance ODE with classical RK4 through ``times``.

    Shares no code with the exact solution. Each interval between
    consecutive checkpoints is cut into ceil(span/dt) equal steps, so the
    step never exceeds ``dt`` and checkpoints are hit exactly. The default
    ``dt`` is 1e-3 / omega.
    """
    if dt is None:
        dt = 1e-3 / y.omega
    s = np.array(as_array(sigma0), dtype=float)
    return _rk4_checkpoints(s, y.entries, 2.0 * d.entries, times, dt)


def ode_oracle_batch(sigma0s, drifts, diffusions, times, dt: float) -> np.ndarray:
    """RK4 for many systems at once; returns ``(len(times), n, 4, 4)``.

    Same integrator and step rule as :func:`ode_oracle_path`, with every
    system advanced on the common step ``dt``.
    """
    s = np.array([as_array(x) for x in sigma0s], dtype=float)
    ye = np.array([y.entries for y in drifts])
    two_d = 2.0 * np.array([d.entries for d in diffusions])
    if not (len(s) == len(ye) == len(two_d)):
        raise ValueError("sigma0s, drifts and diffusions must have equal length")
    return _rk4_checkpoints(s, ye, two_d, times, dt)


def evolve_ode_oracle(sigma0, y: DriftMatrix, d: DiffusionMatrix, t: float,
                      dt: float | None = None) -> CovarianceMatrix:
    """sigma(t) by RK4 integration; an independent check on :func:`evolve`."""
    _check_time(t)
    if dt is not None and t > 0 and dt > t:
        raise PreconditionError(f"step dt={dt} exceeds the horizon t={t}")
    s = ode_oracle_path(sigma0, y, d, [t], dt)[0]
    return CovarianceMatrix(0.5 * (s + s.T))
