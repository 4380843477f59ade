"""Separability and entanglement of two-mode Gaussian states.

Generic functions work on any covariance matrix; the ``asymptotic_*``
functions are closed forms for the steady state of symmetric (and, where
noted, thermal-like) environments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundaryNegativityWarning, NumericalError, PreconditionError
from .model import (DEFAULT_TOL, J, PT_FLIP, EnvironmentSpec, OscillatorSpec, as_array,
                    symplectic_spectra)

#: |S| at or below this is reported as the separability boundary
ZERO_BAND = 1e-12
#: tolerance on f(sigma) = nu_tilde_minus^2, scaled by max(1, |det-sum|)
AGREEMENT_TOL = 1e-10


def _local_invariants(s):
    a = s[..., :2, :2]
    b = s[..., 2:, 2:]
    c = s[..., :2, 2:]
    return a, b, c, np.linalg.det(a), np.linalg.det(b), np.linalg.det(c)


def simon_function(sigmas) -> np.ndarray:
    """Simon's separability function on a single matrix or a stack.

    ``S = det A det B + (1/4 - |det C|)^2 - Tr[A J C J B J C^T J]
    - (det A + det B) / 4``; the state is separable iff S >= 0.
    """
    s = np.asarray(sigmas, dtype=float)
    a, b, c, det_a, det_b, det_c = _local_invariants(s)
    ct = np.swapaxes(c, -1, -2)
    chain = a @ J @ c @ J @ b @ J @ ct @ J
    trace = np.trace(chain, axis1=-2, axis2=-1)
    return det_a * det_b + (0.25 - np.abs(det_c)) ** 2 - trace - 0.25 * (det_a + det_b)


@dataclass(frozen=True)
class SimonValue:
    s: float
    verdict: str
    boundary: bool

    @property
    def entangled(self) -> bool:
        return self.verdict == "entangled"


def simon_verdict(s: float) -> str:
    return "entangled" if s < -ZERO_BAND else "separable"


def simon_s(sigma) -> SimonValue:
    s = float(simon_function(as_array(sigma)))
    return SimonValue(s, simon_verdict(s), abs(s) <= ZERO_BAND)


def f_sigma(sigmas):
    """Return ``(f, radicand)`` where f is the squared smallest PT-symplectic eigenvalue.

    ``f = h - sqrt(h^2 - det sigma)`` with ``h = (det A + det B)/2 - det C``.
    The radicand is clipped at zero before the square root.
    """
    s = np.asarray(sigmas, dtype=float)
    _, _, _, det_a, det_b, det_c = _local_invariants(s)
    h = 0.5 * (det_a + det_b) - det_c
    radicand = h * h - np.linalg.det(s)
    return h - np.sqrt(np.clip(radicand, 0.0, None)), radicand


def pt_symplectic_minimum(sigmas) -> np.ndarray:
    """Smallest symplectic eigenvalue of the partially transposed covariance."""
    s = np.asarray(sigmas, dtype=float)
    return symplectic_spectra(PT_FLIP @ s @ PT_FLIP)[..., 0]


@dataclass(frozen=True)
class NegativityValue:
    e: float
    f: float
    nu_tilde_minus: float

    @property
    def entangled(self) -> bool:
        return self.e > 0


def log_negativity(sigma, tol: float = DEFAULT_TOL) -> NegativityValue:
    """Logarithmic negativity ``E = -log2(4 f) / 2`` in bits.

    ``f`` comes from the determinant formula; the smallest symplectic
    eigenvalue of the partial transpose is computed separately from an
    eigendecomposition and must satisfy ``f = nu^2``. Values of ``f`` in
    ``(-tol, 0]`` give ``E = inf`` with a :class:`BoundaryNegativityWarning`.

    Raises
    ------
    NumericalError
        If the radicand or ``f`` is below ``-tol`` (degenerate covariance)
        or the two routes disagree.
    """
    s = as_array(sigma)
    f, radicand = (float(v) for v in f_sigma(s))
    if radicand < -tol:
        raise NumericalError(f"negative square-root argument in f(sigma): {radicand:.3g}")
    if f <= -tol:
        raise NumericalError(f"f(sigma) = {f:.3g} <= 0: degenerate covariance")
    nu = float(pt_symplectic_minimum(s))
    h = float(0.5 * (np.linalg.det(s[:2, :2]) + np.linalg.det(s[2:, 2:]))
              - np.linalg.det(s[:2, 2:]))
    if abs(f - nu * nu) > AGREEMENT_TOL * max(1.0, abs(h)):
        raise NumericalError(
            f"f(sigma) = {f!r} disagrees with partial-transpose spectrum nu^2 = {nu * nu!r}")
    if f <= 0:
        warnings.warn(f"f(sigma) = {f:.3g} within roundoff of zero; E clamped to +inf",
                      BoundaryNegativityWarning, stacklevel=2)
        return NegativityValue(math.inf, f, nu)
    return NegativityValue(-0.5 * math.log2(4.0 * f), f, nu)


def negativity_arrays(sigmas):
    """Vectorised ``(E, nu_tilde_minus)`` with NaN where f <= 0 or undefined."""
    f, radicand = f_sigma(sigmas)
    nu = pt_symplectic_minimum(sigmas)
    ok = (f > 0) & (radicand >= 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(ok, -0.5 * np.log2(np.where(ok, 4.0 * f, 1.0)), np.nan)
    return e, nu


# --- steady-state closed forms -------------------------------------------------

def _require_symmetric(env: EnvironmentSpec, tol: float):
    if not env.is_symmetric(tol):
        raise PreconditionError(
            "closed form needs d_xx=d_yy, d_xpx=d_ypy, d_pxpx=d_pypy, d_xpy=d_ypx")


def _require_gibbs(osc: OscillatorSpec, env: EnvironmentSpec, tol: float):
    if not env.is_gibbs(osc, tol):
        raise PreconditionError(
            "closed form needs a thermal-like environment: symmetric with "
            "(m w)^2 d_xx = d_pxpx, d_xpx = 0, (m w)^2 d_xy = d_pxpy")


def _cross_entries(m, w, lam, d_xy, d_xpy, d_pxpy):
    q = lam * lam + w * w
    s_xy = (m * m * (2 * lam * lam + w * w) * d_xy + 2 * m * lam * d_xpy + d_pxpy) / (
        2 * m * m * lam * q)
    s_xpy = (-m * m * w * w * d_xy + 2 * m * lam * d_xpy + d_pxpy) / (2 * m * q)
    s_pxpy = (m * m * w ** 4 * d_xy - 2 * m * w * w * lam * d_xpy
              + (2 * lam * lam + w * w) * d_pxpy) / (2 * lam * q)
    return np.array([[s_xy, s_xpy], [s_xpy, s_pxpy]])


def asymptotic_c_block(osc: OscillatorSpec, env: EnvironmentSpec,
                       tol: float = DEFAULT_TOL) -> np.ndarray:
    """Steady-state cross-correlation block C(inf) for a symmetric environment."""
    _require_symmetric(env, tol)
    return _cross_entries(osc.m, osc.omega, env.lam, env.d_xy, env.d_xpy, env.d_pxpy)


def asymptotic_a_block(osc: OscillatorSpec, env: EnvironmentSpec,
                       tol: float = DEFAULT_TOL) -> np.ndarray:
    """Steady-state single-mode block A(inf) = B(inf): the cross formulas with y -> x."""
    _require_symmetric(env, tol)
    return _cross_entries(osc.m, osc.omega, env.lam, env.d_xx, env.d_xpx, env.d_pxpx)


def asymptotic_det_c(osc: OscillatorSpec, env: EnvironmentSpec,
                     tol: float = DEFAULT_TOL) -> float:
    _require_symmetric(env, tol)
    m, w, lam = osc.m, osc.omega, env.lam
    head = (m * w * w * env.d_xy + env.d_pxpy / m) ** 2
    tail = 4 * lam * lam * (env.d_xy * env.d_pxpy - env.d_xpy ** 2)
    return (head + tail) / (4 * lam * lam * (lam * lam + w * w))


def asymptotic_simon_gibbs(osc: OscillatorSpec, env: EnvironmentSpec,
                           tol: float = DEFAULT_TOL) -> float:
    """Simon function of the steady state for a thermal-like environment.

    The compact expression below treats ``|det C(inf)|`` as ``-det C(inf)``;
    when ``det C(inf) > 0`` it overshoots by exactly ``det C(inf)``, which
    is subtracted back.
    """
    _require_gibbs(osc, env, tol)
    mw2 = (osc.m * osc.omega) ** 2
    lam2 = env.lam ** 2
    q = lam2 + osc.omega ** 2
    head = mw2 * (env.d_xx ** 2 - env.d_xy ** 2) / lam2 + env.d_xpy ** 2 / q - 0.25
    value = head ** 2 - 4 * mw2 * env.d_xx ** 2 * env.d_xpy ** 2 / (lam2 * q)
    return value - max(0.0, asymptotic_det_c(osc, env, tol))


def _require_uncorrelated_positions(env: EnvironmentSpec, tol: float):
    if abs(env.d_xy) > tol:
        raise PreconditionError(f"closed form needs d_xy = 0, got {env.d_xy}")


def _unimodal_ratio(osc: OscillatorSpec, env: EnvironmentSpec) -> float:
    return osc.m * osc.omega * env.d_xx / env.lam


def entanglement_interval(osc: OscillatorSpec, env: EnvironmentSpec,
                          tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """Open interval of ``d_xpy`` for which the steady state is entangled.

    Requires a thermal-like environment with ``d_xy = 0`` and
    ``m w d_xx / lam >= 1/2``. The steady state depends on ``d_xpy`` only
    through its magnitude, so membership should be tested on ``|d_xpy|``
    (see :func:`in_entanglement_interval`). Physical environments also
    need ``d_xpy <= d_xx``, which this function does not impose.
    """
    _require_gibbs(osc, env, tol)
    _require_uncorrelated_positions(env, tol)
    u = _unimodal_ratio(osc, env)
    if u < 0.5:
        raise PreconditionError(
            f"unimodal uncertainty condition m*omega*d_xx/lambda >= 1/2 violated ({u:.6g})")
    root = math.sqrt(env.lam ** 2 + osc.omega ** 2)
    return root * (u - 0.5), root * (u + 0.5)


def in_entanglement_interval(osc: OscillatorSpec, env: EnvironmentSpec,
                             tol: float = DEFAULT_TOL) -> bool:
    lo, hi = entanglement_interval(osc, env, tol)
    return lo < abs(env.d_xpy) < hi


def asymptotic_negativity(osc: OscillatorSpec, env: EnvironmentSpec,
                          tol: float = DEFAULT_TOL) -> float:
    """Steady-state logarithmic negativity (bits) for a thermal-like bath with d_xy = 0.

    Independent of the initial state.
    """
    _require_gibbs(osc, env, tol)
    _require_uncorrelated_positions(env, tol)
    gap = abs(_unimodal_ratio(osc, env)
              - abs(env.d_xpy) / math.sqrt(env.lam ** 2 + osc.omega ** 2))
    if gap == 0:
        return math.inf
    return -math.log2(2.0 * gap)
