"""Domain types: oscillators, environments, two-mode covariance matrices.

Conventions: hbar = 1, phase-space ordering (x, p_x, y, p_y), vacuum
covariance = identity / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import NonFiniteInputError

DEFAULT_TOL = 1e-9

#: single-mode symplectic form
J = np.array([[0.0, 1.0], [-1.0, 0.0]])
#: two-mode symplectic form in (x, p_x, y, p_y) ordering
OMEGA = np.kron(np.eye(2), J)
#: conjugation implementing partial transposition (p_y -> -p_y)
PT_FLIP = np.diag([1.0, 1.0, 1.0, -1.0])

DIFFUSION_FIELDS = ("d_xx", "d_xpx", "d_pxpx", "d_yy", "d_ypy", "d_pypy",
                    "d_xy", "d_xpy", "d_ypx", "d_pxpy")

# upper triangle of sigma, row-major
UPPER_KEYS = ("xx", "xpx", "xy", "xpy", "pxpx", "ypx", "pxpy", "yy", "ypy", "pypy")
_UPPER_INDEX = tuple(zip(*np.triu_indices(4)))


def _require_finite(**values):
    for name, value in values.items():
        if not math.isfinite(value):
            raise NonFiniteInputError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class OscillatorSpec:
    """Mass and angular frequency shared by both oscillators."""

    m: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        _require_finite(m=self.m, omega=self.omega)
        if self.m <= 0 or self.omega <= 0:
            raise ValueError(f"m and omega must be positive, got m={self.m}, omega={self.omega}")


@dataclass(frozen=True)
class EnvironmentSpec:
    """Dissipation rate ``lam`` and the ten diffusion coefficients.

    Any combination of values is representable; use
    :func:`validate_environment` to check positivity.
    """

    lam: float
    d_xx: float = 0.0
    d_xpx: float = 0.0
    d_pxpx: float = 0.0
    d_yy: float = 0.0
    d_ypy: float = 0.0
    d_pypy: float = 0.0
    d_xy: float = 0.0
    d_xpy: float = 0.0
    d_ypx: float = 0.0
    d_pxpy: float = 0.0

    def replace(self, **changes) -> "EnvironmentSpec":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_dict().values())

    def coefficient_matrix(self) -> np.ndarray:
        """Hermitian 4x4 matrix whose positivity encodes complete positivity."""
        h = 0.5j * self.lam
        return np.array([
            [self.d_xx, -self.d_xpx - h, self.d_xy, -self.d_xpy],
            [-self.d_xpx + h, self.d_pxpx, -self.d_ypx, self.d_pxpy],
            [self.d_xy, -self.d_ypx, self.d_yy, -self.d_ypy - h],
            [-self.d_xpy, self.d_pxpy, -self.d_ypy + h, self.d_pypy],
        ])

    def is_symmetric(self, tol: float = DEFAULT_TOL) -> bool:
        """Both oscillators see the same bath and the cross block is symmetric."""
        return (abs(self.d_xx - self.d_yy) <= tol
                and abs(self.d_xpx - self.d_ypy) <= tol
                and abs(self.d_pxpx - self.d_pypy) <= tol
                and abs(self.d_xpy - self.d_ypx) <= tol)

    def is_gibbs(self, osc: OscillatorSpec, tol: float = DEFAULT_TOL) -> bool:
        """Symmetric environment whose steady state is thermal-like."""
        k = (osc.m * osc.omega) ** 2
        return (self.is_symmetric(tol)
                and abs(k * self.d_xx - self.d_pxpx) <= tol
                and abs(self.d_xpx) <= tol
                and abs(k * self.d_xy - self.d_pxpy) <= tol)


def symmetric_environment(lam, d_xx, d_xpx, d_pxpx, d_xy, d_xpy, d_pxpy) -> EnvironmentSpec:
    """Environment with identical single-mode blocks and a symmetric cross block."""
    return EnvironmentSpec(lam=lam, d_xx=d_xx, d_xpx=d_xpx, d_pxpx=d_pxpx,
                           d_yy=d_xx, d_ypy=d_xpx, d_pypy=d_pxpx,
                           d_xy=d_xy, d_xpy=d_xpy, d_ypx=d_xpy, d_pxpy=d_pxpy)


def gibbs_environment(osc: OscillatorSpec, lam, d_xx, d_xy, d_xpy) -> EnvironmentSpec:
    """Symmetric environment with ``d_pxpx = (m w)^2 d_xx``, ``d_pxpy = (m w)^2 d_xy``."""
    k = (osc.m * osc.omega) ** 2
    return symmetric_environment(lam, d_xx, 0.0, k * d_xx, d_xy, d_xpy, k * d_xy)


@dataclass(frozen=True)
class Violation:
    name: str
    expression: str
    residual: float

    def __str__(self):
        return f"{self.name}: {self.expression} violated (residual {self.residual:.6g})"


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of :func:`validate_environment`.

    ``residuals`` holds lhs - rhs for every checked inequality, violated or
    not; ``min_eigenvalue`` is the smallest eigenvalue of the coefficient
    matrix whether or not complete positivity was enforced.
    """

    ok: bool
    violations: tuple[Violation, ...]
    residuals: dict = field(default_factory=dict)
    min_eigenvalue: float = math.nan

    def __bool__(self):
        return self.ok

    @property
    def completely_positive(self) -> bool:
        return self.min_eigenvalue >= 0.0

    def describe(self) -> str:
        if self.ok:
            return "environment ok"
        return "environment constraints violated:\n" + "\n".join(
            f"  {v}" for v in self.violations)


_MINORS = (
    ("x_px", "d_xx*d_pxpx - d_xpx^2 >= lambda^2/4",
     lambda e: e.d_xx * e.d_pxpx - e.d_xpx ** 2 - e.lam ** 2 / 4),
    ("y_py", "d_yy*d_pypy - d_ypy^2 >= lambda^2/4",
     lambda e: e.d_yy * e.d_pypy - e.d_ypy ** 2 - e.lam ** 2 / 4),
    ("x_y", "d_xx*d_yy - d_xy^2 >= 0",
     lambda e: e.d_xx * e.d_yy - e.d_xy ** 2),
    ("x_py", "d_xx*d_pypy - d_xpy^2 >= 0",
     lambda e: e.d_xx * e.d_pypy - e.d_xpy ** 2),
    ("y_px", "d_yy*d_pxpx - d_ypx^2 >= 0",
     lambda e: e.d_yy * e.d_pxpx - e.d_ypx ** 2),
    ("px_py", "d_pxpx*d_pypy - d_pxpy^2 >= 0",
     lambda e: e.d_pxpx * e.d_pypy - e.d_pxpy ** 2),
)


def validate_environment(env: EnvironmentSpec, tol: float = DEFAULT_TOL, *,
                         complete_positivity: bool = True) -> ValidationResult:
    """Check an environment against its positivity constraints.

    Always checks ``lambda > 0`` and the six two-by-two Cauchy-Schwarz
    inequalities. With ``complete_positivity`` (the default) the full
    Hermitian coefficient matrix must also have smallest eigenvalue
    ``>= -tol``; without it the eigenvalue is only reported.

    Raises
    ------
    NonFiniteInputError
        If any coefficient is NaN or infinite.
    """
    if not env.is_finite():
        raise NonFiniteInputError(f"environment has non-finite coefficients: {env}")
    if not tol >= 0:
        raise ValueError(f"tol must be non-negative, got {tol}")

    violations = []
    residuals = {"lambda": env.lam}
    if env.lam <= 0:
        violations.append(Violation("lambda", "lambda > 0", env.lam))
    for name, expression, residual_of in _MINORS:
        r = residual_of(env)
        residuals[name] = r
        if r < -tol:
            violations.append(Violation(name, expression, r))
    min_eig = float(np.linalg.eigvalsh(env.coefficient_matrix())[0])
    residuals["complete_positivity"] = min_eig
    if complete_positivity and min_eig < -tol:
        violations.append(Violation(
            "complete_positivity", "coefficient matrix positive semidefinite", min_eig))
    return ValidationResult(not violations, tuple(violations), residuals, min_eig)


def _symmetric_array(values, tol: float = 1e-10) -> np.ndarray:
    a = np.array(values, dtype=float)
    if a.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteInputError("covariance matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > tol * scale:
        raise ValueError("covariance matrix is not symmetric")
    return np.triu(a) + np.triu(a, 1).T


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Real symmetric 4x4 covariance in (x, p_x, y, p_y) ordering.

    The stored matrix is rebuilt from the upper triangle of the input, so
    it is exactly symmetric; inputs asymmetric beyond roundoff are refused.
    """

    entries: np.ndarray

    def __post_init__(self):
        a = _symmetric_array(self.entries)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def __repr__(self):
        return f"CovarianceMatrix({self.entries.tolist()!r})"

    @classmethod
    def vacuum(cls) -> "CovarianceMatrix":
        return cls(0.5 * np.eye(4))

    @classmethod
    def from_upper(cls, values: Sequence[float] | dict) -> "CovarianceMatrix":
        """Build from the 10 upper-triangle entries, in ``UPPER_KEYS`` order or by key."""
        if isinstance(values, dict):
            unknown = set(values) - set(UPPER_KEYS)
            if unknown:
                raise ValueError(f"unknown covariance entries: {sorted(unknown)}")
            values = [values.get(k, 0.0) for k in UPPER_KEYS]
        values = list(values)
        if len(values) != 10:
            raise ValueError(f"expected 10 upper-triangle entries, got {len(values)}")
        a = np.zeros((4, 4))
        for (i, j), v in zip(_UPPER_INDEX, values):
            a[i, j] = a[j, i] = v
        return cls(a)

    @classmethod
    def from_blocks(cls, a, b, c) -> "CovarianceMatrix":
        c = np.asarray(c, dtype=float)
        return cls(np.block([[np.asarray(a, float), c], [c.T, np.asarray(b, float)]]))

    def upper(self) -> tuple[float, ...]:
        return tuple(float(self.entries[i, j]) for i, j in _UPPER_INDEX)

    def swap_modes(self) -> "CovarianceMatrix":
        p = [2, 3, 0, 1]
        return CovarianceMatrix(self.entries[np.ix_(p, p)])

    def partial_transpose(self) -> "CovarianceMatrix":
        return CovarianceMatrix(PT_FLIP @ self.entries @ PT_FLIP)


def as_array(sigma) -> np.ndarray:
    """Symmetric 4x4 float array from a CovarianceMatrix or array-like."""
    if isinstance(sigma, CovarianceMatrix):
        return sigma.entries
    return _symmetric_array(sigma)


def preset_covariance(name: str) -> CovarianceMatrix:
    """Named initial states.

    ``vacuum``
        product of two ground states, identity / 2
    ``separable``
        A = B = diag(1, 1/2), no cross-correlations
    ``entangled``
        A = B = diag(1, 1/2), C = diag(1/2, -1/2); note det(sigma) = 0,
        so :func:`check_physical` rejects it
    """
    a = np.diag([1.0, 0.5])
    if name == "vacuum":
        return CovarianceMatrix.vacuum()
    if name == "separable":
        return CovarianceMatrix.from_blocks(a, a, np.zeros((2, 2)))
    if name == "entangled":
        return CovarianceMatrix.from_blocks(a, a, np.diag([0.5, -0.5]))
    raise ValueError(f"unknown covariance preset {name!r}")


PRESET_NAMES = ("vacuum", "separable", "entangled")


@dataclass(frozen=True)
class TwoModeBlocks:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def assemble(self) -> np.ndarray:
        return np.block([[self.a, self.c], [self.c.T, self.b]])


def blocks(sigma) -> TwoModeBlocks:
    """Split sigma into the mode-1 block A, mode-2 block B and cross block C."""
    s = as_array(sigma)
    return TwoModeBlocks(s[:2, :2].copy(), s[2:, 2:].copy(), s[:2, 2:].copy())


def symplectic_spectra(sigmas, *, psd_tol: float = 1e-12) -> np.ndarray:
    """Symplectic eigenvalues of a stack of 4x4 covariances, shape (..., 2).

    These are the moduli of the eigenvalues of ``i Omega sigma``, each of
    which appears twice. For positive semidefinite sigma the Hermitian
    similar form ``i sqrt(sigma) Omega sqrt(sigma)`` is diagonalised
    instead, which stays accurate when the eigenvalues coincide or vanish.
    Matrices with a negative eigenvalue fall back to a general eigensolve.
    """
    s = np.asarray(sigmas, dtype=float)
    flat = s.reshape(-1, 4, 4)
    w, v = np.linalg.eigh(flat)
    psd = w[:, 0] >= -psd_tol * np.maximum(1.0, np.abs(w[:, -1]))
    root = (v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]) @ np.swapaxes(v, 1, 2)
    ev = np.abs(np.linalg.eigvalsh(1j * (root @ OMEGA @ root)))
    for i in np.flatnonzero(~psd):
        ev[i] = np.abs(np.linalg.eigvals(1j * OMEGA @ flat[i]))
    ev = np.sort(ev, axis=-1)
    pairs = 0.5 * (ev[:, 0::2] + ev[:, 1::2])
    return pairs.reshape(s.shape[:-2] + (2,))


def symplectic_spectrum(sigma) -> tuple[float, float]:
    """``(nu_minus, nu_plus)`` for a single covariance."""
    nu = symplectic_spectra(np.asarray(sigma, dtype=float))
    return float(nu[0]), float(nu[1])


@dataclass(frozen=True)
class PhysicalityReport:
    symplectic_eigenvalues: tuple[float, float]
    is_physical: bool
    min_margin: float


def check_physical(sigma, tol: float = DEFAULT_TOL) -> PhysicalityReport:
    """Test the uncertainty relation ``nu_minus >= 1/2``.

    Raises ``ValueError`` if ``sigma`` is not symmetric.
    """
    nu = symplectic_spectrum(as_array(sigma))
    margin = nu[0] - 0.5
    return PhysicalityReport(nu, margin >= -tol, margin)


def local_symplectic(s1: Iterable, s2: Iterable) -> np.ndarray:
    """Direct sum of two 2x2 matrices acting on mode 1 and mode 2."""
    out = np.zeros((4, 4))
    out[:2, :2] = np.asarray(s1, dtype=float)
    out[2:, 2:] = np.asarray(s2, dtype=float)
    return out
