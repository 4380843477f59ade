"""Sampling S(t) along a trajectory and classifying entanglement transitions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import CovarianceFlow
from .entanglement import (ZERO_BAND, asymptotic_simon_gibbs, negativity_arrays,
                           simon_function, simon_s, simon_verdict)
from .errors import CoarseGridWarning, PreconditionError
from .model import EnvironmentSpec, OscillatorSpec, as_array

CLASSIFICATIONS = ("separable-throughout", "entangled-throughout", "generation",
                   "sudden-death", "collapse-and-revival", "temporary-generation")

DEFAULT_SAMPLES = 2000
MAX_BISECTIONS = 60


@dataclass(frozen=True, eq=False)
class EntanglementTrace:
    times: np.ndarray
    s_values: np.ndarray
    e_values: np.ndarray
    nu_tilde_minus: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.s_values) == len(self.e_values) == len(self.nu_tilde_minus) == n):
            raise ValueError("trace arrays must have equal length")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trace times must be strictly increasing")

    @property
    def entangled(self) -> np.ndarray:
        return self.s_values < -ZERO_BAND


@dataclass(frozen=True)
class Crossing:
    t: float
    direction: str  # "to-entangled" | "to-separable"


@dataclass(frozen=True)
class EventReport:
    crossings: tuple[Crossing, ...]
    classification: str
    asymptotic_verdict: str
    s_infinity: float
    final_verdict: str
    warnings: tuple[str, ...] = field(default=())


def trace(sigma0, osc: OscillatorSpec, env: EnvironmentSpec, t_max: float,
          n_samples: int = DEFAULT_SAMPLES, *, flow: CovarianceFlow | None = None
          ) -> EntanglementTrace:
    """S(t), E(t) and the PT-symplectic minimum on a uniform grid over [0, t_max]."""
    if not t_max > 0:
        raise PreconditionError(f"t_max must be positive, got {t_max}")
    if n_samples < 2:
        raise PreconditionError(f"need at least 2 samples, got {n_samples}")
    if flow is None:
        flow = CovarianceFlow.from_specs(osc, env)
    times = np.linspace(0.0, t_max, n_samples)
    sigmas = flow.trajectory(as_array(sigma0), times)
    e, nu = negativity_arrays(sigmas)
    return EntanglementTrace(times, simon_function(sigmas), e, nu)


def asymptotic_simon(osc: OscillatorSpec, env: EnvironmentSpec,
                     flow: CovarianceFlow | None = None) -> float:
    """S(inf) from the closed form when the bath is thermal-like, else from sigma_inf."""
    if env.is_gibbs(osc):
        return asymptotic_simon_gibbs(osc, env)
    if flow is None:
        flow = CovarianceFlow.from_specs(osc, env)
    return simon_s(flow.sigma_inf).s


def classify(directions, initially_entangled: bool, finally_entangled: bool) -> str:
    if not directions:
        return "entangled-throughout" if initially_entangled else "separable-throughout"
    if len(directions) == 1:
        return "generation" if directions[0] == "to-entangled" else "sudden-death"
    if directions[0] == "to-entangled" and not finally_entangled:
        return "temporary-generation"
    return "collapse-and-revival"


def detect_events(tr: EntanglementTrace, osc: OscillatorSpec, env: EnvironmentSpec,
                  sigma0, refine_tol: float = 1e-12, *,
                  flow: CovarianceFlow | None = None, probes: int = 8) -> EventReport:
    """Locate and classify sign changes of S(t) in a sampled trace.

    Each bracketing cell is first probed at ``probes`` interior points; more
    than one sign change there means the grid is too coarse, reported as a
    :class:`CoarseGridWarning`. The crossing is then bisected on the exact
    solution (not the samples) until the bracket is below ``refine_tol`` or
    60 halvings are done.
    """
    if flow is None:
        flow = CovarianceFlow.from_specs(osc, env)
    s0 = as_array(sigma0)

    def entangled_at(t):
        return float(simon_function(flow.trajectory(s0, [t])[0])) < -ZERO_BAND

    flags = tr.entangled
    notes = []
    crossings = []
    for i in np.flatnonzero(flags[1:] != flags[:-1]):
        lo, hi = float(tr.times[i]), float(tr.times[i + 1])
        inner = np.linspace(lo, hi, probes + 2)
        probe_flags = simon_function(flow.trajectory(s0, inner)) < -ZERO_BAND
        changes = int(np.count_nonzero(probe_flags[1:] != probe_flags[:-1]))
        if changes > 1:
            msg = (f"{changes} sign changes of S inside [{lo:.6g}, {hi:.6g}]; "
                   f"increase n_samples")
            warnings.warn(msg, CoarseGridWarning, stacklevel=2)
            notes.append(msg)
        start = bool(flags[i])
        for _ in range(MAX_BISECTIONS):
            if hi - lo <= refine_tol:
                break
            mid = 0.5 * (lo + hi)
            if entangled_at(mid) == start:
                lo = mid
            else:
                hi = mid
        direction = "to-separable" if start else "to-entangled"
        crossings.append(Crossing(0.5 * (lo + hi), direction))

    s_inf = asymptotic_simon(osc, env, flow)
    return EventReport(
        crossings=tuple(crossings),
        classification=classify([c.direction for c in crossings], bool(flags[0]),
                                bool(flags[-1])),
        asymptotic_verdict=simon_verdict(s_inf),
        s_infinity=s_inf,
        final_verdict="entangled" if flags[-1] else "separable",
        warnings=tuple(notes),
    )
