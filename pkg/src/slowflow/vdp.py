"""Built-in oscillators in rotating (slow) coordinates and their resonance curves.

A weakly forced oscillator  u'' + eps*d(u, u') * u' + (1 + a*eps) u =
eps * lam * sin t  is reduced to standard slow form by the substitution

    u = M sin t + N cos t,      u' = M cos t - N sin t,

(constraint M' sin t + N' cos t = 0), which gives exactly

    M' =  eps * F(t, M, N) cos t,
    N' = -eps * F(t, M, N) sin t,       F = -d(u,u')*u' - a*u + lam*sin t.

Two damping laws are built in: the piecewise-linear ``|u| - 1`` and the
classical ``u^2 - 1``.  For both, the averaged field has closed-form value and
Jacobian; the amplitude A = sqrt(M^2 + N^2) of its roots solves a scalar
amplitude equation, and the root is asymptotically stable exactly when the
Jacobian determinant is positive and its trace negative.  Those two signed
quantities are exposed as ``ineq6``/``ineq7`` (the CSV column names of the
resonance reports).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import averaging, smalllin
from .errors import MaxIterations, RootRecoveryFailed, SingularJacobian
from .odeint import PeriodicField

__all__ = [
    "ForcingParams", "ResonancePoint",
    "nonsmooth_vdp_field", "classical_vdp_field", "linear_test_field",
    "averaged_closed_form", "averaged_jacobian_closed_form",
    "amplitude_equation", "amplitude_equation_derivative", "amplitude_roots",
    "stability_indicators", "recover_root", "resonance_point",
    "resonance_curve_nonsmooth", "resonance_curve_classical",
    "reconstruct_u", "UNFORCED_AMPLITUDE",
]

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
UNFORCED_AMPLITUDE = {"nonsmooth": 3.0 * math.pi / 4.0, "classical": 2.0}

AMP_MATCH_TOL = 1e-6          # recovered root must match the amplitude this well
DEGENERATE_BAND = 1e-9        # |indicator| below this is flagged degenerate


@dataclass(frozen=True)
class ForcingParams:
    """Detuning ``a`` and forcing amplitude ``lam`` (both dimensionless)."""

    a: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.lam)):
            raise ValueError("forcing parameters must be finite")


@dataclass(frozen=True)
class ResonancePoint:
    """One root of the averaged field on a resonance curve.

    ``phi`` is the phase with M = A sin(phi), N = A cos(phi).  ``ineq6`` and
    ``ineq7`` are the determinant-sign and trace-sign stability indicators;
    the root is stable when ineq6 > 0 and ineq7 < 0.  ``hurwitz_numeric`` is
    the independent eigenvalue verdict on the finite-difference Jacobian.
    """

    a: float
    lam: float
    A: float
    M: float
    N: float
    phi: float
    ineq6: float
    ineq7: float
    hurwitz_numeric: bool
    stable: bool
    degenerate: bool


# --- built-in fields ----------------------------------------------------------


def _slow_field(damping_scalar, damping_array, p: ForcingParams, kinks, name,
                lipschitz_hint):
    a, lam = p.a, p.lam

    def evaluate(t, x, eps):
        x = np.asarray(x, dtype=float)
        if isinstance(t, float) and x.ndim == 1:
            s, c = math.sin(t), math.cos(t)
            u = x[0] * s + x[1] * c
            du = x[0] * c - x[1] * s
            F = -damping_scalar(u) * du - a * u + lam * s
            return np.array([F * c, -F * s])
        t = np.asarray(t, dtype=float)
        s, c = np.sin(t), np.cos(t)
        u = x[..., 0] * s + x[..., 1] * c
        du = x[..., 0] * c - x[..., 1] * s
        F = -damping_array(u) * du - a * u + lam * s
        return np.stack([F * c, -F * s], axis=-1)

    return PeriodicField(dim=2, period=TWO_PI, evaluate=evaluate,
                         lipschitz_hint=lipschitz_hint, kinks=kinks, name=name)


def nonsmooth_vdp_field(p: ForcingParams = ForcingParams()) -> PeriodicField:
    """Slow-frame field of u'' + eps(|u| - 1)u' + (1 + a*eps)u = eps*lam*sin t.

    The field is Lipschitz but not differentiable across the switching set
    u = 0; the published ``kinks`` callback returns the two times per period
    where the frozen-state integrand crosses it.
    """

    def kinks(v, eps):
        A = math.hypot(v[0], v[1])
        if A < 1e-12:
            return ()
        phi = math.atan2(v[0], v[1])        # u = A cos(t - phi)
        return tuple(sorted(((phi + math.pi / 2) % TWO_PI,
                             (phi - math.pi / 2) % TWO_PI)))

    # |dF/d(M,N)| <= |u'| + |u| + 1 + |a| per component on a ball of radius R
    hint = 2.0 * (2.0 * 4.0 + 1.0 + abs(p.a))
    return _slow_field(lambda u: abs(u) - 1.0, lambda u: np.abs(u) - 1.0,
                       p, kinks, "nonsmooth_vdp", hint)


def classical_vdp_field(p: ForcingParams = ForcingParams()) -> PeriodicField:
    """Slow-frame field of u'' + eps(u^2 - 1)u' + (1 + a*eps)u = eps*lam*sin t."""
    hint = 2.0 * (3.0 * 4.0 ** 2 + 1.0 + abs(p.a))
    return _slow_field(lambda u: u * u - 1.0, lambda u: u * u - 1.0,
                       p, None, "classical_vdp", hint)


def linear_test_field() -> PeriodicField:
    """1-d benchmark x' = eps(-x + cos t): closed-form periodic response.

    The periodic solution starts at eps^2/(1 + eps^2) and the period map
    contracts by exp(-2*pi*eps); averaged field -2*pi*v with root 0.
    """

    def evaluate(t, x, eps):
        x = np.asarray(x, dtype=float)
        if isinstance(t, float) and x.ndim == 1:
            return np.array([math.cos(t) - x[0]])
        t = np.asarray(t, dtype=float)
        val = np.cos(t) - x[..., 0]
        return np.stack([val], axis=-1)

    return PeriodicField(dim=1, period=TWO_PI, evaluate=evaluate,
                         lipschitz_hint=1.0, name="linear_test")


# --- closed-form averaged data (test oracles and fast paths) -------------------


def averaged_closed_form(model: str, M: float, N: float, a: float,
                         lam: float) -> np.ndarray:
    """Exact one-period average of the slow field (independent of quadrature)."""
    A = math.hypot(M, N)
    if model == "nonsmooth":
        k = math.pi - (4.0 / 3.0) * A
    elif model == "classical":
        k = math.pi * (1.0 - A * A / 4.0)
    else:
        raise ValueError(f"unknown model {model!r}")
    return np.array([M * k - a * math.pi * N,
                     N * k + a * math.pi * M - lam * math.pi])


def averaged_jacobian_closed_form(model: str, M: float, N: float,
                                  a: float) -> np.ndarray:
    A = math.hypot(M, N)
    if model == "nonsmooth":
        if A == 0.0:
            raise ValueError("nonsmooth Jacobian undefined at the origin")
        k = math.pi - (4.0 / 3.0) * A
        dk = -(4.0 / 3.0)
    elif model == "classical":
        k = math.pi * (1.0 - A * A / 4.0)
        dk = -math.pi * A / 2.0
    else:
        raise ValueError(f"unknown model {model!r}")
    if A == 0.0:
        gMM, gMN, gNM, gNN = k, 0.0, 0.0, k
    else:
        gMM = k + dk * M * M / A
        gMN = dk * M * N / A
        gNM = dk * M * N / A
        gNN = k + dk * N * N / A
    return np.array([[gMM, gMN - a * math.pi],
                     [gNM + a * math.pi, gNN]])


# --- amplitude equation ---------------------------------------------------------


def _detune_sq(model: str, A: float, a: float) -> float:
    if model == "nonsmooth":
        return a * a + (1.0 - 4.0 * abs(A) / (3.0 * math.pi)) ** 2
    if model == "classical":
        return a * a + (1.0 - A * A / 4.0) ** 2
    raise ValueError(f"unknown model {model!r}")


def amplitude_equation(model: str, A: float, a: float, lam: float) -> float:
    """Residual of the scalar resonance equation A^2 * (a^2 + detune^2) = lam^2."""
    return A * A * _detune_sq(model, A, a) - lam * lam


def amplitude_equation_derivative(model: str, A: float, a: float) -> float:
    if model == "nonsmooth":
        c = 4.0 / (3.0 * math.pi)
        return 2.0 * A * _detune_sq(model, A, a) \
            - 2.0 * c * A * A * (1.0 - c * A)
    return 2.0 * A * _detune_sq(model, A, a) - A ** 3 * (1.0 - A * A / 4.0)


def _bisect(fun, lo, hi, tol=1e-15, max_iter=200):
    flo = fun(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol * max(1.0, abs(mid)):
            return mid
        fm = fun(mid)
        if fm == 0.0:
            return mid
        if (flo < 0) == (fm < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def amplitude_roots(model: str, a: float, lam: float,
                    n_scan: int = 2048) -> List[float]:
    """All positive amplitudes solving the resonance equation at (a, lam).

    Simple roots come from a sign scan plus bisection; tangential (double)
    roots -- the whole curve at lam = 0, folds in general -- are picked up as
    touching minima and polished on the analytic derivative.  The trivial
    A = 0 solution at lam = 0 is excluded: it is the non-oscillating branch.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    base = UNFORCED_AMPLITUDE[model] if model in UNFORCED_AMPLITUDE else 2.0
    a_max = base + lam + abs(a) + 1.0
    grid = np.linspace(0.0, a_max, n_scan + 1)
    vals = np.array([amplitude_equation(model, A, a, lam) for A in grid])
    scale = max(1.0, lam * lam, float(np.max(np.abs(vals))))
    roots: List[float] = []

    def push(A):
        if A > 1e-9 * a_max and all(abs(A - r) > 1e-8 * a_max for r in roots):
            roots.append(A)

    for i in range(n_scan):
        if vals[i] == 0.0:
            push(grid[i])
        if (vals[i] < 0) != (vals[i + 1] < 0):
            push(_bisect(lambda A: amplitude_equation(model, A, a, lam),
                         grid[i], grid[i + 1]))
    # touching minima: polish the derivative zero, then require the value to
    # vanish (a genuine double root lands at machine level; a mere dip does not)
    for i in range(1, n_scan):
        if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
            if abs(vals[i]) <= 1e-4 * scale:
                d = lambda A: amplitude_equation_derivative(model, A, a)
                if (d(grid[i - 1]) < 0) != (d(grid[i + 1]) < 0):
                    A = _bisect(d, grid[i - 1], grid[i + 1])
                    if abs(amplitude_equation(model, A, a, lam)) <= 1e-10 * scale:
                        push(A)
    return sorted(roots)


# --- stability indicators -------------------------------------------------------


def stability_indicators(model: str, amp_sq: float, a: float) -> Tuple[float, float]:
    """(ineq6, ineq7) at squared amplitude M^2 + N^2.

    ineq6 is the determinant of the averaged Jacobian (up to the positive
    factor pi^2 in the classical normalization), ineq7 its trace; stability
    is ineq6 > 0 and ineq7 < 0.  Expressions are evaluated verbatim in the
    conventional printed form for each model.
    """
    amp = math.sqrt(amp_sq)
    if model == "nonsmooth":
        i6 = math.pi ** 2 * (1.0 + a * a) + (32.0 / 9.0) * amp_sq \
            - 4.0 * math.pi * amp
        i7 = 2.0 * (math.pi - 2.0 * amp)
        return i6, i7
    if model == "classical":
        i6 = 1.0 + a * a - amp_sq + (3.0 / 16.0) * amp_sq * amp_sq
        i7 = 2.0 - amp_sq
        return i6, i7
    raise ValueError(f"unknown model {model!r}")


# --- root recovery and resonance curves ----------------------------------------

_SEED_PHASES = tuple(j * math.pi / 4.0 for j in range(8))


def _field_for(model: str, a: float, lam: float) -> PeriodicField:
    p = ForcingParams(a, lam)
    return nonsmooth_vdp_field(p) if model == "nonsmooth" else classical_vdp_field(p)


def recover_root(model: str, a: float, lam: float, A: float,
                 n_nodes: int = 8192,
                 root_tol: float = 1e-10) -> averaging.RootResult:
    """Full (M, N) root of the averaged field matching amplitude A.

    The amplitude equation fixes only A, so Newton is started from eight
    phases on the circle of radius A; the first converged root whose
    amplitude matches within ``AMP_MATCH_TOL`` wins.
    """
    f = _field_for(model, a, lam)
    for phi in _SEED_PHASES:
        seed = np.array([A * math.sin(phi), A * math.cos(phi)])
        try:
            r = averaging.find_root(f, seed, root_tol, n_nodes)
        except (MaxIterations, SingularJacobian):
            continue
        if abs(math.hypot(*r.v0) - A) <= AMP_MATCH_TOL:
            return r
    raise RootRecoveryFailed(a, A)


def resonance_point(model: str, a: float, lam: float, A: float,
                    n_nodes: int = 8192,
                    jacobian_nodes: int = 16384) -> ResonancePoint:
    """Assemble the full resonance record for one amplitude root."""
    r = recover_root(model, a, lam, A, n_nodes)
    M, N = float(r.v0[0]), float(r.v0[1])
    amp = math.hypot(M, N)
    i6, i7 = stability_indicators(model, amp * amp, a)
    # independent eigenvalue verdict on the FD Jacobian (pure sign test)
    J = averaging.averaged_jacobian(_field_for(model, a, lam), r.v0,
                                    n_nodes=jacobian_nodes,
                                    fd_step=1e-5 * (1.0 + amp))
    hurwitz = smalllin.eigenvalues(J).max_real < 0.0
    stable = (i6 > 0.0) and (i7 < 0.0)
    degenerate = abs(i6) <= DEGENERATE_BAND or abs(i7) <= DEGENERATE_BAND
    return ResonancePoint(a=a, lam=lam, A=amp, M=M, N=N,
                          phi=math.atan2(M, N), ineq6=i6, ineq7=i7,
                          hurwitz_numeric=hurwitz, stable=stable,
                          degenerate=degenerate)


def _resonance_curve(model: str, lam: float, a_range, n: int,
                     n_nodes: int, jacobian_nodes: int) -> List[ResonancePoint]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    a_lo, a_hi = float(a_range[0]), float(a_range[1])
    if a_hi < a_lo:
        raise ValueError("a range must satisfy lo <= hi")
    grid = np.linspace(a_lo, a_hi, n) if n > 1 else np.array([a_lo])
    points: List[ResonancePoint] = []
    for a in grid:
        a = float(a)
        for A in amplitude_roots(model, a, lam):
            try:
                points.append(resonance_point(model, a, lam, A,
                                              n_nodes, jacobian_nodes))
            except RootRecoveryFailed as exc:
                log.warning("root recovery failed: %s", exc)
    return points


def resonance_curve_nonsmooth(lam: float, a_range, n: int,
                              n_nodes: int = 8192,
                              jacobian_nodes: int = 16384) -> List[ResonancePoint]:
    """Resonance curve of the piecewise-linear oscillator over a detuning grid."""
    return _resonance_curve("nonsmooth", lam, a_range, n, n_nodes, jacobian_nodes)


def resonance_curve_classical(lam: float, a_range, n: int,
                              n_nodes: int = 8192,
                              jacobian_nodes: int = 16384) -> List[ResonancePoint]:
    """Resonance curve of the classical cubic oscillator over a detuning grid."""
    return _resonance_curve("classical", lam, a_range, n, n_nodes, jacobian_nodes)


def reconstruct_u(t, M, N):
    """Oscillator displacement u(t) = M sin t + N cos t from slow coordinates."""
    return M * np.sin(t) + N * np.cos(t)
