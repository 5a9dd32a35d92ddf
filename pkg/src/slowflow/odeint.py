"""Time integration of weakly perturbed periodic systems x' = eps * g(t, x, eps).

The right-hand side ``g`` is carried by a :class:`PeriodicField` and may be
merely Lipschitz in ``x`` (corners from absolute values are fine).  Two
steppers are provided:

* ``rk4-fixed``    classical RK4, step ``h`` (default ``T/2000``),
* ``rk45-adaptive`` Dormand-Prince 5(4), tolerance-controlled (default
  ``abs_tol = rel_tol = 1e-10``), the package default.

The adaptive stepper is strongly preferred for Poincare-map work: corners in
the field make a fixed step lose order globally, while the embedded error
estimate localizes the damage to the few steps that straddle a corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteState, StepLimitExceeded

__all__ = [
    "PeriodicField",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "flow",
    "flow_batch",
    "poincare_map",
    "g_eps",
]

BLOWUP_NORM = 1e8


@dataclass(frozen=True)
class PeriodicField:
    """A T-periodic vector field g(t, x, eps) on R^k.

    ``evaluate(t, x, eps)`` must broadcast: scalar ``t`` with ``x`` of shape
    ``(k,)`` returns ``(k,)``; an array of times with frozen ``x`` of shape
    ``(k,)`` returns ``(len(t), k)``; scalar ``t`` with an ensemble ``(m, k)``
    returns ``(m, k)``.

    ``kinks``, when given, maps ``(x, eps)`` to the times in ``[0, T)`` where
    ``t -> g(t, x, eps)`` (state frozen) is not smooth.  Quadratures use it to
    align panel boundaries with the corners; it is optional metadata and never
    affects values.
    """

    dim: int
    period: float
    evaluate: Callable
    lipschitz_hint: Optional[float] = None
    kinks: Optional[Callable] = None
    name: str = "field"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (self.period > 0):
            raise ValueError("period must be positive")

    def __call__(self, t, x, eps):
        return self.evaluate(t, x, eps)


@dataclass(frozen=True)
class IntegratorConfig:
    """Stepper selection and accuracy knobs."""

    method: str = "rk45-adaptive"
    h: Optional[float] = None          # fixed step; None -> period/2000
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_steps: int = 20_000_000

    def __post_init__(self):
        if self.method not in ("rk4-fixed", "rk45-adaptive"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.h is not None and not (self.h > 0):
            raise ValueError("step h must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")

    def refined(self, factor: float = 2.0) -> "IntegratorConfig":
        """Config at `factor` times the resolution (halved step / tightened tol)."""
        if self.method == "rk4-fixed":
            h = None if self.h is None else self.h / factor
            return IntegratorConfig("rk4-fixed", h, self.abs_tol, self.rel_tol,
                                    self.max_steps)
        scale = factor ** 5
        return IntegratorConfig("rk45-adaptive", None,
                                self.abs_tol / scale, self.rel_tol / scale,
                                self.max_steps)


@dataclass
class Trajectory:
    """Sampled solution of x' = eps * g on [t0, t1]."""

    times: np.ndarray          # (n,), increasing, times[0]=t0, times[-1]=t1
    states: np.ndarray         # (n, k)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at_index(self, i):
        return self.states[i]


# --- Dormand-Prince 5(4) tableau ---------------------------------------------

_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
# 5th-order weights equal the last A row (FSAL); error weights = b5 - b4
_DP_E = (
    35 / 384 - 5179 / 57600,
    0.0,
    500 / 1113 - 7571 / 16695,
    125 / 192 - 393 / 640,
    -2187 / 6784 + 92097 / 339200,
    11 / 84 - 187 / 2100,
    -1 / 40,
)


def _check_finite(x, t):
    if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > BLOWUP_NORM:
        raise NonFiniteState(f"state blew up near t={t:.6g}")


def _rk4_step(rhs, t, x, h):
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _run_rk4(rhs, t0, t1, x0, h, max_steps, record):
    n = int(math.ceil((t1 - t0) / h - 1e-12))
    if n > max_steps:
        raise StepLimitExceeded(f"{n} fixed steps exceed max_steps={max_steps}")
    ts = [t0] if record else None
    xs = [x0] if record else None
    x = x0
    for i in range(n):
        t = t0 + i * h
        step = min(h, t1 - t)
        x = _rk4_step(rhs, t, x, step)
        _check_finite(x, t + step)
        if record:
            ts.append(min(t + step, t1))
            xs.append(x)
    if record:
        ts[-1] = t1
        return np.asarray(ts), np.asarray(xs)
    return x


def _run_dopri(rhs, t0, t1, x0, atol, rtol, max_steps, record):
    """Adaptive Dormand-Prince with FSAL; error norm is a scaled max-norm.

    For batched states the norm reduces over the whole ensemble, keeping every
    member on a shared, accepted step sequence.
    """
    t = t0
    x = np.asarray(x0, dtype=float)
    span = t1 - t0
    h = span / 50.0
    hmin = span * 1e-14
    k1 = rhs(t, x)
    ts = [t0] if record else None
    xs = [x.copy()] if record else None
    steps = 0
    while t < t1:
        if steps >= max_steps:
            raise StepLimitExceeded(f"max_steps={max_steps} reached at t={t:.6g}")
        steps += 1
        h = min(h, t1 - t)
        ks = [k1]
        for i in range(1, 7):
            xi = x + h * sum(a * k for a, k in zip(_DP_A[i], ks))
            ks.append(rhs(t + _DP_C[i] * h, xi))
        x5 = xi  # stage 7 input is the 5th-order solution (FSAL)
        err = h * sum(e * k for e, k in zip(_DP_E, ks))
        scale = atol + rtol * np.maximum(np.abs(x), np.abs(x5))
        enorm = float(np.max(np.abs(err) / scale))
        if enorm <= 1.0:
            t = t + h
            x = x5
            k1 = ks[6]
            _check_finite(x, t)
            if record:
                ts.append(t)
                xs.append(x.copy())
        else:
            k1 = ks[0]
        fac = 0.9 * enorm ** -0.2 if enorm > 0 else 5.0
        h = h * min(5.0, max(0.2, fac))
        if h < hmin:
            raise StepLimitExceeded(f"step size underflow at t={t:.6g}")
    if record:
        ts[-1] = t1
        return np.asarray(ts), np.asarray(xs)
    return x


def _make_rhs(f: PeriodicField, eps: float):
    ev = f.evaluate
    if eps == 0.0:
        zero = None

        def rhs0(t, x):
            nonlocal zero
            if zero is None or zero.shape != x.shape:
                zero = np.zeros_like(x)
            return zero

        return rhs0

    def rhs(t, x):
        return eps * np.asarray(ev(t, x, eps), dtype=float)

    return rhs


def integrate(f: PeriodicField, t0: float, t1: float, x0, eps: float,
              cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate x' = eps*g(t,x,eps) from (t0, x0) to t1, recording samples."""
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (f.dim,):
        raise ValueError(f"x0 must have shape ({f.dim},)")
    if not np.all(np.isfinite(x0)):
        raise NonFiniteState("initial state is not finite")
    rhs = _make_rhs(f, eps)
    if cfg.method == "rk4-fixed":
        h = cfg.h if cfg.h is not None else f.period / 2000.0
        ts, xs = _run_rk4(rhs, t0, t1, x0, h, cfg.max_steps, record=True)
    else:
        ts, xs = _run_dopri(rhs, t0, t1, x0, cfg.abs_tol, cfg.rel_tol,
                            cfg.max_steps, record=True)
    return Trajectory(ts, xs)


def flow(f: PeriodicField, t0: float, t1: float, x0, eps: float,
         cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Final state only (no sample storage); same stepping as `integrate`."""
    x0 = np.asarray(x0, dtype=float)
    rhs = _make_rhs(f, eps)
    if cfg.method == "rk4-fixed":
        h = cfg.h if cfg.h is not None else f.period / 2000.0
        return _run_rk4(rhs, t0, t1, x0, h, cfg.max_steps, record=False)
    return _run_dopri(rhs, t0, t1, x0, cfg.abs_tol, cfg.rel_tol,
                      cfg.max_steps, record=False)


def flow_batch(f: PeriodicField, t0: float, t1: float, X0, eps: float,
               cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Flow an ensemble X0 of shape (m, k) over [t0, t1] on a shared step grid.

    Adaptive error control reduces over the whole batch, so accuracy matches
    the worst member; members do not interact.
    """
    X0 = np.asarray(X0, dtype=float)
    if X0.ndim != 2 or X0.shape[1] != f.dim:
        raise ValueError(f"X0 must have shape (m, {f.dim})")
    rhs = _make_rhs(f, eps)
    if cfg.method == "rk4-fixed":
        h = cfg.h if cfg.h is not None else f.period / 2000.0
        return _run_rk4(rhs, t0, t1, X0, h, cfg.max_steps, record=False)
    return _run_dopri(rhs, t0, t1, X0, cfg.abs_tol, cfg.rel_tol,
                      cfg.max_steps, record=False)


def poincare_map(f: PeriodicField, v, eps: float,
                 cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """The period map v -> x(T, v, eps).

    At eps = 0 the flow is frozen and the map is the identity.
    """
    v = np.asarray(v, dtype=float)
    if eps == 0.0:
        return v.copy()
    return flow(f, 0.0, f.period, v, eps, cfg)


def g_eps(f: PeriodicField, v, eps: float,
          cfg: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Normalized displacement (x(T,v,eps) - v) / eps of the period map.

    Along the numerical trajectory this equals the integral of
    g(tau, x(tau,v,eps), eps) over one period.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    v = np.asarray(v, dtype=float)
    return (poincare_map(f, v, eps, cfg) - v) / eps
