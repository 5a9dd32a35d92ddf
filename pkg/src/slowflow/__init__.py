"""slowflow: averaging-based analysis of weakly perturbed periodic ODEs.

Workflow: define a T-periodic field g(t, x, eps) (built-in oscillators or the
text DSL), average it over one period, locate roots of the averaged field,
certify their stability (eigenvalues, Lyapunov norm, one-step contraction),
and verify the predicted periodic solutions by direct Poincare-map iteration.
"""

from . import averaging, certify, cli, exprdsl, odeint, orbit, smalllin, vdp
from .odeint import IntegratorConfig, PeriodicField, Trajectory

__version__ = "0.1.0"

__all__ = [
    "averaging", "certify", "cli", "exprdsl", "odeint", "orbit", "smalllin",
    "vdp", "IntegratorConfig", "PeriodicField", "Trajectory", "__version__",
]
