"""Gradient verification against central finite differences.

The finite-difference side never touches the tape: it re-evaluates the
forward function at perturbed parameter values, so it is an independent
oracle for the reverse pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T


@dataclass
class GradCheckReport:
    """Per-parameter maximum relative error between tape and finite differences."""

    errors: dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def worst(self) -> tuple[str, float]:
        name = max(self.errors, key=self.errors.get)
        return name, self.errors[name]


def _relative_error(a: float, b: float, noise_floor: float) -> float:
    # central differences carry ~1e-10 absolute noise at 64-bit; below the
    # floor the two values are indistinguishable from equal
    diff = abs(a - b)
    if diff <= noise_floor:
        return 0.0
    return diff / max(abs(a), abs(b))


def grad_check(
    f,
    params: dict[str, T.Tensor],
    step: float = 1e-5,
    tolerance: float = 1e-4,
    noise_floor: float = 1e-9,
) -> GradCheckReport:
    """Compare tape gradients of scalar-valued ``f(params)`` with central differences.

    ``f`` must be deterministic (run dropout in eval mode). Failures are
    reported in the returned object, never raised.
    """
    for p in params.values():
        p.zero_grad()
    loss = f(params)
    T.backward(loss)
    grads = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    report = GradCheckReport(tolerance=tolerance)
    for name, p in params.items():
        flat = p.data.reshape(-1)
        g_fd = np.zeros_like(flat)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = flat[i]
            with T.no_grad():
                f_plus = f(params).item()
            flat[i] = orig - step
            down = flat[i]
            with T.no_grad():
                f_minus = f(params).item()
            flat[i] = orig
            # realized step: exact for linear f even when orig +/- step rounds
            g_fd[i] = (f_plus - f_minus) / (up - down)
        ad = grads[name].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            worst = max(worst, _relative_error(float(ad[i]), float(g_fd[i]), noise_floor))
        report.errors[name] = worst
    return report
