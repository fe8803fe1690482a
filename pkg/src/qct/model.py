"""Driven quartic-oscillator Hamiltonian family.

H = p^2/(2m) - alpha*x^2 + beta*x^4 + drive, with two drive couplings:

* ``LINEAR_IN_X``: drive term Lambda*x*cos(omega*t), the standard driven
  Duffing form whose force depends on the drive.
* ``ADDITIVE``: drive term Lambda*cos(omega*t); a time-dependent energy
  offset whose force is drive-independent.

Potential, force and force derivatives are evaluated in closed form; the
criteria evaluator relies on their exactness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class DriveCoupling(enum.Enum):
    LINEAR_IN_X = "linear_in_x"
    ADDITIVE = "additive"

    @classmethod
    def parse(cls, value) -> "DriveCoupling":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "linear_in_x": cls.LINEAR_IN_X,
            "linearinx": cls.LINEAR_IN_X,
            "linear": cls.LINEAR_IN_X,
            "additive": cls.ADDITIVE,
        }
        if key not in aliases:
            raise ValueError(f"unknown drive coupling {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class HamiltonianSpec:
    """Parameters of the particle Hamiltonian.

    Attributes
    ----------
    m : particle mass
    alpha : quadratic-well coefficient (positive alpha gives a double well)
    beta : quartic coefficient, >= 0
    drive_amp : drive amplitude Lambda
    drive_freq : drive angular frequency omega
    drive_coupling : how the drive enters the potential
    """

    m: float
    alpha: float
    beta: float
    drive_amp: float = 0.0
    drive_freq: float = 1.0
    drive_coupling: DriveCoupling = DriveCoupling.LINEAR_IN_X

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"mass must be positive, got {self.m}")
        if self.beta < 0:
            raise ValueError(f"quartic coefficient must be >= 0, got {self.beta}")
        if not self.drive_freq > 0:
            raise ValueError(f"drive frequency must be positive, got {self.drive_freq}")
        object.__setattr__(
            self, "drive_coupling", DriveCoupling.parse(self.drive_coupling)
        )


def chaotic_duffing() -> HamiltonianSpec:
    """The chaotic double-well benchmark: (m, alpha, beta, Lambda, omega) =
    (1, 10, 0.5, 10, 6.07)."""
    return HamiltonianSpec(m=1.0, alpha=10.0, beta=0.5, drive_amp=10.0, drive_freq=6.07)


def harmonic(m: float = 1.0, omega0: float = 1.0) -> HamiltonianSpec:
    """Harmonic oscillator V = (1/2) m omega0^2 x^2 as a member of the family
    (alpha = -m omega0^2 / 2, beta = 0)."""
    return HamiltonianSpec(m=m, alpha=-0.5 * m * omega0**2, beta=0.0, drive_amp=0.0)


def potential(spec: HamiltonianSpec, x, t):
    """V(x, t). Vectorized over x and t (broadcast)."""
    x = np.asarray(x)
    base = -spec.alpha * x**2 + spec.beta * x**4
    drive = spec.drive_amp * np.cos(spec.drive_freq * t)
    if spec.drive_coupling is DriveCoupling.LINEAR_IN_X:
        return base + drive * x
    return base + drive


def force(spec: HamiltonianSpec, x, t):
    """F(x, t) = -dV/dx. Vectorized over x and t (broadcast)."""
    x = np.asarray(x)
    f = 2.0 * spec.alpha * x - 4.0 * spec.beta * x**3
    if spec.drive_coupling is DriveCoupling.LINEAR_IN_X:
        f = f - spec.drive_amp * np.cos(spec.drive_freq * t)
    return f


def force_dx(spec: HamiltonianSpec, x):
    """dF/dx; time-independent for both drive couplings."""
    x = np.asarray(x)
    return 2.0 * spec.alpha - 12.0 * spec.beta * x**2


def force_dxx(spec: HamiltonianSpec, x):
    """d^2F/dx^2."""
    x = np.asarray(x)
    return -24.0 * spec.beta * x
