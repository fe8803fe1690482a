"""Classical counterpart: Langevin ensembles, phase-space histograms, and
Lyapunov exponents.

The classical SDE uses the momentum-kick convention <(dp)^2> = 2 D dt so
that the free-particle momentum-variance growth rate 2D matches the
unconditioned quantum rate 2 hbar^2 k when D = hbar^2 k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import OutOfRange
from .model import HamiltonianSpec, force, force_dx
from .qstate import Moments, WignerGrid
from .rng import make_generator


@dataclass
class ClassicalEnsemble:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if self.x.shape != self.p.shape or self.x.ndim != 1:
            raise ValueError("x and p must be 1-D arrays of equal length")
        if self.x.size < 1:
            raise ValueError("ensemble must hold at least one sample")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p))):
            raise ValueError("samples must be finite")

    @property
    def n(self) -> int:
        return self.x.size

    def moments(self) -> Moments:
        mx, mp = self.x.mean(), self.p.mean()
        return Moments(
            mean_x=float(mx), mean_p=float(mp),
            var_x=float(self.x.var()), var_p=float(self.p.var()),
            cov_xp=float(((self.x - mx) * (self.p - mp)).mean()),
        )


def sample_coherent_matched(x0: float, p0: float, hbar: float, n: int,
                            seed: int, stream_index: int = 0) -> ClassicalEnsemble:
    """Gaussian cloud with the minimum-uncertainty state's moments:
    means (x0, p0), variances hbar/2, zero covariance."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = make_generator(seed, stream_index)
    sigma = np.sqrt(hbar / 2.0)
    return ClassicalEnsemble(
        x=x0 + sigma * gen.standard_normal(n),
        p=p0 + sigma * gen.standard_normal(n),
    )


def langevin_step(sample, spec: HamiltonianSpec, D: float, t: float, dt: float, dW):
    """Symplectic-Euler step with a momentum kick sqrt(2D) dW.

    ``sample`` is an (x, p) pair of floats or arrays; dW matches its shape.
    """
    x, p = sample
    p = p + force(spec, x, t) * dt + np.sqrt(2.0 * D) * dW
    x = x + p / spec.m * dt
    return x, p


def evolve_ensemble(ens: ClassicalEnsemble, spec: HamiltonianSpec, D: float,
                    t0: float, t_final: float, dt: float, seed: int = 0,
                    stream_index: int = 1,
                    record_times=()) -> list[tuple[float, ClassicalEnsemble]]:
    """Drive a whole ensemble; returns (time, ensemble) snapshots at the
    steps nearest ``record_times`` (always including t_final)."""
    gen = make_generator(seed, stream_index)
    n_steps = int(round((t_final - t0) / dt))
    record_steps = {int(round((ts - t0) / dt)): ts for ts in record_times}
    record_steps.setdefault(n_steps, t_final)
    x, p = ens.x.copy(), ens.p.copy()
    out = []
    if 0 in record_steps:
        out.append((t0, ClassicalEnsemble(x.copy(), p.copy())))
    sqrt_2D_dt = np.sqrt(2.0 * D * dt)
    t = t0
    for s in range(n_steps):
        f = force(spec, x, t)
        if D > 0:
            p = p + f * dt + sqrt_2D_dt * gen.standard_normal(x.size)
        else:
            p = p + f * dt
        x = x + p / spec.m * dt
        t = t0 + (s + 1) * dt
        if (s + 1) in record_steps:
            out.append((t, ClassicalEnsemble(x.copy(), p.copy())))
    return out


def density_histogram(ens: ClassicalEnsemble, x_edges: np.ndarray,
                      p_edges: np.ndarray) -> WignerGrid:
    """Normalized 2-D histogram on the given bin edges.

    Raises OutOfRange (reporting the escaping fraction) unless the axes
    cover every sample.
    """
    x_edges = np.asarray(x_edges, dtype=float)
    p_edges = np.asarray(p_edges, dtype=float)
    inside = (
        (ens.x >= x_edges[0]) & (ens.x < x_edges[-1])
        & (ens.p >= p_edges[0]) & (ens.p < p_edges[-1])
    )
    if not inside.all():
        frac = 1.0 - inside.mean()
        raise OutOfRange(f"{frac:.3%} of samples fall outside the requested axes")
    counts, _, _ = np.histogram2d(ens.x, ens.p, bins=(x_edges, p_edges))
    dx = float(x_edges[1] - x_edges[0])
    dp = float(p_edges[1] - p_edges[0])
    values = counts / (ens.n * dx * dp)
    return WignerGrid(values=values, x0=float(x_edges[0] + dx / 2.0), dx=dx,
                      p0=float(p_edges[0] + dp / 2.0), dp=dp)


def edges_like(grid: WignerGrid) -> tuple[np.ndarray, np.ndarray]:
    """Bin edges whose cell centers coincide with a WignerGrid's points."""
    x_edges = grid.x0 - grid.dx / 2.0 + grid.dx * np.arange(grid.n_x + 1)
    p_edges = grid.p0 - grid.dp / 2.0 + grid.dp * np.arange(grid.n_p + 1)
    return x_edges, p_edges


@dataclass
class LyapunovEstimate:
    """Benettin-style mean exponent with block-averaging error bar."""

    lambda_bar: float
    std_err: float
    t_span: float
    n_orbits: int
    converged: bool
    per_orbit: np.ndarray = field(repr=False, default=None)
    local_lambda: Callable = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "lambda_bar": self.lambda_bar,
            "std_err": self.std_err,
            "n_orbits": self.n_orbits,
            "t_span": self.t_span,
            "converged": self.converged,
        }


def local_lyapunov(spec: HamiltonianSpec, x) -> np.ndarray:
    """Local stretching rate sqrt(|dF/dx| / m)."""
    return np.sqrt(np.abs(force_dx(spec, x)) / spec.m)


def lyapunov_benettin(spec: HamiltonianSpec, x0: float, p0: float, t_span: float,
                      dt: float, renorm_every: int = 10, D: float = 0.0,
                      n_orbits: int = 1, ic_spread: float = 0.0, seed: int = 0,
                      n_blocks: int = 10) -> LyapunovEstimate:
    """Mean exponential stretching rate of the tangent flow along orbits.

    Tangent vectors evolve with the same symplectic-Euler map as the
    orbit, with log stretch factors accumulated at each renormalization.
    With ``n_orbits > 1`` the initial conditions are Gaussian draws of
    standard deviation ``ic_spread`` around (x0, p0), realizing a
    phase-space average by ergodic time averaging; the error bar is the
    standard error over orbits (over time blocks for a single orbit).
    """
    if n_orbits < 1:
        raise ValueError("n_orbits must be >= 1")
    gen = make_generator(seed, 0)
    if n_orbits > 1 and ic_spread > 0:
        x = x0 + ic_spread * gen.standard_normal(n_orbits)
        p = p0 + ic_spread * gen.standard_normal(n_orbits)
    else:
        x = np.full(n_orbits, float(x0))
        p = np.full(n_orbits, float(p0))
    tx = np.ones(n_orbits)
    tp = np.zeros(n_orbits)

    n_steps = int(round(t_span / dt))
    block_len = max(1, n_steps // n_blocks)
    log_total = np.zeros(n_orbits)
    block_logs = []
    block_acc = np.zeros(n_orbits)
    sqrt_2D_dt = np.sqrt(2.0 * D * dt) if D > 0 else 0.0

    t = 0.0
    for s in range(n_steps):
        f = force(spec, x, t)
        jac = force_dx(spec, x)
        if D > 0:
            p = p + f * dt + sqrt_2D_dt * gen.standard_normal(n_orbits)
        else:
            p = p + f * dt
        x = x + p / spec.m * dt
        # exact tangent map of the symplectic-Euler update
        tp = tp + jac * tx * dt
        tx = tx + tp / spec.m * dt
        t += dt
        if (s + 1) % renorm_every == 0:
            nrm = np.sqrt(tx * tx + tp * tp)
            g = np.log(nrm)
            log_total += g
            block_acc += g
            tx /= nrm
            tp /= nrm
        if (s + 1) % block_len == 0:
            block_logs.append(block_acc / (block_len * dt))
            block_acc = np.zeros(n_orbits)

    nrm = np.sqrt(tx * tx + tp * tp)
    log_total += np.log(nrm)
    per_orbit = log_total / t
    lambda_bar = float(per_orbit.mean())

    blocks = np.asarray(block_logs)  # (n_blocks, n_orbits)
    if n_orbits > 1:
        std_err = float(per_orbit.std(ddof=1) / np.sqrt(n_orbits))
        spread = per_orbit
        center = lambda_bar
    else:
        std_err = float(blocks[:, 0].std(ddof=1) / np.sqrt(blocks.shape[0]))
        spread = blocks[:, 0]
        center = float(blocks[:, 0].mean())
    scale = std_err * np.sqrt(max(len(spread), 2))
    converged = bool(np.all(np.abs(spread - center) <= 3.0 * max(scale, 1e-12)))

    return LyapunovEstimate(
        lambda_bar=lambda_bar, std_err=std_err, t_span=t_span, n_orbits=n_orbits,
        converged=converged, per_orbit=per_orbit,
        local_lambda=lambda xq: local_lyapunov(spec, xq),
    )


def orbit(spec: HamiltonianSpec, x0: float, p0: float, t_span: float, dt: float,
          sample_every: int = 1) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Noiseless orbit sampled every ``sample_every`` steps; returns
    (t, x, p) arrays including the initial point."""
    n_steps = int(round(t_span / dt))
    n_rec = n_steps // sample_every + 1
    ts = np.empty(n_rec)
    xs = np.empty(n_rec)
    ps = np.empty(n_rec)
    x, p, t = float(x0), float(p0), 0.0
    ts[0], xs[0], ps[0] = t, x, p
    idx = 1
    for s in range(n_steps):
        p += force(spec, x, t) * dt
        x += p / spec.m * dt
        t += dt
        if (s + 1) % sample_every == 0:
            ts[idx], xs[idx], ps[idx] = t, x, p
            idx += 1
    return ts[:idx], xs[:idx], ps[:idx]
