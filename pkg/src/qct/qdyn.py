"""Time evolution of the continuously observed particle.

Conditioned (measured, unit-efficiency) evolution propagates a pure state:
a Strang split for the Hamiltonian flow (kinetic factor in momentum
representation, potential factor in position representation, drive at the
sub-interval midpoint) around a position-diagonal measurement update. The
measurement multiplier is

    exp[-2 k (x - <x>)^2 dt + sqrt(2 k) (x - <x>) dW],

the exponential form of the Ito unraveling: the quadratic coefficient
carries the -k (Ito) plus -k (exponentiation) contributions, and its noise
average reproduces the decoherence kernel exp[-k (x - x')^2 dt] exactly.
A small-grid density-matrix integrator of the unconditioned equation is
provided as a cross-validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryLeak, NormCollapse, PositivityLoss
from .gridio import atomic_write_text, format_float
from .model import HamiltonianSpec, potential
from .qstate import Moments, PositionGrid, WaveFunction, WignerGrid, moments, wigner, wigner_density
from .rng import NoisePath

BOUNDARY_DENSITY_LIMIT = 1e-6
NORM_COLLAPSE_LIMIT = 1e-3


@dataclass(frozen=True)
class MeasurementSpec:
    """Continuous position measurement of strength k; efficiency is fixed
    at 1 (pure-state unraveling), and the induced momentum diffusion is
    D = hbar^2 k."""

    k: float
    hbar: float
    eta: float = 1.0

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("measurement strength k must be >= 0")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if self.eta != 1.0:
            raise ValueError("only unit measurement efficiency is supported")

    @property
    def D(self) -> float:
        return self.hbar**2 * self.k

    @classmethod
    def from_diffusion(cls, D: float, hbar: float) -> "MeasurementSpec":
        return cls(k=D / hbar**2, hbar=hbar)


class _Propagator:
    """Cached phases for repeated conditioned steps on one grid."""

    def __init__(self, grid: PositionGrid, spec: HamiltonianSpec,
                 meas: MeasurementSpec, dt: float):
        self.grid = grid
        self.spec = spec
        self.meas = meas
        self.dt = dt
        self.x = grid.x
        p = grid.momenta(meas.hbar)
        self.kin_half = np.exp(-1j * p * p * (dt / 2.0) / (2.0 * spec.m * meas.hbar))
        self._hbar = meas.hbar

    def _half_hamiltonian(self, psi: np.ndarray, t_mid: float) -> np.ndarray:
        v = potential(self.spec, self.x, t_mid)
        ph = np.exp(-0.5j * v * (self.dt / 2.0) / self._hbar)
        return ph * np.fft.ifft(self.kin_half * np.fft.fft(ph * psi))

    def step(self, psi: np.ndarray, t: float, dW: float) -> np.ndarray:
        dt = self.dt
        dx = self.grid.dx
        psi = self._half_hamiltonian(psi, t + dt / 4.0)
        if self.meas.k > 0.0:
            k = self.meas.k
            prob = np.abs(psi) ** 2
            prob_sum = prob.sum()
            x_mean = float((self.x * prob).sum() / prob_sum)
            xc = self.x - x_mean
            psi = psi * np.exp(-2.0 * k * xc**2 * dt + np.sqrt(2.0 * k) * xc * dW)
            nrm = np.sqrt((np.abs(psi) ** 2).sum() * dx)
            if nrm < NORM_COLLAPSE_LIMIT:
                raise NormCollapse(f"norm fell to {nrm:.2e}; decrease dt")
            psi = psi / nrm
        psi = self._half_hamiltonian(psi, t + 3.0 * dt / 4.0)
        leak = (np.abs(psi[0]) ** 2 + np.abs(psi[-1]) ** 2) * dx
        if leak > BOUNDARY_DENSITY_LIMIT:
            raise BoundaryLeak(f"boundary density {leak:.2e} at t={t + dt:.4f}")
        return psi


def step_conditioned(psi: WaveFunction, spec: HamiltonianSpec, meas: MeasurementSpec,
                     t: float, dt: float, dW: float) -> WaveFunction:
    """One conditioned step; returns a new normalized state."""
    prop = _Propagator(psi.grid, spec, meas, dt)
    out = prop.step(psi.amplitudes, t, dW)
    return WaveFunction(psi.grid, out / np.sqrt((np.abs(out) ** 2).sum() * psi.grid.dx),
                        psi.hbar)


@dataclass
class TrajectoryRecord:
    """Moment time series of one conditioned trajectory, plus optional
    state snapshots."""

    times: np.ndarray
    mean_x: np.ndarray
    mean_p: np.ndarray
    var_x: np.ndarray
    var_p: np.ndarray
    cov_xp: np.ndarray
    norm_leak: np.ndarray
    snapshots: list = field(default_factory=list)
    clip_events: int = 0

    CSV_COLUMNS = ("t", "mean_x", "mean_p", "var_x", "var_p", "cov_xp", "norm_leak")

    def to_csv(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        cols = (self.times, self.mean_x, self.mean_p, self.var_x, self.var_p,
                self.cov_xp, self.norm_leak)
        for row in zip(*cols):
            lines.append(",".join(format_float(v) for v in row))
        lines.append("")
        return "\n".join(lines)

    def write_csv(self, path: str) -> None:
        atomic_write_text(path, self.to_csv())


def run_trajectory(psi0: WaveFunction, spec: HamiltonianSpec, meas: MeasurementSpec,
                   t_final: float, dt: float, noise: NoisePath,
                   record_every: int = 100,
                   snapshot_times: tuple = ()) -> TrajectoryRecord:
    """Propagate one conditioned trajectory; a pure function of
    (psi0, noise). Moments are recorded every ``record_every`` steps
    (including t = 0), snapshots at the steps nearest ``snapshot_times``.
    """
    n_steps = int(round(t_final / dt))
    if noise.n_steps < n_steps:
        raise ValueError(f"noise path holds {noise.n_steps} steps, need {n_steps}")
    if abs(noise.dt - dt) > 1e-15 * max(1.0, abs(dt)):
        raise ValueError("noise path was generated for a different dt")
    prop = _Propagator(psi0.grid, spec, meas, dt)
    psi = psi0.amplitudes.copy()
    snap_steps = {}
    for ts in snapshot_times:
        s = int(round(ts / dt))
        if not 0 <= s <= n_steps:
            raise ValueError(f"snapshot time {ts} outside [0, {t_final}]")
        snap_steps.setdefault(s, ts)

    rows = []
    snapshots = []

    def record(step, amplitudes):
        wf = WaveFunction(psi0.grid, amplitudes, psi0.hbar)
        mom = moments(wf)
        rows.append((step * dt, mom.mean_x, mom.mean_p, mom.var_x, mom.var_p,
                     mom.cov_xp, wf.boundary_density()))

    record(0, psi)
    if 0 in snap_steps:
        snapshots.append((0.0, WaveFunction(psi0.grid, psi.copy(), psi0.hbar)))
    for s in range(n_steps):
        psi = prop.step(psi, s * dt, noise.increments[s])
        if (s + 1) % record_every == 0 or (s + 1) == n_steps:
            record(s + 1, psi)
        if (s + 1) in snap_steps:
            snapshots.append(((s + 1) * dt, WaveFunction(psi0.grid, psi.copy(), psi0.hbar)))

    arr = np.asarray(rows, dtype=float)
    return TrajectoryRecord(
        times=arr[:, 0], mean_x=arr[:, 1], mean_p=arr[:, 2], var_x=arr[:, 3],
        var_p=arr[:, 4], cov_xp=arr[:, 5], norm_leak=arr[:, 6],
        snapshots=snapshots, clip_events=noise.n_clipped,
    )


@dataclass
class AveragedDensity:
    """Trajectory-mean Wigner functions at requested times."""

    times: np.ndarray
    grids: list
    n_traj: int
    seed: int
    clip_events: int = 0


_ENSEMBLE_CTX = {}


def _ensemble_worker(index: int):
    ctx = _ENSEMBLE_CTX
    noise = NoisePath.generate(ctx["seed"], index, ctx["dt"], ctx["n_steps"])
    rec = run_trajectory(ctx["psi0"], ctx["spec"], ctx["meas"], ctx["t_final"],
                         ctx["dt"], noise, record_every=max(ctx["n_steps"], 1),
                         snapshot_times=ctx["wigner_times"])
    grids = [wigner(snap, ctx["n_p"]).values for _, snap in rec.snapshots]
    return grids, rec.clip_events


def average_ensemble(psi0: WaveFunction, spec: HamiltonianSpec, meas: MeasurementSpec,
                     t_final: float, dt: float, n_traj: int, seed: int,
                     wigner_times, n_p: int | None = None,
                     workers: int = 1) -> AveragedDensity:
    """Mean of per-trajectory Wigner functions at the requested times.

    Trajectory index ``i`` always uses the noise stream (seed, i); the
    reduction is an ordered sum over trajectory index, so the result is
    bitwise independent of ``workers``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    wigner_times = sorted(float(t) for t in wigner_times)
    n_steps = int(round(t_final / dt))
    if n_p is None:
        n_p = psi0.grid.n_points
    ctx = dict(psi0=psi0, spec=spec, meas=meas, t_final=t_final, dt=dt,
               n_steps=n_steps, wigner_times=tuple(wigner_times), n_p=n_p, seed=seed)

    acc = None
    clip_total = 0

    def fold(result):
        nonlocal acc, clip_total
        grids, clips = result
        clip_total += clips
        if acc is None:
            acc = [g.copy() for g in grids]
        else:
            for a, g in zip(acc, grids):
                a += g

    global _ENSEMBLE_CTX
    if workers <= 1:
        _ENSEMBLE_CTX = ctx
        for i in range(n_traj):
            fold(_ensemble_worker(i))
    else:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(
            processes=workers, initializer=_set_ensemble_ctx, initargs=(ctx,)
        ) as pool:
            for result in pool.imap(_ensemble_worker, range(n_traj), chunksize=1):
                fold(result)

    # snapshot steps are rounded exactly as in run_trajectory
    times = np.array([int(round(ts / dt)) * dt for ts in wigner_times])
    template = wigner(psi0, n_p)
    grids = [
        WignerGrid(values=a / n_traj, x0=template.x0, dx=template.dx,
                   p0=template.p0, dp=template.dp)
        for a in acc
    ]
    return AveragedDensity(times=times, grids=grids, n_traj=n_traj, seed=seed,
                           clip_events=clip_total)


def _set_ensemble_ctx(ctx):
    global _ENSEMBLE_CTX
    _ENSEMBLE_CTX = ctx


# ---------------------------------------------------------------------------
# unconditioned (density-matrix) oracle on reduced grids
# ---------------------------------------------------------------------------

@dataclass
class LindbladRecord:
    times: np.ndarray
    moments: list
    traces: np.ndarray
    rhos: list


def coherent_density(grid: PositionGrid, x0: float, p0: float, hbar: float) -> np.ndarray:
    from .qstate import coherent_state

    psi = coherent_state(grid, x0, p0, hbar).amplitudes
    return np.outer(psi, psi.conj())


def density_moments(rho: np.ndarray, grid: PositionGrid, hbar: float) -> Moments:
    x = grid.x
    dx = grid.dx
    prob = np.real(np.diag(rho)) * dx
    prob_sum = prob.sum()
    mean_x = float((x * prob).sum() / prob_sum)
    var_x = float(((x - mean_x) ** 2 * prob).sum() / prob_sum)
    p = grid.momenta(hbar)
    # <p|rho|p>: forward transform on the ket index, inverse on the bra
    rho_p = np.fft.ifft(np.fft.fft(rho, axis=0), axis=1)
    pr = np.real(np.diag(rho_p))
    pr = pr / pr.sum()
    mean_p = float((p * pr).sum())
    var_p = float(((p - mean_p) ** 2 * pr).sum())
    # symmetrized covariance via p rho
    p_rho = np.fft.ifft(p[:, None] * np.fft.fft(rho, axis=0), axis=0)
    xp = float(np.real(np.sum(np.diag(p_rho) * x)) * dx / prob_sum)
    cov = xp - mean_x * mean_p
    return Moments(mean_x, mean_p, var_x, var_p, cov)


def lindblad_evolve(rho0: np.ndarray, spec: HamiltonianSpec, meas: MeasurementSpec,
                    t_final: float, dt: float, grid: PositionGrid,
                    record_times=(), check_positivity: bool = False) -> LindbladRecord:
    """Integrate the unconditioned evolution (Hamiltonian flow plus the
    position-decoherence double commutator) on a reduced grid.

    A Strang composition of the exact decoherence factor
    exp[-k (x - x')^2 dt] and a split-operator unitary; the trace is
    conserved exactly by both factors and Hermiticity is enforced each
    step. Intended for grids of at most a few hundred points.

    Raises
    ------
    ValueError
        If rho0 is not Hermitian/unit-trace/positive within 1e-10.
    PositivityLoss
        If ``check_positivity`` and a recorded state develops an
        eigenvalue below -1e-6.
    """
    n = grid.n_points
    if rho0.shape != (n, n):
        raise ValueError("rho0 shape must match the grid")
    if np.abs(rho0 - rho0.conj().T).max() > 1e-10:
        raise ValueError("rho0 must be Hermitian")
    trace0 = float(np.real(np.trace(rho0)) * grid.dx)
    if abs(trace0 - 1.0) > 1e-8:
        raise ValueError(f"rho0 trace is {trace0}, expected 1")
    eigs = np.linalg.eigvalsh(rho0 * grid.dx)
    if eigs.min() < -1e-10:
        raise ValueError(f"rho0 has negative eigenvalue {eigs.min():.2e}")

    x = grid.x
    p = grid.momenta(meas.hbar)
    hbar = meas.hbar
    n_steps = int(round(t_final / dt))
    record_steps = {int(round(ts / dt)): float(ts) for ts in record_times}
    record_steps.setdefault(n_steps, t_final)

    kin = np.exp(-1j * p * p * dt / (2.0 * spec.m * hbar))
    deco_half = np.exp(-meas.k * (x[:, None] - x[None, :]) ** 2 * (dt / 2.0))

    rho = rho0.astype(complex).copy()
    times, mom_list, traces, rhos = [], [], [], []

    def record(step):
        t = step * dt
        times.append(t)
        mom_list.append(density_moments(rho, grid, hbar))
        traces.append(float(np.real(np.trace(rho)) * grid.dx))
        rhos.append(rho.copy())
        if check_positivity:
            lo = float(np.linalg.eigvalsh(rho * grid.dx).min())
            if lo < -1e-6:
                raise PositivityLoss(f"eigenvalue {lo:.2e} at t={t}; decrease dt")

    if 0 in record_steps:
        record(0)
    t = 0.0
    for s in range(n_steps):
        rho *= deco_half
        phv = np.exp(-0.5j * potential(spec, x, t + dt / 2.0) * dt / hbar)
        rho = phv[:, None] * rho * np.conj(phv)[None, :]
        rho = np.fft.ifft(kin[:, None] * np.fft.fft(rho, axis=0), axis=0)
        rho = np.fft.fft(np.conj(kin)[None, :] * np.fft.ifft(rho, axis=1), axis=1)
        rho = phv[:, None] * rho * np.conj(phv)[None, :]
        rho *= deco_half
        rho = 0.5 * (rho + rho.conj().T)
        t += dt
        if (s + 1) in record_steps:
            record(s + 1)

    return LindbladRecord(times=np.asarray(times), moments=mom_list,
                          traces=np.asarray(traces), rhos=rhos)


def lindblad_wigner(record: LindbladRecord, grid: PositionGrid, hbar: float,
                    index: int = -1, n_p: int | None = None) -> WignerGrid:
    """Wigner transform of a recorded density matrix."""
    return wigner_density(record.rhos[index], grid, hbar, n_p)
