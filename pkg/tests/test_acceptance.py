"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s``. The full suite takes
roughly 30-40 minutes on one core; the two ensemble criteria dominate.
Expensive artifacts (the reference trajectory, the measured stretching
rate) are session fixtures shared between criteria.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import qct
from qct import (HamiltonianSpec, MeasurementSpec, accessible_area,
                 action_scales, average_ensemble, classify, coherent_density,
                 coherent_state, density_histogram, k_crit, lindblad_evolve,
                 lindblad_wigner, lyapunov_benettin, moments, negativity,
                 phase_space_averages, run_trajectory, sample_coherent_matched,
                 solve_l, wigner)
from qct.cli import main as cli_main
from qct.compare import density_distance, overall_noise_metric
from qct.config import default_config
from qct.model import chaotic_duffing, harmonic
from qct.rng import NoisePath

HBAR = 0.1
K = 1.0
D = HBAR**2 * K            # 0.01, the reference diffusion rate
SEED = default_config()["run.seed"]

_LINES = []


def report(name, ok, detail=""):
    line = f"[ACCEPTANCE] {'PASS' if ok else 'FAIL'}  {name}" + (
        f"  ({detail})" if detail else "")
    _LINES.append(line)
    print("\n" + line)


@pytest.fixture(scope="session", autouse=True)
def summary():
    yield
    print("\n" + "\n".join(_LINES))


@pytest.fixture(scope="session")
def paper_run():
    """The reference run: hbar=0.1, k=1, coherent (-3, 8), t in [0, 12]."""
    spec = chaotic_duffing()
    grid = qct.default_grid()
    psi0 = coherent_state(grid, -3.0, 8.0, HBAR)
    meas = MeasurementSpec(k=K, hbar=HBAR)
    dt = 1e-4
    t0 = time.perf_counter()
    noise = NoisePath.generate(SEED, 0, dt, int(round(12.0 / dt)))
    rec = run_trajectory(psi0, spec, meas, 12.0, dt, noise, record_every=100,
                         snapshot_times=(12.0,))
    return dict(record=rec, elapsed=time.perf_counter() - t0, spec=spec,
                grid=grid, psi0=psi0, meas=meas)


@pytest.fixture(scope="session")
def lambda_est():
    spec = chaotic_duffing()
    return lyapunov_benettin(spec, -3.0, 8.0, t_span=400.0, dt=1e-3,
                             n_orbits=8, ic_spread=np.sqrt(HBAR / 2), seed=SEED)


def test_wigner_marginal_property(paper_run):
    t0 = time.perf_counter()
    psi = coherent_state(qct.default_grid(), -3.0, 8.0, HBAR)
    W = wigner(psi)
    dev_coherent = np.abs(W.marginal_x() - psi.density()).max()

    _, evolved = paper_run["record"].snapshots[-1]
    W12 = wigner(evolved)
    dev_evolved = np.abs(W12.marginal_x() - evolved.density()).max()
    elapsed = time.perf_counter() - t0

    ok = dev_coherent < 1e-8 and dev_evolved < 1e-6 and elapsed < 60.0
    report("Wigner marginal property", ok,
           f"coherent {dev_coherent:.2e}, evolved {dev_evolved:.2e}, "
           f"check {elapsed:.1f}s")
    assert dev_coherent < 1e-8
    assert dev_evolved < 1e-6
    assert elapsed < 60.0


def test_riccati_oracle():
    m = 1.0
    spec = HamiltonianSpec(m=m, alpha=0.0, beta=0.0)
    meas = MeasurementSpec(k=K, hbar=HBAR)
    grid = qct.PositionGrid(256, -4.0, 4.0)
    psi0 = coherent_state(grid, 0.0, 0.0, HBAR)
    dt, t_final = 1e-4, 1.0

    def rhs(_, y):
        vx, vp, c = y
        return [2 * c / m - 8 * K * vx**2,
                2 * HBAR**2 * K - 8 * K * c**2,
                vp / m - 8 * K * vx * c]

    sol = solve_ivp(rhs, (0, t_final), [HBAR / 2, HBAR / 2, 0.0],
                    rtol=1e-12, atol=1e-14)
    vx_ref, vp_ref, _ = sol.y[:, -1]

    noise = NoisePath.generate(SEED, 1, dt, int(round(t_final / dt)))
    rec = run_trajectory(psi0, spec, meas, t_final, dt, noise,
                         record_every=10**9)
    err_vx = abs(rec.var_x[-1] - vx_ref) / vx_ref
    err_vp = abs(rec.var_p[-1] - vp_ref) / vp_ref
    ok = err_vx < 0.01 and err_vp < 0.01
    report("Riccati oracle (conditioned variances)", ok,
           f"V_x err {err_vx:.2%}, V_p err {err_vp:.2%} at t=1")
    assert ok


def test_unraveling_consistency():
    """Trajectory-averaged Wigner converges to the direct density-matrix
    solution at the Monte-Carlo rate (256-point grid; hbar = 0.4 keeps
    the reduced grid's momentum Nyquist above the +-20 dynamics)."""
    t_start = time.perf_counter()
    hbar = 0.4
    spec = chaotic_duffing()
    meas = MeasurementSpec(k=1.0, hbar=hbar)
    grid = qct.PositionGrid(256, -8.0, 8.0)
    psi0 = coherent_state(grid, -3.0, 8.0, hbar)
    dt, t_final = 1e-4, 1.0

    rho0 = coherent_density(grid, -3.0, 8.0, hbar)
    lind = lindblad_evolve(rho0, spec, meas, t_final, dt, grid)
    W_ref = lindblad_wigner(lind, grid, hbar)

    Ms = (25, 50, 100, 200)
    repeats = (3, 3, 3, 2)
    stream = 0
    mean_dists = []
    for M, R in zip(Ms, repeats):
        dists = []
        for _ in range(R):
            avg = average_ensemble(psi0, spec, meas, t_final, dt, n_traj=M,
                                   seed=SEED + 1000 + stream,
                                   wigner_times=[t_final])
            stream += 1
            dists.append(density_distance(avg.grids[0], W_ref))
        mean_dists.append(np.mean(dists))
    slope = np.polyfit(np.log(Ms), np.log(mean_dists), 1)[0]
    elapsed = time.perf_counter() - t_start
    ok = -0.7 <= slope <= -0.3 and elapsed < 1200.0
    report("Unraveling consistency (Monte-Carlo slope)", ok,
           f"slope {slope:.3f}, distances "
           + "/".join(f"{d:.4f}" for d in mean_dists)
           + f", {elapsed / 60:.1f} min")
    assert -0.7 <= slope <= -0.3, (mean_dists, slope)
    assert elapsed < 1200.0


def test_diffusion_matching():
    spec = HamiltonianSpec(m=1.0, alpha=0.0, beta=0.0)
    meas = MeasurementSpec(k=K, hbar=HBAR)
    grid = qct.PositionGrid(128, -4.0, 4.0)
    rho0 = coherent_density(grid, 0.0, 0.0, HBAR)
    rec = lindblad_evolve(rho0, spec, meas, 1.0, 1e-3, grid)
    q_growth = rec.moments[-1].var_p - HBAR / 2

    ens = sample_coherent_matched(0.0, 0.0, HBAR, 100_000, seed=SEED)
    snaps = qct.evolve_ensemble(ens, spec, D, 0.0, 1.0, 1e-3, seed=SEED)
    c_growth = snaps[-1][1].moments().var_p - ens.moments().var_p

    q_err = abs(q_growth - 2 * HBAR**2 * K) / (2 * HBAR**2 * K)
    c_err = abs(c_growth - 2 * D) / (2 * D)
    ok = q_err < 0.05 and c_err < 0.05
    report("Diffusion matching (quantum 2hbar^2k vs classical 2D)", ok,
           f"quantum err {q_err:.2%}, classical err {c_err:.2%}, D={D}")
    assert ok


def test_lyapunov_estimates(lambda_est):
    est_h = lyapunov_benettin(harmonic(omega0=2.0), 1.0, 0.0, t_span=100.0,
                              dt=1e-3)
    other = lyapunov_benettin(chaotic_duffing(), -3.0, 8.0, t_span=400.0,
                              dt=1e-3, n_orbits=8, ic_spread=np.sqrt(HBAR / 2),
                              seed=SEED + 1)
    spread = abs(lambda_est.lambda_bar - other.lambda_bar)
    limit = 2 * (lambda_est.std_err + other.std_err)
    ok = (abs(est_h.lambda_bar) <= 0.02 and lambda_est.lambda_bar > 0.1
          and spread < limit)
    report("Lyapunov exponents", ok,
           f"harmonic {est_h.lambda_bar:+.4f}, chaotic "
           f"{lambda_est.lambda_bar:.3f}+-{lambda_est.std_err:.3f}, "
           f"cross-seed spread {spread:.3f} < {limit:.3f}")
    assert abs(est_h.lambda_bar) <= 0.02
    assert lambda_est.lambda_bar > 0.1
    assert spread < limit


def test_fig2_reproduction(paper_run):
    rec = paper_run["record"]
    spec = paper_run["spec"]
    metric = overall_noise_metric(rec, spec)
    bounded = np.abs(rec.mean_x).max() <= 6.0

    # noiseless control
    dt0 = 1e-3
    rec0 = run_trajectory(paper_run["psi0"], spec,
                          MeasurementSpec(k=0.0, hbar=HBAR), 12.0, dt0,
                          NoisePath(seed=0, trajectory_index=0, dt=dt0,
                                    increments=np.zeros(12000)),
                          record_every=10)
    metric0 = overall_noise_metric(rec0, spec)
    ok = (bounded and metric > 0.1 and metric0 < 0.01
          and paper_run["elapsed"] < 900.0)
    report("Fig. 2 reproduction (noisy mean position)", ok,
           f"max|<x>| {np.abs(rec.mean_x).max():.2f}, metric {metric:.3f}, "
           f"k=0 control {metric0:.5f}, run {paper_run['elapsed']:.0f}s")
    assert bounded
    assert metric > 0.1
    assert metric0 < 0.01
    assert paper_run["elapsed"] < 900.0


def test_fig1_reproduction(paper_run, tmp_path):
    _, evolved = paper_run["record"].snapshots[-1]
    var_x = moments(evolved).var_x
    W = wigner(evolved)

    # dump round-trips bit-exactly
    from qct.gridio import grid_to_bytes, read_qctw, write_qctw

    path = str(tmp_path / "fig1.qctw")
    write_qctw(path, W)
    back = read_qctw(path)
    roundtrip = (np.array_equal(back.values, W.values)
                 and grid_to_bytes(back) == grid_to_bytes(W))

    ok = var_x > 10 * HBAR / 2 and roundtrip
    report("Fig. 1 reproduction (delocalized Wigner dump)", ok,
           f"V_x(12) = {var_x:.3f} > {10 * HBAR / 2}, round-trip {roundtrip}")
    assert roundtrip
    assert var_x > 10 * HBAR / 2


def test_weak_transition_signature(lambda_est):
    """Ensemble-averaged Wigner negativity at 3 t_qc falls below 0.2x its
    early-time maximum (t_qc = m hbar lambda / D with the measured
    stretching rate)."""
    t_start = time.perf_counter()
    spec = chaotic_duffing()
    grid = qct.default_grid()
    psi0 = coherent_state(grid, -3.0, 8.0, HBAR)
    meas = MeasurementSpec(k=K, hbar=HBAR)
    t_qc = spec.m * HBAR * lambda_est.lambda_bar / D
    late = 3.0 * t_qc
    early = [t for t in np.arange(2.4, 6.01, 0.25) if t <= t_qc]
    times = sorted(early) + [late]

    dt = 8e-4
    n_traj = 144
    avg = average_ensemble(psi0, spec, meas, late, dt, n_traj=n_traj,
                           seed=SEED, wigner_times=times)
    negs = np.array([negativity(W) for W in avg.grids])
    early_max = negs[:-1].max()
    late_neg = negs[-1]
    elapsed = time.perf_counter() - t_start
    ok = late_neg < 0.2 * early_max
    report("Weak-transition signature (negativity decay)", ok,
           f"early max {early_max:.3f}, at 3 t_qc {late_neg:.3f} "
           f"(ratio {late_neg / early_max:.2f}), t_qc {t_qc:.1f}, "
           f"n_traj {n_traj}, {elapsed / 60:.1f} min")
    assert late_neg < 0.2 * early_max, (negs, t_qc)


def test_criteria_arithmetic():
    e8 = math.e**8
    l = solve_l(0.01, 1.0, 2.0, 1.0, 400.0)

    def residual(l):
        return abs(2 * 1.0 * 4.0 * l**2 / math.log(400.0 / l**2) - 0.01) / 0.01

    kc = k_crit(1.0, 2.0, 0.1, 4000.0)
    ok = (abs(e8 - 2980.96) <= 0.01 and 5**7 == 78125
          and abs(l**2 - 0.0129) <= 0.0002 and residual(l) < 1e-10
          and abs(kc - 9.65) <= 0.01)
    report("Criteria arithmetic", ok,
           f"e^8={e8:.2f}, 5^7={5**7}, l^2={l**2:.5f} "
           f"(residual {residual(l):.1e}), k_crit={kc:.4f}")
    assert abs(e8 - 2980.96) <= 0.01
    assert 5**7 == 78125
    assert abs(l**2 - 0.0129) <= 0.0002
    assert residual(l) < 1e-10
    assert abs(kc - 9.65) <= 0.01


def test_classifier_regression(lambda_est):
    spec = chaotic_duffing()
    meas = MeasurementSpec(k=K, hbar=HBAR)
    A = accessible_area(5.0, 20.0)

    reports = []
    for seed_shift in (0, 1):
        est = lambda_est if seed_shift == 0 else lyapunov_benettin(
            spec, -3.0, 8.0, t_span=400.0, dt=1e-3, n_orbits=8,
            ic_spread=np.sqrt(HBAR / 2), seed=SEED + seed_shift)
        averages = phase_space_averages(spec, (-3.0, 8.0), t_span=300.0)
        scales = action_scales(spec.m, HBAR, averages, A, est.lambda_bar)
        reports.append(classify(spec, meas, averages, scales, est.lambda_bar,
                                margin_factor=10.0))

    r0, r1 = reports
    weak_lower = r0.entry("weak-lower")
    uses_lambda = weak_lower.rhs == pytest.approx(
        k_crit(1.0, lambda_est.lambda_bar, HBAR, 4000.0), rel=1e-12)
    stable = all(r0.verdicts[k] == r1.verdicts[k] for k in r0.verdicts) \
        and r0.label == r1.label
    ok = (not r0.verdicts["strong_localized"]
          and not r0.verdicts["strong_low_noise"]
          and uses_lambda and stable)
    report("Classifier regression (weak without strong at k=1)", ok,
           f"label {r0.label}, strong_localized="
           f"{r0.verdicts['strong_localized']}, "
           f"strong_low_noise={r0.verdicts['strong_low_noise']}, "
           f"k_crit {weak_lower.rhs:.3f}, stable {stable}")
    assert not r0.verdicts["strong_localized"]
    assert not r0.verdicts["strong_low_noise"]
    assert uses_lambda
    assert stable


def test_determinism_across_thread_counts(tmp_path):
    config = tmp_path / "det.toml"
    config.write_text(
        "quantum.hbar = 0.4\nquantum.n_points = 256\nquantum.dt = 5e-4\n"
        "run.t_final = 0.2\nrun.seed = 11\nrun.record_every = 20\n"
        "run.wigner_times = [0.2]\nrun.n_traj = 6\n"
        "classical.n_samples = 2000\nclassical.dt = 1e-3\n"
        "criteria.lyapunov_t_span = 60.0\ncriteria.lyapunov_n_orbits = 2\n"
    )

    def run(out, threads):
        rc = cli_main(["weak-demo", "--config", str(config), "--out", out,
                       "--threads", str(threads)])
        assert rc == 0
        rc = cli_main(["simulate-quantum", "--config", str(config),
                       "--out", out, "--threads", str(threads)])
        assert rc == 0
        files = ("weak_demo.csv", "quantum_trajectory.csv", "wigner_t0.2.qctw")
        return {f: open(os.path.join(out, f), "rb").read() for f in files}

    a = run(str(tmp_path / "t1"), 1)
    b = run(str(tmp_path / "t2"), 2)
    identical = all(a[f] == b[f] for f in a)
    report("Determinism across thread counts", identical,
           "CSV and dump bytes identical for 1 vs 2 workers")
    assert identical


def test_secondary_figure_renderer(paper_run, tmp_path):
    """[SECONDARY] The figures package renders fig1/fig2 images from the
    reproduction outputs, byte-deterministically."""
    try:
        import qct_figures  # noqa: F401
    except ModuleNotFoundError:
        pytest.skip("figures package not installed")
    from qct.gridio import write_qctw
    from qct_figures.render import render_trajectory, render_wigner

    _, evolved = paper_run["record"].snapshots[-1]
    dump = str(tmp_path / "fig1.qctw")
    write_qctw(dump, wigner(evolved))
    csv = str(tmp_path / "fig2.csv")
    paper_run["record"].write_csv(csv)

    f1a = str(tmp_path / "fig1a.png")
    f1b = str(tmp_path / "fig1b.png")
    render_wigner(dump, f1a)
    render_wigner(dump, f1b)
    f2a = str(tmp_path / "fig2a.png")
    f2b = str(tmp_path / "fig2b.png")
    render_trajectory(csv, f2a)
    render_trajectory(csv, f2b)
    same = (open(f1a, "rb").read() == open(f1b, "rb").read()
            and open(f2a, "rb").read() == open(f2b, "rb").read())
    rendered = all(os.path.getsize(f) > 0 for f in (f1a, f2a))
    report("[SECONDARY] figure renderer", rendered and same,
           "fig1.png/fig2.png rendered, byte-deterministic")
    assert rendered and same
