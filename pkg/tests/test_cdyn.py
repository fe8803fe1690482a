import numpy as np
import pytest

from qct import (ClassicalEnsemble, HamiltonianSpec, density_histogram,
                 edges_like, evolve_ensemble, langevin_step, local_lyapunov,
                 lyapunov_benettin, orbit, sample_coherent_matched)
from qct.errors import OutOfRange
from qct.model import chaotic_duffing, harmonic, potential


def test_symplectic_energy_drift_bounded():
    spec = HamiltonianSpec(m=1.0, alpha=10.0, beta=0.5)  # no drive
    dt = 1e-3
    x, p = 2.5, 0.0  # oscillation inside one well
    e0 = p**2 / 2 + potential(spec, x, 0.0)
    t = 0.0
    worst = 0.0
    for s in range(100_000):
        x, p = langevin_step((x, p), spec, 0.0, t, dt, 0.0)
        t += dt
        if (s + 1) % 5000 == 0:
            e = p**2 / 2 + potential(spec, x, 0.0)
            worst = max(worst, abs(e - e0) / abs(e0))
    assert worst < 1e-3


def test_free_particle_momentum_diffusion():
    spec = HamiltonianSpec(m=1.0, alpha=0.0, beta=0.0)
    D = 0.01
    ens = sample_coherent_matched(0.0, 0.0, 0.1, 100_000, seed=4)
    snaps = evolve_ensemble(ens, spec, D, 0.0, 1.0, 1e-3, seed=4)
    _, final = snaps[-1]
    growth = final.moments().var_p - ens.moments().var_p
    se = final.moments().var_p * np.sqrt(2.0 / ens.n)
    assert abs(growth - 2 * D * 1.0) < 3 * se + 0.05 * 2 * D


def test_noiseless_harmonic_ensemble_rotation():
    omega0 = 1.0
    spec = harmonic(omega0=omega0)
    ens = sample_coherent_matched(1.0, 0.0, 0.1, 2000, seed=9)
    t_final = 2.0 * np.pi / omega0
    snaps = evolve_ensemble(ens, spec, 0.0, 0.0, t_final, 1e-4, seed=9)
    _, final = snaps[-1]
    m0 = ens.moments()
    m1 = final.moments()
    # one full rotation returns the mean; global error O(dt)
    assert m1.mean_x == pytest.approx(m0.mean_x, abs=5e-3)
    assert m1.mean_p == pytest.approx(m0.mean_p, abs=5e-3)


def test_sample_coherent_matched_statistics():
    n = 100_000
    ens = sample_coherent_matched(-3.0, 8.0, 0.1, n, seed=5)
    m = ens.moments()
    se_mean = np.sqrt(0.05 / n)
    se_var = 0.05 * np.sqrt(2.0 / n)
    assert abs(m.mean_x + 3.0) < 4 * se_mean
    assert abs(m.mean_p - 8.0) < 4 * se_mean
    assert abs(m.var_x - 0.05) < 3 * se_var
    assert abs(m.var_p - 0.05) < 3 * se_var
    assert abs(m.cov_xp) < 4 * 0.05 / np.sqrt(n)

    again = sample_coherent_matched(-3.0, 8.0, 0.1, n, seed=5)
    assert np.array_equal(ens.x, again.x) and np.array_equal(ens.p, again.p)

    single = sample_coherent_matched(0.0, 0.0, 0.1, 1, seed=6)
    assert single.n == 1
    assert (single.x[0], single.p[0]) != (0.0, 0.0)  # a draw, not the mean


def test_ensemble_validation():
    with pytest.raises(ValueError):
        ClassicalEnsemble(x=np.array([1.0, np.inf]), p=np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        ClassicalEnsemble(x=np.array([]), p=np.array([]))


def test_density_histogram_delta_and_normalization():
    ens = ClassicalEnsemble(x=np.full(50, 0.51), p=np.full(50, -0.26))
    x_edges = np.linspace(-1, 1, 5)   # dx = 0.5
    p_edges = np.linspace(-1, 1, 5)
    hist = density_histogram(ens, x_edges, p_edges)
    assert hist.integral() == pytest.approx(1.0, abs=1e-12)
    assert hist.values.max() == pytest.approx(1.0 / (0.5 * 0.5))
    assert (hist.values > 0).sum() == 1


def test_density_histogram_out_of_range():
    ens = ClassicalEnsemble(x=np.array([0.0, 5.0]), p=np.array([0.0, 0.0]))
    with pytest.raises(OutOfRange, match="50"):
        density_histogram(ens, np.linspace(-1, 1, 3), np.linspace(-1, 1, 3))


def test_density_histogram_uniform_poisson_bounds(rng):
    n = 160_000
    ens = ClassicalEnsemble(x=rng.uniform(-1, 1, n), p=rng.uniform(-1, 1, n))
    edges = np.linspace(-1, 1.0000001, 5)
    hist = density_histogram(ens, edges, edges)
    counts = hist.values * ens.n * hist.cell_area
    expected = n / 16.0
    assert np.abs(counts - expected).max() < 5 * np.sqrt(expected)


def test_histogram_half_ensemble_convergence(rng):
    """L1 distance between independent half-ensemble histograms scales
    like N^(-1/2)."""
    edges = np.linspace(-6, 6, 49)
    dists = []
    sizes = [2000, 8000, 32000, 128000]
    for n in sizes:
        a = ClassicalEnsemble(x=rng.normal(0, 1, n), p=rng.normal(0, 1, n))
        b = ClassicalEnsemble(x=rng.normal(0, 1, n), p=rng.normal(0, 1, n))
        ha = density_histogram(a, edges, edges)
        hb = density_histogram(b, edges, edges)
        dists.append(0.5 * np.abs(ha.values - hb.values).sum() * ha.cell_area)
    slope = np.polyfit(np.log(sizes), np.log(dists), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.15)


def test_edges_match_wigner_axes(psi_coherent):
    from qct import wigner

    W = wigner(psi_coherent)
    x_edges, p_edges = edges_like(W)
    assert x_edges.size == W.n_x + 1
    assert p_edges.size == W.n_p + 1
    assert 0.5 * (x_edges[0] + x_edges[1]) == pytest.approx(W.x0)
    assert 0.5 * (p_edges[-2] + p_edges[-1]) == pytest.approx(W.p[-1])


def test_lyapunov_harmonic_is_zero():
    est = lyapunov_benettin(harmonic(omega0=2.0), 1.0, 0.0, t_span=100.0,
                            dt=1e-3, renorm_every=10)
    assert abs(est.lambda_bar) <= 0.02
    assert est.converged


def test_lyapunov_inverted_quadratic_local_rate():
    # V = -alpha x^2 with alpha = 10: local stretching rate sqrt(20)
    spec = HamiltonianSpec(m=1.0, alpha=10.0, beta=0.0, drive_freq=6.07)
    est = lyapunov_benettin(spec, 0.0, 0.0, t_span=50.0, dt=1e-3,
                            renorm_every=10)
    assert est.lambda_bar == pytest.approx(np.sqrt(20.0), rel=0.01)
    assert local_lyapunov(spec, 0.0) == pytest.approx(np.sqrt(20.0), rel=1e-12)


def test_lyapunov_duffing_positive_and_stable():
    spec = chaotic_duffing()
    a = lyapunov_benettin(spec, -3.0, 8.0, t_span=150.0, dt=1e-3,
                          n_orbits=4, ic_spread=np.sqrt(0.05), seed=1)
    b = lyapunov_benettin(spec, -3.0, 8.0, t_span=150.0, dt=1e-3,
                          n_orbits=4, ic_spread=np.sqrt(0.05), seed=2)
    assert a.lambda_bar > 0.1 and b.lambda_bar > 0.1
    assert abs(a.lambda_bar - b.lambda_bar) < 2 * (a.std_err + b.std_err)


def test_lyapunov_renormalization_insensitive():
    spec = chaotic_duffing()
    a = lyapunov_benettin(spec, -3.0, 8.0, t_span=200.0, dt=1e-3,
                          renorm_every=5, n_orbits=4, ic_spread=0.2, seed=3)
    b = lyapunov_benettin(spec, -3.0, 8.0, t_span=200.0, dt=1e-3,
                          renorm_every=50, n_orbits=4, ic_spread=0.2, seed=3)
    assert abs(a.lambda_bar - b.lambda_bar) <= 2 * (a.std_err + b.std_err)


def test_orbit_shapes_and_determinism(duffing):
    t, x, p = orbit(duffing, -3.0, 8.0, 2.0, 1e-3, sample_every=10)
    assert t[0] == 0.0 and x[0] == -3.0 and p[0] == 8.0
    assert t.size == 201
    t2, x2, p2 = orbit(duffing, -3.0, 8.0, 2.0, 1e-3, sample_every=10)
    assert np.array_equal(x, x2) and np.array_equal(p, p2)
