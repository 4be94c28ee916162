import math

import numpy as np
import pytest

from osgood_she.catalog import ScalarFn, resolve, resolve_spectrum
from osgood_she.errors import ConfigError, DomainError, ExplodedField
from osgood_she.field import GridField, gaussian_profile
from osgood_she.lattice import Lattice
from osgood_she.noise import NoiseIncrement, NoiseStream, build_spectrum, sample_increment
from osgood_she.solver import (RunSetup, make_cutoff, mild_step, ou_second_moment, run_localized,
                               second_moment_oracle, simulate_batch, stability_bound, start_level,
                               tripling_sequence)

from conftest import fn

ZERO = fn(lambda u: 0 * u, "zero")


def setup_for(lat, spec_name="fhat.white", alpha=0.5, **kw):
    spec = build_spectrum(resolve_spectrum(spec_name, alpha, lat.d), lat)
    kw.setdefault("b", ZERO)
    kw.setdefault("sigma", ZERO)
    kw.setdefault("u0", np.zeros(lat.shape))
    kw.setdefault("dt", 1e-3)
    kw.setdefault("T", 0.1)
    return RunSetup(lattice=lat, spectrum=spec, **kw)


def test_cutoff_examples():
    c = make_cutoff(fn(lambda u: u**2), 1)
    assert c.level == 3.0
    np.testing.assert_array_equal(c(np.array([5.0, -5.0, 2.0, 0.0])), [9.0, 9.0, 4.0, 0.0])


def test_cutoff_recovers_base():
    g = fn(lambda u: u**3 - u)
    u = np.linspace(-20, 20, 101)
    np.testing.assert_array_equal(make_cutoff(g, 3)(u), g(u))


def test_cutoff_lipschitz():
    c = make_cutoff(fn(lambda u: u**2), 2)
    np.testing.assert_allclose(c.lipschitz(), 18.0, rtol=1e-3)
    x = np.random.default_rng(0).uniform(-30, 30, size=(2, 1000))
    assert np.all(np.abs(c(x[0]) - c(x[1])) <= c.lipschitz() * np.abs(x[0] - x[1]) * (1 + 1e-9))


def test_stability_bound():
    assert stability_bound(fn(lambda u: u**2), 2) == pytest.approx(1 / 18, rel=1e-3)
    assert stability_bound(ZERO, 5) == 1.0


@pytest.mark.parametrize("vp,n", [(1.0, 0), (3.0, 1), (3.0001, 2), (9.0, 2), (0.5, 0), (0.3, -1), (0.0, -30)])
def test_start_level(vp, n):
    assert start_level(vp) == n


def test_tripling_examples():
    assert tripling_sequence(fn(lambda u: u), 0.3, 5) == pytest.approx(0.2)
    np.testing.assert_allclose(tripling_sequence(fn(lambda u: u * np.log(u)), 0.3, 1), 0.13653588399402560)
    h = resolve("h.ulogu", 0.5)
    np.testing.assert_allclose([tripling_sequence(h, 0.3, n) for n in (1, 2, 3)],
                               [0.018478122532292747, 0.012318748354861832, 0.009239061266146375], rtol=1e-12)


def test_tripling_partial_sums_diverge():
    h = fn(lambda u: u * np.log(u))
    a = np.array([tripling_sequence(h, 0.3, n) for n in range(1, 600)])
    # a_n = 0.3 / ((n+1) log 3): partial sums grow like log N
    np.testing.assert_allclose(a, 0.3 / (np.arange(1, 600) + 1) / math.log(3), rtol=1e-12)
    s = np.cumsum(a)
    np.testing.assert_allclose(s[598] - s[299], 0.3 / math.log(3) * math.log(600 / 301), rtol=2e-3)


@pytest.mark.parametrize("theta,n", [(0.0, 1), (0.4, 1), (0.3, 0)])
def test_tripling_errors(theta, n):
    with pytest.raises(DomainError):
        tripling_sequence(fn(lambda u: u), theta, n)


def _inc(lat, dt, values=None):
    v = np.zeros(lat.shape) if values is None else values
    return NoiseIncrement(GridField(lat, v), dt, (0, 0, 0))


def test_mild_step_pure_semigroup():
    lat = Lattice(1, 10.0, 256)
    k = 3 * math.pi / lat.L
    u = GridField(lat, np.cos(k * lat.axis()))
    out = mild_step(u, 0.01, ZERO, ZERO, _inc(lat, 0.01), symbol="spectral")
    np.testing.assert_allclose(out.values, math.exp(-0.5 * k * k * 0.01) * u.values, rtol=1e-12, atol=1e-15)


def test_mild_step_linear_drift_constant():
    lat = Lattice(1, 4.0, 64)
    u = GridField(lat, np.full(64, 2.0))
    lam, dt = 0.7, 1e-3
    b = fn(lambda x: lam * x)
    for _ in range(1000):
        u = mild_step(u, dt, b, ZERO, _inc(lat, dt))
    np.testing.assert_allclose(u.values, 2.0 * (1 + lam * dt) ** 1000, rtol=1e-12)
    np.testing.assert_allclose(u.values[0], 2.0 * math.exp(lam), rtol=lam**2 * dt)


def test_mild_step_orders_agree_without_forcing():
    lat = Lattice(1, 4.0, 64)
    u = gaussian_profile(lat, 0.3)
    a = mild_step(u, 0.01, ZERO, ZERO, _inc(lat, 0.01), order="inside")
    b = mild_step(u, 0.01, ZERO, ZERO, _inc(lat, 0.01), order="separate")
    np.testing.assert_allclose(a.values, b.values, atol=1e-15)


def test_mild_step_errors():
    lat = Lattice(1, 4.0, 64)
    u = GridField(lat, np.ones(64))
    with pytest.raises(DomainError):
        mild_step(u, 0.01, ZERO, ZERO, _inc(lat, 0.02))
    with pytest.raises(DomainError):
        mild_step(u, 0.01, ZERO, ZERO, _inc(Lattice(1, 2.0, 64), 0.01))
    with pytest.raises(ExplodedField):
        mild_step(GridField(lat, np.full(64, 1e200)), 0.01, fn(lambda x: x**2), ZERO, _inc(lat, 0.01))


def test_mild_step_matches_batch_solver():
    lat = Lattice(1, 4.0, 64)
    sig = fn(lambda x: 0.5 * x)
    st = setup_for(lat, b=fn(lambda x: 0.2 * x), sigma=sig, u0=gaussian_profile(lat, 0.5).values, T=0.01,
                   ladder=False)
    states = []
    st.observer = lambda k, t, idx, u, drift, kick: states.append(u[0].copy())
    res = run_localized(st, seed=3, stream=5)
    u = GridField(lat, st.u0)
    rng = NoiseStream(3, 5, lat.n_cells)
    for k in range(st.n_steps):
        np.testing.assert_allclose(u.values, states[k], rtol=1e-13, atol=1e-15)
        u = mild_step(u, st.dt, st.b, sig, sample_increment(st.spectrum, st.dt, rng, k))
    assert not res.exploded


def test_run_setup_validation():
    lat = Lattice(1, 4.0, 64)
    with pytest.raises(ConfigError):
        setup_for(lat, u0=np.zeros(32))
    with pytest.raises(ConfigError):
        setup_for(lat, dt=0.0)
    with pytest.raises(ConfigError):
        setup_for(lat, order="sideways")
    other = build_spectrum(resolve_spectrum("fhat.white"), Lattice(1, 2.0, 64))
    with pytest.raises(ConfigError):
        RunSetup(lattice=lat, spectrum=other, b=ZERO, sigma=ZERO, u0=np.zeros(64), dt=1e-3, T=1.0)


def test_quiet_run_triggers_nothing():
    lat = Lattice(1, 8.0, 128)
    st = setup_for(lat, u0=gaussian_profile(lat, 0.5, 2.0).values, T=0.5, h=resolve("h.ulogu", 0.5))
    r = run_localized(st, 1)
    assert not r.exploded and r.t_explode is None
    assert r.ladder.tau == [] and r.ladder.n_current == r.ladder.n_start
    assert np.all(np.diff(r.norm_trace[:, 3]) <= 1e-12)


@pytest.mark.parametrize("c", [1.0, 2.0])
def test_deterministic_blowup_matches_ode(c):
    lat = Lattice(1, 4.0, 32)
    st = setup_for(lat, b=fn(lambda u: u**2), u0=np.full(32, c), dt=1e-4, T=2.0 / c, ladder=True)
    r = run_localized(st, 0)
    assert r.exploded
    np.testing.assert_allclose(r.t_explode, 1 / c, rtol=0.02)
    assert r.t_explode <= r.final_time
    assert r.norm_trace[-1, 3] > st.explode_thresh or not np.isfinite(r.norm_trace[-1, 3])
    taus = [t for _, t in r.ladder.tau]
    assert np.all(np.diff(taus) > 0)
    levels = [n for n, _ in r.ladder.tau]
    assert levels == list(range(levels[0], levels[0] + len(levels)))


def test_cutoff_consistency_below_tau():
    lat = Lattice(1, 8.0, 128)
    base = dict(b=resolve("b.ulog:1"), sigma=resolve("sigma.linear:1.0"),
                u0=gaussian_profile(lat, 0.25, 3.0).values, T=0.5, p=6.0)
    snaps = {}
    for lev in (1, 3):
        states = []
        st = setup_for(lat, ladder=False, fixed_level=lev, **base)
        st.observer = lambda k, t, idx, u, d, kk, s=states: s.append(u[0].copy())
        snaps[lev] = (run_localized(st, 9, 0), states)
    tracked = setup_for(lat, ladder=True, **base)
    tau = dict(run_localized(tracked, 9, 0).ladder.tau)
    assert 1 in tau
    k_tau = int(tau[1] / 1e-3)
    assert k_tau > 5
    for k in range(k_tau + 1):
        np.testing.assert_array_equal(snaps[1][1][k], snaps[3][1][k])
    assert not np.array_equal(snaps[1][1][-1], snaps[3][1][-1])


def test_positivity_with_vanishing_coefficients():
    lat = Lattice(1, 8.0, 128)
    st = setup_for(lat, b=resolve("b.ulog:1"), sigma=resolve("sigma.linear:0.5"),
                   u0=gaussian_profile(lat, 0.25, 2.0).values, T=0.3, h=resolve("h.ulogu", 0.5))
    res = simulate_batch(st, 4, list(range(16)))
    for r in res:
        assert r.dt <= r.stability_bound
        assert r.min_value >= -1e-10 * r.max_vp


def test_batch_composition_does_not_matter():
    lat = Lattice(1, 8.0, 64)
    st = setup_for(lat, b=resolve("b.ulog:1"), sigma=resolve("sigma.linear:0.5"),
                   u0=gaussian_profile(lat, 0.25, 2.0).values, T=0.2, h=resolve("h.ulogu", 0.5), chunk=7)
    full = simulate_batch(st, 2, [0, 1, 2, 3])
    sub = simulate_batch(st, 2, [2, 3])
    for a, b in zip(full[2:], sub):
        np.testing.assert_array_equal(a.norm_trace, b.norm_trace)
        assert a.max_vp == b.max_vp and a.ladder.tau == b.ladder.tau


def test_shortfall_record_logic():
    from osgood_she.solver import _ladder_record
    lat = Lattice(1, 4.0, 64)
    st = setup_for(lat, h=fn(lambda u: u), theta=0.3)
    # a_n = min(0.3, 1/n)
    rec = _ladder_record(st, 1, 4, [(1, 0.10), (2, 0.20), (3, 0.80)], False, float("nan"), 1.0)
    assert rec.tripling_shortfalls == [(1, True), (2, False), (3, None)]
    rec = _ladder_record(st, 1, 2, [(1, 0.10)], True, 0.2, 0.2)
    assert rec.tripling_shortfalls == [(1, True)]
    rec = _ladder_record(st, 1, 2, [(1, 0.10)], False, float("nan"), 0.5)
    assert rec.tripling_shortfalls == [(1, False)]


def test_second_moment_oracle_deterministic_limit():
    lat = Lattice(1, 4.0, 64)
    spec = build_spectrum(resolve_spectrum("fhat.white"), lat)
    m = second_moment_oracle(lat, spec, 1.5, 0.4, 0.0, 1e-3, 1000)
    np.testing.assert_allclose(m[-1], 1.5**2 * (1 + 0.4e-3) ** 2000, rtol=1e-12)


@pytest.mark.parametrize("spec_name,alpha", [("fhat.white", 0.5), ("fhat.gaussian:0.5", 1.0)])
def test_second_moment_oracle_matches_ou_for_small_noise(spec_name, alpha):
    lat = Lattice(1, 8.0, 128)
    spec = build_spectrum(resolve_spectrum(spec_name, alpha, 1), lat)
    Ls = 0.05
    exact = second_moment_oracle(lat, spec, 1.0, 0.0, Ls, 1e-3, 500)[-1]
    ou = ou_second_moment(lat, spec, 1.0, Ls, 0.5)
    np.testing.assert_allclose(exact - 1, ou - 1, rtol=0.05)


def test_zero_mode_variance_against_ou_closed_form():
    # sigma = 1, b = 0, u = 0: mean-square of the field equals sum_k w_k (1 - e^{-2 lam t}) / (2 lam)
    lat = Lattice(1, 8.0, 64)
    st = setup_for(lat, "fhat.gaussian:1", 1.0, sigma=fn(lambda u: 1 + 0 * u), T=0.2, ladder=False)
    states = []
    st.observer = lambda k, t, idx, u, d, kk: states.append(u.copy()) if k == st.n_steps - 1 else None
    simulate_batch(st, 1, list(range(400)))
    u_last = states[0] + 0  # state at t = T - dt
    emp = np.mean(u_last**2)
    # exact discrete variance: sum over steps of dt * sum_k w_k e^{-2 lam (j dt)} / vol / N
    from osgood_she.field import lattice_symbol
    from osgood_she.noise import _full_weights
    lam = lattice_symbol(lat, 0.5, layout="full")
    w = _full_weights(st.spectrum) / lat.cell_volume / lat.n_cells
    m = st.n_steps - 1
    exact = sum(st.dt * np.sum(w * np.exp(-2 * lam * j * st.dt)) for j in range(1, m + 1))
    se = np.std(np.mean(u_last**2, axis=1)) / math.sqrt(400)
    assert abs(emp - exact) <= 3 * se
