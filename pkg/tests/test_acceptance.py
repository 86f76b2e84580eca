"""Acceptance criteria 1 to 9.

Each test appends one ``CRITERION`` line to the terminal summary and then
asserts. Seeds are fixed up front; none were tuned to the outcome.
"""

import time

import mpmath
import numpy as np
import pytest
from scipy import stats

from iiotgbsm import campaigns as C
from iiotgbsm.channel import Scene, cir_on_grid, transfer_function
from iiotgbsm.clusters import draw_cluster_angles, draw_counts, draw_offsets
from iiotgbsm.config import preset
from iiotgbsm.geometry import doppler_shift, wavelength
from iiotgbsm.propagation import PathTable, draw_sigma_tau, path_timing, power_ledger
from iiotgbsm.statistics import (StatQuery, acf, empirical_cdf, mmse_fit, paired_difference, rms_delay_spread,
                                 stfcf, stfcf_parts)

import conftest
from conftest import cluster, hand_scene, scatterer

SEED = 0


def record(label, ok, detail):
    conftest.ACCEPTANCE_LINES.append(f"CRITERION {label}: {'PASS' if ok else 'FAIL'} - {detail}")
    return ok


def _ledger(params, seed, times=(0.0,)):
    scene = Scene.draw(params, np.random.default_rng(seed))
    table = PathTable.from_environment(scene.env, 1, 1)
    t = np.asarray(times, dtype=float)
    tx = scene.tx_array.center.p0 + np.outer(t, scene.tx_array.velocity)
    rx = scene.rx_array.center.p0 + np.outer(t, scene.rx_array.velocity)
    return table, power_ledger(table, path_timing(table, tx, rx, t), params, scene.env.sigma_tau)


# --- 1 ---------------------------------------------------------------------------

def test_criterion_1_power_accounting():
    start = time.perf_counter()
    _, nlos = _ledger(preset("SA", "NLOS").with_overrides(n_clusters=64), SEED, times=(0.0, 0.01))
    _, los = _ledger(preset("SA", "LOS").with_overrides(n_clusters=64), SEED, times=(0.0, 0.01))
    elapsed = time.perf_counter() - start
    eta_err = float(np.max(np.abs(nlos.realized_eta - 0.4)))
    k_err = float(np.max(np.abs(los.realized_k - 10 ** 1.1)))
    ok = eta_err < 1e-10 and k_err < 1e-10 and elapsed < 1.0
    record(1, ok, f"|eta - 0.4| = {eta_err:.1e}, |K - 10^1.1| = {k_err:.1e}, {elapsed:.2f} s")
    assert ok


# --- 2 ---------------------------------------------------------------------------

def test_criterion_2_p_off_invariance():
    start = time.perf_counter()
    base = preset("SA", "NLOS")
    out = []
    for p_off in (0.0, 10.0, 20.0):
        table, led = _ledger(base.with_overrides(p_off_db=p_off), SEED, times=(0.0, 0.005))
        out.append(led.p_path[:, table.kind_is_dmc])
    elapsed = time.perf_counter() - start
    ok = np.array_equal(out[0], out[1]) and np.array_equal(out[0], out[2]) and elapsed < 1.0
    record(2, ok, f"DMC powers bit-identical for P_off in {{0, 10, 20}} dB: {ok}, {elapsed:.2f} s")
    assert ok


# --- 3 ---------------------------------------------------------------------------

def test_criterion_3_additivity():
    start = time.perf_counter()
    p = preset("SA", "NLOS").with_overrides(**{"layout.n_rx": 2, "layout.rx_velocity": (0.0, 1.0, 0.0)})
    ens = C.draw_scenes(p, C.realization_seeds(SEED, 50))
    worst = 0.0
    for q in (StatQuery(), StatQuery(delta_t=1e-3, delta_f=2e6), StatQuery(delta_t=4e-3, delta_f=-5e6, at_t=1e-3)):
        for idx in ((0, 0, 0, 0), (0, 0, 1, 0)):
            parts = stfcf_parts(ens, *idx, q)
            nlos = stfcf(ens, *idx, q).value - parts["LOS"]
            worst = max(worst, abs(parts["SS"] + parts["SM"] + parts["MS"] + parts["MM"] - nlos))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-12 and elapsed < 30
    record(3, ok, f"max |SS'+SM'+MS'+MM' - NLOS| = {worst:.1e} on 50 realizations, {elapsed:.1f} s")
    assert ok


# --- 4 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig3():
    start = time.perf_counter()
    p = preset("SA", "NLOS").with_overrides(**{"layout.rx_velocity": (0.0, 1.0, 0.0)})
    ens = C.draw_scenes(p, C.realization_seeds(SEED, 500))
    lags = np.linspace(0.0, 5e-3, 51)
    curves = {(t, c, m): acf(ens, 0, 0, t, lags, method=m, cluster=c)
              for t in (1e-3, 5e-3) for c in (None, 0, 2) for m in ("theoretical", "simulated")}
    return curves, time.perf_counter() - start


def test_criterion_4_acf_agreement(fig3):
    curves, elapsed = fig3
    devs = {(t, c): float(np.max(np.abs(curves[t, c, "theoretical"].value - curves[t, c, "simulated"].value)))
            for t in (1e-3, 5e-3) for c in (None, 0, 2)}
    worst = max(devs.values())
    total = max(devs[1e-3, None], devs[5e-3, None])
    ok = worst < 0.05 and elapsed < 300
    record("4 (agreement)", ok, f"max |theoretical - simulated| = {total:.3f} total channel, {worst:.3f} incl. "
           f"clusters 0 and 2, 500 realizations, {elapsed:.0f} s")
    assert ok


def test_criterion_4_non_stationarity(fig3):
    curves, elapsed = fig3
    ratios = {}
    for m in ("simulated", "theoretical"):
        d, se = paired_difference(curves[1e-3, None, m], curves[5e-3, None, m])
        ratios[m] = float(np.max(np.abs(d) / np.where(se > 0, se, np.inf)))
    ok = ratios["simulated"] > 3 and elapsed < 300
    record("4 (non-stationarity)", ok, f"max |ACF(1 ms) - ACF(5 ms)| / SE = {ratios['simulated']:.1f} "
           f"(simulated, paired SE); theoretical estimator {ratios['theoretical']:.1f}")
    assert ok


# --- 5 ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig4():
    start = time.perf_counter()
    out = C.ds_variants(C.fig4_variants(preset("SA", "NLOS")), SEED, 300)
    return {k: float(np.median(v)) for k, v in out.items()}, time.perf_counter() - start


def _cell(beta, s):
    return f"beta={beta * 1e9:g}ns,S={s:g}"


@pytest.mark.parametrize("beta, s", C.FIG4_GRID)
def test_criterion_5a_dmc_raise_median(fig4, beta, s):
    med, elapsed = fig4
    smc, both = med[_cell(beta, s) + ",SMC"], med[_cell(beta, s) + ",SMC+DMC"]
    ok = both > smc and elapsed < 300
    record(f"5a ({_cell(beta, s)})", ok, f"median DS SMC+DMC {both * 1e9:.2f} ns vs SMC-only {smc * 1e9:.2f} ns")
    assert ok


@pytest.mark.parametrize("s", (2.0, 10.0))
def test_criterion_5b_beta_increases_ds(fig4, s):
    med, _ = fig4
    lo, hi = med[_cell(10e-9, s) + ",SMC+DMC"], med[_cell(50e-9, s) + ",SMC+DMC"]
    gain = hi / lo - 1
    ok = gain >= 0.15
    record(f"5b (S={s:g})", ok, f"median DS beta 50 ns vs 10 ns: {gain * 100:+.1f}% (need >= +15%)")
    assert ok


@pytest.mark.parametrize("beta", (10e-9, 50e-9))
def test_criterion_5c_scaling_factor_small_effect(fig4, beta):
    med, _ = fig4
    a, b = med[_cell(beta, 2.0) + ",SMC+DMC"], med[_cell(beta, 10.0) + ",SMC+DMC"]
    rel = abs(b - a) / a
    ok = rel < 0.10
    record(f"5c (beta={beta * 1e9:g}ns)", ok, f"|median(S=10) - median(S=2)| / median = {rel * 100:.1f}% (need < 10%)")
    assert ok


# --- 6 ---------------------------------------------------------------------------

def test_criterion_6_fig6_ordering():
    start = time.perf_counter()
    med = {k: float(np.median(v)) for k, v in C.ds_variants(C.fig6_variants(), SEED, 300).items()}
    elapsed = time.perf_counter() - start
    checks = [med["SA-NLOS"] > med["SA-LOS"], med["SB-NLOS"] > med["SB-LOS"],
              med["SB-LOS"] > med["SA-LOS"], med["SB-NLOS"] > med["SA-NLOS"]]
    ok = all(checks) and elapsed < 600
    detail = ", ".join(f"{k} {v * 1e9:.1f} ns" for k, v in med.items())
    record(6, ok, f"medians {detail} (SA {C.FIG6_CLUSTERS[preset('SA', 'LOS').clutter]} clusters, "
           f"SB {C.FIG6_CLUSTERS[preset('SB', 'LOS').clutter]}), {elapsed:.0f} s")
    assert ok


# --- 7 ---------------------------------------------------------------------------

def test_criterion_7_ds_scale():
    med = float(np.median(C.ds_samples(preset("SA", "NLOS"), SEED, 300)))
    ratio = med / 38.9e-9
    ok = 1 / 3 < ratio < 3
    record(7, ok, f"median RMS DS {med * 1e9:.1f} ns, {ratio:.2f} x 38.9 ns")
    assert ok


# --- 8 ---------------------------------------------------------------------------

def _mp_rms(p, d):
    with mpmath.workdps(60):
        ps = [mpmath.mpf(float(x)) for x in p]
        ds = [mpmath.mpf(float(x)) for x in d]
        total = mpmath.fsum(ps)
        m1 = mpmath.fsum(a * b for a, b in zip(ps, ds)) / total
        m2 = mpmath.fsum(a * b * b for a, b in zip(ps, ds)) / total
        return float(mpmath.sqrt(m2 - m1 * m1))


def test_criterion_8_oracles():
    rng = np.random.default_rng(SEED)
    failures = []

    rms_err = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 60))
        p, d = rng.exponential(1.0, n), rng.uniform(0, 500e-9, n)
        ref = _mp_rms(p, d)
        rms_err = max(rms_err, abs(rms_delay_spread(p, d) - ref) / ref)
    if rms_err >= 1e-10:
        failures.append("rms")

    real = Scene.draw(preset("SB", "NLOS"), np.random.default_rng(SEED)).realize([0.0, 0.002])
    step, n = 0.5e-9, 4096
    real.delays = np.rint(real.delays / step) * step
    h_dft = np.fft.fft(cir_on_grid(real, step, n), axis=-1)
    h = transfer_function(real, np.arange(n) / (n * step)).values
    ctf_err = float(np.max(np.abs(h_dft - h)) / np.max(np.abs(h)))
    if ctf_err >= 1e-9:
        failures.append("ctf")

    lam = wavelength(5.8e9)
    f_closed = doppler_shift([3.0, 0, 0], [1.0, 0, 0], lam)
    s = scatterer(rx=(10.0, 0, 0), tx=(10.0, 0, 0))
    scene = hand_scene(preset("SA", "NLOS"), [cluster([s], first=(10.0, 0, 0), last=(10.0, 0, 0))], v_rx=(1.0, 0, 0))
    c = scene.realize([0.0, 10e-6]).coefficients[:, 0, 0, 0]
    f_phase = -np.angle(c[1] / c[0]) / (2 * np.pi * 10e-6)
    dop_err = max(abs(f_closed - 5.8e9 / 299_792_458.0), abs(f_phase - 5.8e9 / 299_792_458.0))
    if dop_err >= 0.01 or abs(f_closed - 19.34) >= 0.01:
        failures.append("doppler")

    params = preset("SA", "NLOS")
    _, smc_n, dmc_n = draw_counts(params.with_overrides(n_clusters=100_000), rng, clamp=False)
    lap = np.rad2deg(draw_offsets("DMC", params, rng, 100_000)).ravel()
    ang = draw_cluster_angles(params, rng, (0.0, 0.0, 0.0, 0.0), size=100_000)
    circ = np.rad2deg(stats.circstd(ang[:, 0], high=np.pi, low=-np.pi))
    logs = np.log10(draw_sigma_tau(params, rng, size=100_000))
    sample_ok = (abs(smc_n.mean() - 3.0) < 0.03 and abs(dmc_n.mean() - 17.0) < 0.07
                 and abs(lap.std() - 5.0) < 0.05 and abs(circ - 31.8) < 0.5
                 and abs(logs.mean() + 7.41) < 0.002 and abs(logs.std() - 0.13) < 0.002)
    if not sample_ok:
        failures.append("sampling")

    ok = not failures
    record(8, ok, f"rms rel err {rms_err:.1e}, CTF vs DFT {ctf_err:.1e}, Doppler err {dop_err:.1e} Hz, "
           f"sample statistics {'ok' if sample_ok else 'off'}")
    assert ok, failures


# --- 9 ---------------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_9_mmse_recovers_k():
    start = time.perf_counter()
    true = preset("SB", "LOS")
    reference = empirical_cdf(C.ds_samples(true, 101, 300))
    res = mmse_fit(reference, true.with_overrides(k_factor_db=15.0), {"k_factor_db": (0.0, 20.0)},
                   lambda p: C.ds_samples(p, 202, 300), budget=60)
    elapsed = time.perf_counter() - start
    k = res.point["k_factor_db"]
    ok = abs(k - true.k_factor_db) <= 1.0 and res.evaluations <= 60 and elapsed < 600
    record(9, ok, f"fitted K {k:.2f} dB vs true {true.k_factor_db:g} dB, {res.evaluations} evaluations, "
           f"{elapsed:.0f} s")
    assert ok
