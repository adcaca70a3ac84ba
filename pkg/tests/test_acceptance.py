"""Acceptance suite: one PASS/FAIL line per criterion, printed past pytest's capture."""

import importlib
import math
import time

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from pscvqkd import cli
from pscvqkd.channel import (B1, ChannelParams, ProtocolParams, full_eb_cm, record_covariance,
                             records_from_state)
from pscvqkd.gaussian import (entropy_g, epr_cm, symplectic_eigenvalues, symplectic_form,
                              two_mode_symplectic_eigenvalues, von_neumann_entropy)
from pscvqkd.keyrate import keyrate, mutual_information_sign
from pscvqkd.montecarlo import McConfig, simulate_pm, verify
from pscvqkd.optimize import OptimizationSpec, optimize_thresholds, sweep
from pscvqkd.postselection import PostSelectionRegion, effective_params, postselected_stats

from conftest import random_physical_two_mode, random_symplectic

# the package re-exports functions named like these modules
keyrate_mod = importlib.import_module("pscvqkd.keyrate")
optimize_mod = importlib.import_module("pscvqkd.optimize")

INF = math.inf
GRID_VA = [0.5, 1.0, 2.0, 4.0, 10.0]
GRID_T = [0.1, 0.3, 0.5, 0.7, 0.9]
GRID_XI = [0.0, 0.01, 0.05]


@pytest.fixture
def report(capsys):
    def emit(n, passed, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if passed else 'FAIL'} ({detail})")
        assert passed, detail
    return emit


def test_criterion_1_symplectic(report):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        m = random_symplectic(rng, n)
        omega = symplectic_form(n)
        worst = max(worst, float(np.max(np.abs(m @ omega @ m.T - omega))))
    elapsed = time.perf_counter() - start
    report(1, worst <= 1e-10 and elapsed < 1.0,
           f"max |M Omega M^T - Omega| = {worst:.2e}, {elapsed:.2f} s")


def test_criterion_2_entropy(report):
    checks = [entropy_g(1.0) == 0.0]
    for n in (1.0, 1.5, 3.0, 10.0):
        checks.append(math.isclose(von_neumann_entropy(np.diag([n, n])), entropy_g(n),
                                   rel_tol=1e-12, abs_tol=1e-15))
    for v in (1.0, 2.0, 10.0):
        checks.append(abs(von_neumann_entropy(epr_cm(v))) < 1e-9)
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(1000):
        g = random_physical_two_mode(rng)
        a = two_mode_symplectic_eigenvalues(g)
        b = symplectic_eigenvalues(g)
        worst = max(worst, float(np.max(np.abs(a - b))))
    report(2, all(checks) and worst <= 1e-9,
           f"{sum(checks)}/{len(checks)} identities, dual-route max diff {worst:.2e}")


def test_criterion_3_channel(report):
    worst_b = worst_rec = 0.0
    for va in GRID_VA:
        for T in GRID_T:
            for xi in GRID_XI:
                p, ch = ProtocolParams(va), ChannelParams(T, xi)
                g = full_eb_cm(p, ch, stations=False)
                expected = T * (va + 1.0) + 1.0 - T + xi
                worst_b = max(worst_b, abs(g[2 * B1, 2 * B1] - expected),
                              abs(g[2 * B1 + 1, 2 * B1 + 1] - expected))
                rec = records_from_state(p, full_eb_cm(p, ch))
                s = record_covariance(p, ch)
                closed = np.zeros((4, 4))
                closed[:2, :2] = s.var_a * np.eye(2)
                closed[2:, 2:] = s.var_b * np.eye(2)
                closed[:2, 2:] = closed[2:, :2] = s.cov * np.eye(2)
                worst_rec = max(worst_rec, float(np.max(np.abs(rec - closed))))
    report(3, worst_b <= 1e-10 and worst_rec <= 1e-10,
           f"Bob variance err {worst_b:.2e}, record covariance err {worst_rec:.2e}")


def _standard_dr_rate(va, T, xi, beta=1.0):
    """Textbook Gaussian bound for the unselected protocol, built independently."""
    v = va + 1.0
    vb = T * (v - 1.0) + 1.0 + xi
    c = math.sqrt(T * (v * v - 1.0))
    a_ = v * v
    b_ = vb * vb
    d = (v * vb - c * c) ** 2
    delta = a_ + b_ - 2.0 * c * c
    root = math.sqrt(max(delta * delta - 4.0 * d, 0.0))
    nus = [math.sqrt((delta + root) / 2.0), math.sqrt(max((delta - root) / 2.0, 1.0))]
    vb_a = vb - c * c / (v + 1.0)
    chi = sum(entropy_g(nu) for nu in nus) - entropy_g(vb_a)
    # sign-bit information: records (a, b) have correlation sqrt(T va / 2) / sqrt(va vb_rec)
    rho = math.sqrt(T / 2.0) * va / math.sqrt(va * (T * va / 2.0 + 1.0 + xi / 2.0))
    p_e = 0.5 - math.asin(rho) / math.pi
    return beta * 2.0 * mutual_information_sign(p_e) - chi


def test_criterion_4_no_postselection(report):
    start = time.perf_counter()
    worst_e = worst_k = 0.0
    for va in GRID_VA:
        for T in GRID_T:
            for xi in GRID_XI:
                p, ch = ProtocolParams(va), ChannelParams(T, xi)
                st = postselected_stats(record_covariance(p, ch), PostSelectionRegion())
                e = effective_params(st.V_a, st.V_b, st.C)
                # delta is input-referred; eta * delta is the channel's output noise
                worst_e = max(worst_e, abs(e.V_alpha - va), abs(e.eta - T),
                              abs(e.eta * e.delta - xi))
                k = keyrate(p, ch, PostSelectionRegion()).key_rate
                worst_k = max(worst_k, abs(k - _standard_dr_rate(va, T, xi)))
    elapsed = time.perf_counter() - start
    report(4, worst_e <= 1e-9 and worst_k <= 1e-9 and elapsed < 1.0,
           f"(V_alpha, eta, eta*delta) err {worst_e:.2e}, keyrate vs standard bound "
           f"{worst_k:.2e}, {elapsed:.2f} s")


def test_criterion_5_oracle(report):
    start = time.perf_counter()
    p, ch = ProtocolParams(4.0), ChannelParams(0.5, 0.01)
    region = PostSelectionRegion(1.0, INF, 0.8, INF)
    analytic = postselected_stats(record_covariance(p, ch), region)
    mc = simulate_pm(p, ch, region, McConfig(sample_count=1_000_000, seed=2024))
    check = verify(analytic, mc, z_max=4.0)
    elapsed = time.perf_counter() - start
    zs = ", ".join(f"{k} {v:+.2f}" for k, v in check.z_scores.items())
    report(5, check.passed and elapsed < 10.0, f"z: {zs}; {elapsed:.2f} s")


class GammaLog:
    """Records the smallest symplectic eigenvalue and Holevo value seen."""

    def __init__(self):
        self.nu_min = INF
        self.chi_min = INF
        self.count = 0

    def wrap_build(self, fn):
        def inner(e):
            g = fn(e)
            self.count += 1
            self.nu_min = min(self.nu_min, float(symplectic_eigenvalues(g)[-1]))
            return g
        return inner

    def wrap_holevo(self, fn):
        def inner(g):
            chi = fn(g)
            self.chi_min = min(self.chi_min, chi)
            return chi
        return inner


@pytest.fixture(scope="module")
def gamma_log():
    log = GammaLog()
    mp = pytest.MonkeyPatch()
    for mod in (keyrate_mod, optimize_mod):
        mp.setattr(mod, "build_gamma_ab", log.wrap_build(mod.build_gamma_ab))
        mp.setattr(mod, "holevo_dr", log.wrap_holevo(mod.holevo_dr))
    yield log
    mp.undo()


@pytest.fixture(scope="module")
def three_db(gamma_log):
    ch = ChannelParams(0.25, 0.0)
    no_ps = [keyrate(ProtocolParams(float(v)), ch, PostSelectionRegion()).key_rate
             for v in np.geomspace(0.01, 100.0, 400)]
    best = minimize_scalar(
        lambda x: -keyrate(ProtocolParams(math.exp(x)), ch, PostSelectionRegion()).key_rate,
        bounds=(math.log(0.01), math.log(100.0)), method="bounded")
    start = time.perf_counter()
    res = optimize_thresholds(ProtocolParams(4.0), ch, OptimizationSpec(optimize_va=True))
    return max(max(no_ps), -best.fun), res, time.perf_counter() - start


@pytest.fixture(scope="module")
def noise_sweep(gamma_log):
    rows = sweep(ProtocolParams(4.0), [0.0, 0.01, 0.05], [0.3, 0.5, 0.7, 0.9],
                 OptimizationSpec(optimize_va=True))
    return {(r.xi, r.T): r for r in rows}


def test_criterion_6_three_db(three_db, report):
    no_ps, res, elapsed = three_db
    k = res.report.key_rate
    report(6, no_ps < 0 and k > 0 and elapsed < 60.0,
           f"best K without post-selection {no_ps:.4g}, optimized K {k:.4g} "
           f"(V_A {res.protocol.V_A:.3g}), {elapsed:.1f} s")


def test_criterion_7_noise_ordering(noise_sweep, report):
    ok = all(r.status == "ok" for r in noise_sweep.values())
    lines = []
    for T in (0.3, 0.5, 0.7, 0.9):
        k = [noise_sweep[(xi, T)].report.key_rate for xi in (0.0, 0.01, 0.05)]
        ok = ok and k[0] > k[1] > k[2]
        lines.append(f"T={T}: " + " > ".join(f"{v:.5f}" for v in k))
    ratio = (noise_sweep[(0.01, 0.9)].report.key_rate
             / noise_sweep[(0.0, 0.9)].report.key_rate)
    report(7, ok and ratio >= 0.5, "; ".join(lines) + f"; K(0.01)/K(0) at T=0.9 = {ratio:.3f}")


def test_criterion_8_physicality(three_db, noise_sweep, gamma_log, report):
    margins = [three_db[1].report.physicality_margin] + [
        r.report.physicality_margin for r in noise_sweep.values()]
    ok = (gamma_log.count > 0 and gamma_log.nu_min >= 1 - 1e-9
          and gamma_log.chi_min >= -1e-9 and min(margins) >= -1e-9)
    report(8, ok, f"{gamma_log.count} states, min nu {gamma_log.nu_min:.12f}, "
                  f"min chi {gamma_log.chi_min:.3g}")


def test_criterion_9_reproducible(tmp_path, capsys, report):
    argv = ["sweep", "--xi", "0,0.01", "--t-list", "0.4,0.7,1", "--optimize",
            "--resolution", "4", "--max-evals", "400", "--n-starts", "2"]
    blobs = []
    for i, jobs in enumerate(("8", "8", "1")):
        path = tmp_path / f"run{i}.csv"
        assert cli.main(argv + ["--jobs", jobs, "-o", str(path)]) == 0
        blobs.append(path.read_bytes())
    capsys.readouterr()
    same = blobs[0] == blobs[1] == blobs[2]
    report(9, same, f"3 runs (jobs 8, 8, 1), {len(blobs[0])} bytes each, "
                    f"{'identical' if same else 'differ'}")
