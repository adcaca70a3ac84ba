"""Monte Carlo check of the kept-ensemble statistics.

Samples the prepare-and-measure protocol directly: Gaussian amplitudes for
Alice, Gaussian heterodyne records for Bob, the symbol-level post-selection,
and optionally the random-rotation symmetrisation. Deliberately shares
nothing with the quadrature code in :mod:`pscvqkd.postselection`.

Every batch draws from its own PCG64 stream keyed by ``(seed, batch index)``
and batch sums are merged with :func:`math.fsum`, so results do not depend on
how batches are scheduled.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

STAT_NAMES = ("P_ps", "V_a", "V_b", "C", "p_e")


@dataclass(frozen=True)
class McConfig:
    sample_count: int = 1_000_000
    seed: int = 0
    batch_size: int = 250_000
    jobs: int = 1
    symmetrise: bool = False

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class McReport:
    """Empirical statistics with standard errors (``inf`` when nothing was kept)."""

    n_samples: int
    n_kept: int
    estimates: dict
    std_errors: dict
    status: str = "ok"


@dataclass(frozen=True)
class VerificationReport:
    passed: bool
    z_scores: dict
    z_max: float
    status: str = "ok"

    def lines(self):
        out = []
        for name, z in self.z_scores.items():
            verdict = "PASS" if abs(z) <= self.z_max else "FAIL"
            out.append(f"{name:6s} z={z:+.3f} {verdict}")
        return out


def batch_rng(seed, index):
    """Independent generator for batch ``index`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def sample_records(p, ch, n, rng):
    """Draw ``n`` symbols; columns are ``(x_amp, p_amp, b_x, b_p)``.

    Bob's record for each quadrature is ``sqrt(T/2)`` times the amplitude plus
    Gaussian noise of variance ``(2 + xi) / 2`` (channel noise and the vacuum
    let in by the heterodyne beamsplitter).
    """
    amp = rng.normal(0.0, math.sqrt(p.V_A), size=(n, 2))
    noise = rng.normal(0.0, math.sqrt((2.0 + ch.xi) / 2.0), size=(n, 2))
    return np.hstack([amp, math.sqrt(ch.T / 2.0) * amp + noise])


def symmetrise(records, seed=None, angles=None):
    """Rotate each symbol's amplitude pair and record pair by a shared random angle.

    ``angles`` overrides the random draw (one angle per symbol).
    """
    records = np.asarray(records, dtype=float)
    if records.ndim != 2 or records.shape[1] != 4 or len(records) == 0:
        raise ValueError("records must be a non-empty (n, 4) array")
    if angles is None:
        angles = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi, len(records))
    c, s = np.cos(angles), np.sin(angles)
    out = np.empty_like(records)
    for i in (0, 2):
        x, y = records[:, i], records[:, i + 1]
        out[:, i] = c * x - s * y
        out[:, i + 1] = s * x + c * y
    return out


def _in_band(v, lo, hi):
    m = np.abs(v)
    return (m >= lo) & (m <= hi)


def keep_mask(records, region):
    """Symbol-level AND rule over all four magnitudes."""
    return (_in_band(records[:, 0], region.L_A, region.U_A)
            & _in_band(records[:, 1], region.L_A, region.U_A)
            & _in_band(records[:, 2], region.L_B, region.U_B)
            & _in_band(records[:, 3], region.L_B, region.U_B))


def _batch_sums(p, ch, region, cfg, index, n):
    rng = batch_rng(cfg.seed, index)
    rec = sample_records(p, ch, n, rng)
    if cfg.symmetrise:
        rec = symmetrise(rec, angles=rng.uniform(0.0, 2.0 * math.pi, n))
    kept = rec[keep_mask(rec, region)]
    # x and p pairs are pooled: two quadrature samples per kept symbol
    a = kept[:, :2].ravel()
    b = kept[:, 2:].ravel()
    aa, bb, ab = a * a, b * b, a * b
    err = (np.sign(a) != np.sign(b)).astype(float)
    return {
        "n": n, "kept": len(kept),
        "aa": aa.sum(), "aa2": (aa * aa).sum(),
        "bb": bb.sum(), "bb2": (bb * bb).sum(),
        "ab": ab.sum(), "ab2": (ab * ab).sum(),
        "err": err.sum(),
        # cross-quadrature covariance of Alice's amplitudes, for isotropy checks
        "xp": (kept[:, 0] * kept[:, 1]).sum(), "xp2": ((kept[:, 0] * kept[:, 1]) ** 2).sum(),
    }


def _mean_se(total, total_sq, n):
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n) if n > 1 else math.inf


def simulate_pm(p, ch, region, cfg=None):
    """Estimate P_ps, V_a, V_b, C and p_e by direct sampling."""
    cfg = cfg or McConfig()
    sizes = [cfg.batch_size] * (cfg.sample_count // cfg.batch_size)
    if cfg.sample_count % cfg.batch_size:
        sizes.append(cfg.sample_count % cfg.batch_size)
    jobs = [(i, n) for i, n in enumerate(sizes)]
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as ex:
            parts = list(ex.map(lambda a: _batch_sums(p, ch, region, cfg, *a), jobs))
    else:
        parts = [_batch_sums(p, ch, region, cfg, *a) for a in jobs]
    tot = {k: math.fsum(part[k] for part in parts) for k in parts[0]}
    n, kept = int(tot["n"]), int(tot["kept"])
    p_ps = kept / n
    est = {"P_ps": p_ps}
    se = {"P_ps": math.sqrt(max(p_ps * (1.0 - p_ps), 1.0 / n) / n)}
    if kept == 0:
        for name in STAT_NAMES[1:] + ("xp",):
            est[name] = math.nan
            se[name] = math.inf
        return McReport(n, 0, est, se, status="no data: no symbol passed post-selection")
    m = 2 * kept
    for name, key in (("V_a", "aa"), ("V_b", "bb"), ("C", "ab")):
        est[name], se[name] = _mean_se(tot[key], tot[key + "2"], m)
    pe = tot["err"] / m
    est["p_e"] = pe
    se["p_e"] = math.sqrt(max(pe * (1.0 - pe), 1.0 / m) / m)
    est["xp"], se["xp"] = _mean_se(tot["xp"], tot["xp2"], kept)
    return McReport(n, kept, est, se)


def verify(analytic, empirical, z_max=4.0):
    """Compare analytic :class:`PostSelectedStats` against a :class:`McReport`."""
    if empirical.n_kept == 0:
        return VerificationReport(False, {}, z_max, status="no data")
    z = {}
    for name in STAT_NAMES:
        se = empirical.std_errors[name]
        z[name] = (empirical.estimates[name] - getattr(analytic, name)) / se
    passed = all(math.isfinite(v) and abs(v) <= z_max for v in z.values())
    return VerificationReport(passed, z, z_max)
