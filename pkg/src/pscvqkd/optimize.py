"""Maximise the key rate over post-selection thresholds.

Thresholds are searched in units of the standard deviation of the quantity
they cut (Alice's amplitude, Bob's raw record), which keeps one seed grid
meaningful across modulation variances and channels. Upper thresholds are
parameterised by the band width ``U - L``; an infinite width means no upper
cut.

Search: evaluate a coarse grid (infinite widths first, then finite bands),
then run Nelder-Mead from the best few distinct seeds, twice: once over all
coordinates, and once restricted to regions whose kept records look like a
lossless, noiseless channel (see :class:`_CornerObjective`), where the best
rates concentrate. Only physical points can be returned. Everything is deterministic for a given :class:`OptimizationSpec`.
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, root

from .channel import ChannelParams, ProtocolParams, record_covariance
from .errors import OptimizationError, UnphysicalStateError
from .keyrate import holevo_dr, keyrate, mutual_information_sign
from .postselection import (EffectiveParams, PostSelectionRegion, build_gamma_ab, effective_params,
                            noise_floor, postselected_stats)

log = logging.getLogger(__name__)

INF = math.inf
# band widths (in standard deviations) are kept inside [MIN_WIDTH, e^5]
MIN_WIDTH = 1e-3
# penalty per unit of effective noise below the physical floor, in bits
EXTERIOR_SLOPE = 50.0
# local refinement restarts with the simplex scaled by this factor until it stalls
RESTART_SHRINK = 0.3
MIN_RESTART_SCALE = 0.01
# fallback starting points (lower thresholds in standard deviations) for the
# lossless-corner solve
CORNER_GUESSES = [np.array([0.5, 0.5]), np.array([0.25, 1.0]), np.array([1.0, 0.25])]


@dataclass(frozen=True)
class OptimizationSpec:
    """Search settings. Threshold bounds and widths are in standard deviations."""

    la_bounds: tuple = (0.0, 3.5)
    lb_bounds: tuple = (0.0, 3.5)
    widths: tuple = (INF, 2.0, 1.0, 0.5, 0.25)
    resolution: int = 8
    optimize_va: bool = False
    va_bounds: tuple = (0.05, 50.0)
    va_resolution: int = 8
    tol: float = 1e-8
    max_evals: int = 2000
    n_starts: int = 4

    def __post_init__(self):
        for name in ("la_bounds", "lb_bounds", "va_bounds"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must be ordered, got {(lo, hi)}")
        if self.la_bounds[0] < 0.0 or self.lb_bounds[0] < 0.0:
            raise ValueError("threshold bounds must be nonnegative")
        if self.va_bounds[0] <= 0.0:
            raise ValueError("modulation variance bounds must be positive")
        if self.resolution < 2 or self.va_resolution < 2:
            raise ValueError("grid resolution must be >= 2 per axis")
        if not self.tol > 0.0:
            raise ValueError("tolerance must be positive")
        if not self.widths or any(not w > 0.0 for w in self.widths):
            raise ValueError("band widths must be positive")
        if self.max_evals < 1 or self.n_starts < 1:
            raise ValueError("max_evals and n_starts must be >= 1")


@dataclass(frozen=True)
class Candidate:
    """A point of the search space in standard-deviation units."""

    V_A: float
    la: float
    lb: float
    wa: float = INF
    wb: float = INF

    def region(self, T, xi):
        sa = math.sqrt(self.V_A)
        sb = math.sqrt(T * self.V_A / 2.0 + 1.0 + xi / 2.0)
        la, lb = float(self.la * sa), float(self.lb * sb)
        return PostSelectionRegion(la, la + float(self.wa * sa), lb, lb + float(self.wb * sb))

    @classmethod
    def from_region(cls, V_A, region, T, xi):
        sa = math.sqrt(V_A)
        sb = math.sqrt(T * V_A / 2.0 + 1.0 + xi / 2.0)
        return cls(V_A, region.L_A / sa, region.L_B / sb,
                   (region.U_A - region.L_A) / sa, (region.U_B - region.L_B) / sb)


@dataclass
class OptimizationResult:
    region: PostSelectionRegion
    report: object
    protocol: ProtocolParams
    best_seed_rate: float
    n_evals: int = 0
    seeds: list = field(default_factory=list, repr=False)


def _evaluate(args):
    """Search score and key rate for one candidate.

    Physical points score their key rate. Points whose effective state falls
    below the noise floor score the rate of the state lifted onto the floor,
    minus ``EXTERIOR_SLOPE`` times the shortfall, and have no rate: the
    optimum usually sits on that boundary and the simplex needs to see it from
    both sides. Points that cannot be evaluated at all give ``(None, None)``.
    """
    V_A, beta, T, xi, la, ua, lb, ub = args
    try:
        p, ch = ProtocolParams(V_A, beta), ChannelParams(T, xi)
        region = PostSelectionRegion(la, ua, lb, ub)
        try:
            r = keyrate(p, ch, region)
        except UnphysicalStateError as exc:
            if exc.params is None:
                return None, None
            e = exc.params
        else:
            return (r.key_rate, r.key_rate) if math.isfinite(r.key_rate) else (None, None)
        stats = postselected_stats(record_covariance(p, ch), region)
        floor = noise_floor(e.eta)
        chi = 0.0 if ch.eve_absent else holevo_dr(
            build_gamma_ab(EffectiveParams(e.V_alpha, e.eta, floor)))
        info = beta * 2.0 * mutual_information_sign(min(stats.p_e, 0.5))
        score = stats.P_ps * (info - chi) - EXTERIOR_SLOPE * (floor - e.delta)
        return (score, None) if math.isfinite(score) else (None, None)
    except (ValueError, ArithmeticError):
        return None, None


def _args(c, beta, ch):
    reg = c.region(ch.T, ch.xi)
    return (c.V_A, beta, ch.T, ch.xi, reg.L_A, reg.U_A, reg.L_B, reg.U_B)


def _seed_grid(p, spec):
    if spec.optimize_va:
        vas = np.geomspace(spec.va_bounds[0], spec.va_bounds[1], spec.va_resolution)
    else:
        vas = [p.V_A]
    las = np.linspace(spec.la_bounds[0], spec.la_bounds[1], spec.resolution)
    lbs = np.linspace(spec.lb_bounds[0], spec.lb_bounds[1], spec.resolution)
    widths = [w for w in spec.widths if math.isinf(w)] + sorted(
        (w for w in spec.widths if not math.isinf(w)), reverse=True)
    out = []
    for wa, wb in itertools.product(widths, widths):
        for va, la, lb in itertools.product(vas, las, lbs):
            out.append(Candidate(float(va), float(la), float(lb), wa, wb))
    return out


class _Objective:
    """Negative search score over an unconstrained vector, decoded into a Candidate.

    Remembers the best physical candidate it has seen.
    """

    def __init__(self, template, p, ch, spec):
        self.template = template
        self.p = p
        self.ch = ch
        self.spec = spec
        self.finite_a = not math.isinf(template.wa)
        self.finite_b = not math.isinf(template.wb)
        self.n_evals = 0
        self.best_rate = -INF
        self.best = None

    def encode(self, c):
        x = [c.la, c.lb]
        if self.spec.optimize_va:
            x.append(math.log(c.V_A))
        if self.finite_a:
            x.append(math.log(c.wa))
        if self.finite_b:
            x.append(math.log(c.wb))
        return np.array(x)

    def steps(self):
        return np.array([0.25, 0.25] + [0.3] * (self.spec.optimize_va + self.finite_a
                                                  + self.finite_b))

    def decode(self, x):
        spec = self.spec
        la = min(abs(x[0]), spec.la_bounds[1])
        lb = min(abs(x[1]), spec.lb_bounds[1])
        la = max(la, spec.la_bounds[0])
        lb = max(lb, spec.lb_bounds[0])
        k = 2
        va = self.p.V_A
        if spec.optimize_va:
            lo, hi = math.log(spec.va_bounds[0]), math.log(spec.va_bounds[1])
            va = math.exp(min(max(x[k], lo), hi))
            k += 1
        wa = wb = INF
        if self.finite_a:
            wa = math.exp(min(max(x[k], math.log(MIN_WIDTH)), 5.0))
            k += 1
        if self.finite_b:
            wb = math.exp(min(max(x[k], math.log(MIN_WIDTH)), 5.0))
        return Candidate(va, la, lb, wa, wb)

    def __call__(self, x):
        self.n_evals += 1
        c = self.decode(x)
        try:
            args = _args(c, self.p.beta, self.ch)
        except ValueError:
            return INF
        score, rate = _evaluate(args)
        if rate is not None and rate > self.best_rate:
            self.best_rate, self.best = rate, c
        return INF if score is None else -score


def _refine(seed, p, ch, spec):
    """Nelder-Mead from ``seed``, restarted with a shrinking simplex until it stalls."""
    obj = _Objective(seed, p, ch, spec)
    x = obj.encode(seed)
    f = obj(x)
    scale = 1.0
    while scale >= MIN_RESTART_SCALE and obj.n_evals < spec.max_evals:
        simplex = np.vstack([x] + [x + np.eye(len(x))[i] * s * scale
                                   for i, s in enumerate(obj.steps())])
        res = minimize(obj, x, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": 1e-9, "fatol": spec.tol,
                                "maxfev": spec.max_evals - obj.n_evals, "adaptive": True})
        if res.fun < f - spec.tol:
            x, f = res.x, res.fun
        else:
            scale *= RESTART_SHRINK
    return obj.best, obj.best_rate, obj.n_evals


class _CornerObjective:
    """Search restricted to regions whose effective channel is lossless and noiseless.

    Post-selection can make the kept records look like those of a perfect
    channel (``eta = 1``, ``delta = 0``), where the Holevo term vanishes; the
    best rates lie on that set. Its free coordinates are the modulation
    variance (if optimised) and the finite band widths; the two lower
    thresholds are solved for at every evaluation.
    """

    def __init__(self, template, p, ch, spec):
        self.template = template
        self.p = p
        self.ch = ch
        self.spec = spec
        self.finite_a = not math.isinf(template.wa)
        self.finite_b = not math.isinf(template.wb)
        self.guess = np.array([template.la, template.lb])
        self.n_evals = 0
        self.best_rate = -INF
        self.best = None

    def encode(self, c):
        x = []
        if self.spec.optimize_va:
            x.append(math.log(c.V_A))
        if self.finite_a:
            x.append(math.log(c.wa))
        if self.finite_b:
            x.append(math.log(c.wb))
        return np.array(x)

    def _decode(self, x):
        k = 0
        va, wa, wb = self.p.V_A, INF, INF
        if self.spec.optimize_va:
            lo, hi = math.log(self.spec.va_bounds[0]), math.log(self.spec.va_bounds[1])
            va = math.exp(min(max(x[k], lo), hi))
            k += 1
        if self.finite_a:
            wa = math.exp(min(max(x[k], math.log(MIN_WIDTH)), 5.0))
            k += 1
        if self.finite_b:
            wb = math.exp(min(max(x[k], math.log(MIN_WIDTH)), 5.0))
        return va, wa, wb

    def _defect(self, va, wa, wb, z):
        self.n_evals += 1
        c = Candidate(va, abs(z[0]), abs(z[1]), wa, wb)
        try:
            reg = c.region(self.ch.T, self.ch.xi)
            st = postselected_stats(record_covariance(ProtocolParams(va, self.p.beta), self.ch),
                                    reg)
            e = effective_params(st.V_a, st.V_b, st.C)
        except (ValueError, ArithmeticError):
            return [1e3, 1e3]
        return [e.eta - 1.0, e.delta]

    def _solve(self, va, wa, wb):
        for guess in [self.guess] + CORNER_GUESSES:
            sol = root(lambda z: self._defect(va, wa, wb, z), guess, method="hybr",
                       options={"xtol": 1e-13})
            if sol.success:
                return sol.x
        return None

    def __call__(self, x):
        va, wa, wb = self._decode(x)
        z = self._solve(va, wa, wb)
        if z is None:
            return INF
        c = Candidate(va, abs(z[0]), abs(z[1]), wa, wb)
        if c.la > self.spec.la_bounds[1] or c.lb > self.spec.lb_bounds[1]:
            return INF
        c = Candidate(va, max(c.la, self.spec.la_bounds[0]), max(c.lb, self.spec.lb_bounds[0]),
                      wa, wb)
        self.n_evals += 1
        _, rate = _evaluate(_args(c, self.p.beta, self.ch))
        if rate is None:
            return INF
        self.guess = np.array([c.la, c.lb])
        if rate > self.best_rate:
            self.best_rate, self.best = rate, c
        return -rate


def _refine_corner(seed, p, ch, spec):
    obj = _CornerObjective(seed, p, ch, spec)
    x0 = obj.encode(seed)
    if len(x0) == 0:
        obj(x0)
    else:
        simplex = np.vstack([x0] + [x0 + np.eye(len(x0))[i] * 0.3 for i in range(len(x0))])
        minimize(obj, x0, method="Nelder-Mead",
                 options={"initial_simplex": simplex, "xatol": 1e-8, "fatol": spec.tol,
                          "maxfev": spec.max_evals})
    return obj.best, obj.best_rate, obj.n_evals


def optimize_thresholds(p, ch, spec=None, extra_seeds=(), mapper=map):
    """Best post-selection region (and optionally V_A) for one channel.

    ``extra_seeds`` are candidate regions (e.g. a neighbouring optimum) given
    as ``(V_A, PostSelectionRegion)`` pairs; ``mapper`` evaluates the seed
    grid and may be a process pool's ``map``. The returned region always
    yields a physical effective state.
    """
    spec = spec or OptimizationSpec()
    seeds = [Candidate(p.V_A, 0.0, 0.0)]
    for va, reg in extra_seeds:
        if spec.optimize_va or va == p.V_A:
            seeds.append(Candidate.from_region(va, reg, ch.T, ch.xi))
    seeds.extend(_seed_grid(p, spec))
    results = list(mapper(_evaluate, [_args(c, p.beta, ch) for c in seeds]))
    n_evals = len(seeds)
    feasible = [(r, i) for i, (_, r) in enumerate(results) if r is not None]
    if not feasible:
        raise OptimizationError(
            f"no feasible post-selection region at T={ch.T}, xi={ch.xi}")
    best_seed_rate, best_i = max(feasible, key=lambda t: (t[0], -t[1]))
    best_c, best_rate = seeds[best_i], best_seed_rate

    # distinct starting points by score: skip seeds sharing (V_A, widths) and
    # close thresholds
    scored = sorted(((s, i) for i, (s, _) in enumerate(results) if s is not None),
                    key=lambda t: (-t[0], t[1]))
    starts = []
    for _, i in scored:
        c = seeds[i]
        if any(s.V_A == c.V_A and s.wa == c.wa and s.wb == c.wb
               and abs(s.la - c.la) + abs(s.lb - c.lb) < 0.75 for s in starts):
            continue
        starts.append(c)
        if len(starts) >= spec.n_starts:
            break
    # the corner search needs a finite band on Alice's side to have room;
    # start it from the best seed of every width class
    corner_starts = []
    for fa, fb in ((True, False), (True, True), (False, False), (False, True)):
        for _, i in scored:
            c = seeds[i]
            if math.isinf(c.wa) != fa and math.isinf(c.wb) != fb:
                corner_starts.append(c)
                break
    with np.errstate(invalid="ignore"):
        for refine, group in ((_refine, starts), (_refine_corner, corner_starts)):
            for c in group:
                refined, rate, n = refine(c, p, ch, spec)
                n_evals += n
                if refined is not None and rate > best_rate:
                    best_c, best_rate = refined, rate
    region = best_c.region(ch.T, ch.xi)
    best_p = ProtocolParams(best_c.V_A, p.beta)
    report = keyrate(best_p, ch, region)
    log.debug("T=%g xi=%g: K=%.6g after %d evaluations", ch.T, ch.xi, report.key_rate, n_evals)
    return OptimizationResult(region, report, best_p, best_seed_rate, n_evals, seeds)


@dataclass
class SweepRow:
    T: float
    xi: float
    V_A: float
    beta: float
    region: PostSelectionRegion = None
    report: object = None
    status: str = "ok"


def sweep(p, xi_list, t_grid, spec=None, optimize=True, region=None, jobs=1):
    """Key rate over a grid of channels, one row per (xi, T) in input order.

    With ``optimize`` each point is optimised, warm-started from the optimum
    at the previous transmission for the same noise and from the optimum of
    the next-noisier channel at the same transmission (noise levels are
    processed from noisiest to cleanest). Without it the fixed ``region`` is
    evaluated everywhere. Failures are recorded in ``status``.
    """
    xi_list = [float(x) for x in xi_list]
    t_grid = [float(t) for t in t_grid]
    if not xi_list or not t_grid:
        raise ValueError("sweep needs at least one noise level and one transmission")
    region = region or PostSelectionRegion()
    spec = spec or OptimizationSpec()
    rows = {}
    pool = ProcessPoolExecutor(jobs) if jobs > 1 and optimize else None
    mapper = (lambda f, xs: pool.map(f, xs, chunksize=64)) if pool else map
    try:
        prev = {}
        for T in sorted(set(t_grid)):
            noisier = []
            for xi in sorted(set(xi_list), reverse=True):
                row = SweepRow(T, xi, p.V_A, p.beta)
                try:
                    ch = ChannelParams(T, xi)
                    if optimize:
                        seeds = list(noisier)
                        if xi in prev:
                            seeds.append(prev[xi])
                        res = optimize_thresholds(p, ch, spec, seeds, mapper)
                        row.region, row.report, row.V_A = res.region, res.report, res.protocol.V_A
                        prev[xi] = (res.protocol.V_A, res.region)
                        noisier.append((res.protocol.V_A, res.region))
                    else:
                        row.region = region
                        row.report = keyrate(p, ch, region)
                except (ValueError, ArithmeticError, OptimizationError) as exc:
                    row.status = f"error: {type(exc).__name__}: {exc}"
                rows[(xi, T)] = row
    finally:
        if pool is not None:
            pool.shutdown()
    return [rows[(xi, T)] for xi in xi_list for T in t_grid]
