"""Trial engines for outage and rate estimation, plus relay baselines.

Trials are partitioned into fixed blocks of 4096; every block owns a
counter-based RNG stream keyed by (master seed, engine tag, block index) and
reduces with exact compensated summation.  Results are therefore identical
for any worker count: workers only decide who computes which block.

Two model-level gain conventions coexist on purpose:

* outage  - thresholds the co-phased amplitude sum itself, which is the
  variable the tail-model outage analysis actually describes (its squared
  counterpart would shift the diversity slope by 2x and never agree with the
  closed form);
* rate    - squares the per-branch sums into the combining gain, matching
  the Gamma-approximation rate analysis (a lower bound by construction).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .beamforming import RankDeficiencyError, link_snr, solve_beamforming
from .geometry import NetworkConfig, draw_channel, sample_user_distance, stream

__all__ = [
    "BLOCK",
    "TrialPlan",
    "Estimate",
    "RelayConfig",
    "simulate_op",
    "simulate_ergodic_rate",
    "af_relay_rate",
    "df_relay_rate",
    "optimal_power_split",
    "empirical_diversity_slope",
]

BLOCK = 4096

_TAG_OP_MODEL = 11
_TAG_RATE_MODEL = 12
_TAG_LINK = 13
_TAG_RELAY = 14


@dataclass(frozen=True)
class TrialPlan:
    trials: int
    master_seed: int
    fidelity: str = "model_level"     # model_level | link_level
    metric: str = "outage"            # outage | ergodic_rate

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.fidelity not in ("model_level", "link_level"):
            raise ValueError(f"unknown fidelity {self.fidelity!r}")
        if self.metric not in ("outage", "ergodic_rate"):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    trials_used: int
    degenerate_draws: int = 0


def _block_ranges(trials: int):
    return [(bi, bi * BLOCK, min((bi + 1) * BLOCK, trials))
            for bi in range((trials + BLOCK - 1) // BLOCK)]


def _reduce_blocks(parts, trials: int, binary: bool) -> Estimate:
    """Combine per-block (sum, sumsq, degenerate) aggregates."""
    total = math.fsum(p[0] for p in parts)
    deg = sum(p[2] for p in parts)
    mean = total / trials
    if binary:
        se = math.sqrt(max(mean * (1.0 - mean), 0.0) / trials)
    else:
        sumsq = math.fsum(p[1] for p in parts)
        var = max(sumsq - trials * mean * mean, 0.0) / max(trials - 1, 1)
        se = math.sqrt(var / trials)
    return Estimate(mean=mean, std_error=se, trials_used=trials, degenerate_draws=deg)


def _run_blocks(fn, trials: int, n_workers: int):
    ranges = _block_ranges(trials)
    if n_workers <= 1:
        return [fn(r) for r in ranges]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, ranges, chunksize=max(1, len(ranges) // (4 * n_workers))))


# ---------------------------------------------------------------------------
# Model-level engines (vectorized per block)
# ---------------------------------------------------------------------------

def _model_draws(gen, cfg: NetworkConfig, nb: int, rows: int):
    """Fixed draw order: distances, BS-side powers, user-side powers."""
    r = sample_user_distance(gen, cfg.R, cfg.r0, nb)
    h = np.sqrt(gen.gamma(cfg.t1, 1.0 / cfg.t1, (nb, cfg.N)))
    g = np.sqrt(gen.gamma(cfg.t2, 1.0 / cfg.t2, (nb, rows, cfg.N)))
    return r, h, g


def _op_model_block(plan, cfg, blk):
    bi, lo, hi = blk
    gen = stream(plan.master_seed, _TAG_OP_MODEL, bi)
    nb = hi - lo
    r, h, g = _model_draws(gen, cfg, nb, 1)
    s = (g[:, 0, :] * h).sum(axis=1)
    pl = cfg.ref_atten_lin * (cfg.d1 * r) ** (-cfg.alpha)
    snr = s * pl * cfg.p_b / (cfg.Q * cfg.sigma2)
    out = np.log2(1.0 + snr) < cfg.R_m
    return float(out.sum()), 0.0, 0


def _rate_model_block(plan, cfg, blk):
    bi, lo, hi = blk
    gen = stream(plan.master_seed, _TAG_RATE_MODEL, bi)
    nb = hi - lo
    r, h, g = _model_draws(gen, cfg, nb, cfg.Q)
    s = (g * h[:, np.newaxis, :]).sum(axis=2)          # nb x Q branch sums
    gain = (s ** 2).sum(axis=1)
    pl = cfg.ref_atten_lin * (cfg.d1 * r) ** (-cfg.alpha)
    snr = gain * pl * cfg.p_b / (cfg.Q * cfg.sigma2)
    vals = np.log2(1.0 + snr)
    return math.fsum(vals), math.fsum(vals * vals), 0


# ---------------------------------------------------------------------------
# Link-level engine (full pipeline per trial)
# ---------------------------------------------------------------------------

def _link_trial(gen, cfg: NetworkConfig, user: int):
    deg = 0
    while True:
        real = draw_channel(gen, cfg)
        try:
            sol = solve_beamforming(real, cfg)
            break
        except RankDeficiencyError:
            deg += 1
            if deg > 64:
                raise
    return link_snr(real, sol, cfg, user), deg


def _link_block(plan, cfg, user, outage, blk):
    bi, lo, hi = blk
    vals = np.empty(hi - lo)
    deg = 0
    for i, t in enumerate(range(lo, hi)):
        gen = stream(plan.master_seed, _TAG_LINK, t)
        snr, d = _link_trial(gen, cfg, user)
        deg += d
        vals[i] = math.log2(1.0 + snr)
    if outage:
        return float((vals < cfg.R_m).sum()), 0.0, deg
    return math.fsum(vals), math.fsum(vals * vals), deg


def simulate_op(plan: TrialPlan, cfg: NetworkConfig, n_workers: int = 1,
                user: int = 0) -> Estimate:
    """Outage probability estimate at the plan's fidelity."""
    if plan.fidelity == "link_level":
        if not cfg.solvable:
            raise ValueError(f"link level needs N >= M*K, got N={cfg.N} M*K={cfg.M * cfg.K}")
        fn = partial(_link_block, plan, cfg, user, True)
    else:
        fn = partial(_op_model_block, plan, cfg)
    return _reduce_blocks(_run_blocks(fn, plan.trials, n_workers), plan.trials, binary=True)


def simulate_ergodic_rate(plan: TrialPlan, cfg: NetworkConfig, n_workers: int = 1,
                          user: int = 0) -> Estimate:
    """Ergodic rate estimate: mean of log2(1 + SNR) with its standard error."""
    if plan.fidelity == "link_level":
        if not cfg.solvable:
            raise ValueError(f"link level needs N >= M*K, got N={cfg.N} M*K={cfg.M * cfg.K}")
        fn = partial(_link_block, plan, cfg, user, False)
    else:
        fn = partial(_rate_model_block, plan, cfg)
    return _reduce_blocks(_run_blocks(fn, plan.trials, n_workers), plan.trials, binary=False)


# ---------------------------------------------------------------------------
# Half-duplex relay baselines
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelayConfig:
    """Two-hop single-antenna relay scenario sharing the disc geometry.

    Each hop is a separate link, so the reference attenuation applies per
    hop (the reflected cascade pays it once on the product distance).
    """

    t1: float = 3.0
    t2: float = 1.0
    d1: float = 25.0
    R: float = 100.0
    r0: float = 1.0
    alpha: float = 3.0
    p_tot: float = 1.0
    sigma2: float = 3.9810717055349695e-13
    ref_atten_db: float = -30.0

    @property
    def ref_atten_lin(self) -> float:
        return 10.0 ** (self.ref_atten_db / 10.0)


def _relay_draws(rc: RelayConfig, seed: int, blk):
    bi, lo, hi = blk
    gen = stream(seed, _TAG_RELAY, bi)
    nb = hi - lo
    h1 = gen.gamma(rc.t1, 1.0 / rc.t1, nb)
    h2 = gen.gamma(rc.t2, 1.0 / rc.t2, nb)
    r = sample_user_distance(gen, rc.R, rc.r0, nb)
    g1 = rc.ref_atten_lin * rc.d1 ** (-rc.alpha) * h1
    g2 = rc.ref_atten_lin * r ** (-rc.alpha) * h2
    return g1, g2


def _af_block(plan, rc, split, blk):
    g1, g2 = _relay_draws(rc, plan.master_seed, blk)
    pb, pd = split * rc.p_tot, (1.0 - split) * rc.p_tot
    # amplification normalizes the first-hop receive power to pd
    eps_a = pd / (pb * g1)
    sinr = eps_a * g1 * g2 * pb / (rc.sigma2 * (1.0 + eps_a * g2))
    vals = 0.5 * np.log2(1.0 + sinr)
    return math.fsum(vals), math.fsum(vals * vals), 0


def _df_block(plan, rc, split, blk):
    g1, g2 = _relay_draws(rc, plan.master_seed, blk)
    pb, pd = split * rc.p_tot, (1.0 - split) * rc.p_tot
    r1 = 0.5 * np.log2(1.0 + pb * g1 / rc.sigma2)
    r2 = 0.5 * np.log2(1.0 + pd * g2 / rc.sigma2)
    vals = np.minimum(r1, r2)
    return math.fsum(vals), math.fsum(vals * vals), 0


def af_relay_rate(plan: TrialPlan, cfg_relay: RelayConfig, power_split: float,
                  n_workers: int = 1) -> Estimate:
    """Amplify-and-forward rate: the relay also forwards its receive noise."""
    if not 0.0 < power_split < 1.0:
        raise ValueError("power_split must lie in (0, 1)")
    fn = partial(_af_block, plan, cfg_relay, power_split)
    return _reduce_blocks(_run_blocks(fn, plan.trials, n_workers), plan.trials, binary=False)


def df_relay_rate(plan: TrialPlan, cfg_relay: RelayConfig, power_split: float,
                  n_workers: int = 1, combine: str = "per_draw") -> Estimate:
    """Decode-and-forward rate, bottlenecked by the weaker hop.

    ``combine='per_draw'`` takes the minimum inside the expectation (the
    information-theoretic reading); ``'min_of_means'`` reports the minimum
    of the two per-hop ergodic rates instead.
    """
    if not 0.0 < power_split < 1.0:
        raise ValueError("power_split must lie in (0, 1)")
    if combine == "per_draw":
        fn = partial(_df_block, plan, cfg_relay, power_split)
        return _reduce_blocks(_run_blocks(fn, plan.trials, n_workers), plan.trials, binary=False)
    if combine != "min_of_means":
        raise ValueError(f"unknown combine mode {combine!r}")

    def hop_block(hop, blk):
        g1, g2 = _relay_draws(cfg_relay, plan.master_seed, blk)
        p = power_split * cfg_relay.p_tot if hop == 1 else (1.0 - power_split) * cfg_relay.p_tot
        g = g1 if hop == 1 else g2
        vals = 0.5 * np.log2(1.0 + p * g / cfg_relay.sigma2)
        return math.fsum(vals), math.fsum(vals * vals), 0

    est1 = _reduce_blocks(_run_blocks(partial(hop_block, 1), plan.trials, n_workers),
                          plan.trials, binary=False)
    est2 = _reduce_blocks(_run_blocks(partial(hop_block, 2), plan.trials, n_workers),
                          plan.trials, binary=False)
    return est1 if est1.mean <= est2.mean else est2


def optimal_power_split(relay_rate_fn, plan: TrialPlan, cfg_relay: RelayConfig,
                        grid=None, n_workers: int = 1):
    """Grid search over the BS/relay power split with common random numbers.

    The same master seed is reused at every split, so the argmax is over a
    smooth curve rather than independent noise.
    """
    if grid is None:
        grid = np.round(np.arange(0.01, 1.0, 0.01), 2)
    best_split, best = None, None
    for split in grid:
        est = relay_rate_fn(plan, cfg_relay, float(split), n_workers=n_workers)
        if best is None or est.mean > best.mean:
            best_split, best = float(split), est
    return best_split, best


def empirical_diversity_slope(op_curve) -> float:
    """Least-squares slope of log10(OP) against -snr_db / 10."""
    pts = [(s, p) for s, p in op_curve if p > 0.0]
    if len(pts) < 2:
        raise ValueError("need at least two positive outage points")
    x = np.array([-s / 10.0 for s, _ in pts])
    y = np.array([math.log10(p) for _, p in pts])
    return float(np.polyfit(x, y, 1)[0])
