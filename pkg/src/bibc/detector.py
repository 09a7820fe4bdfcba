"""MAP detection of the BD bit from the cascaded CE -> BD -> reader links.

With the direct link removed, Y' = gamma * A + W where A = g_r g_t^T Phi and W is
i.i.d. CN(0, 1).  The log-likelihood ratio reduces to the linear statistic

    LLR' = sum Re Tr(A Y'^H)   compared against   ((gamma1 + gamma0) / 2) * sum ||A||^2

(plus a prior term when the priors differ), which is Gaussian with mean
gamma_i * sum ||A||^2 and variance sum ||A||^2 / 2 under hypothesis i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import erfc

from .channel import ChannelRealization, OrthogonalSequenceSet, ProbingSignal, synthesize_channels
from .geometry import Deployment
from .metrics import ALL_OTHERS, COMPLEMENT, Readers, pair_sum, reader_pairs

Pair = tuple[int, int]

MC_BLOCK = 2048  # trials per independently seeded block


def q_function(x):
    """Standard normal tail probability, Q(x) = erfc(x / sqrt 2) / 2."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def pe_from_metric(metric, transmit_snr, M: int, gamma_gap: float = 1.0):
    """Equal-prior error probability from a round-trip gain sum.

    ``metric`` is the sum of 1/(d_t^2 d_r^2) over the processed pairs and
    ``transmit_snr`` is p_t * tau_d (linear), so that sum ||A||^2 = transmit_snr * M * metric.
    Broadcasts over array inputs.
    """
    return q_function(pe_argument(metric, transmit_snr, M, gamma_gap))


def pe_argument(metric, transmit_snr, M: int, gamma_gap: float = 1.0):
    energy = np.asarray(transmit_snr, dtype=float) * M * np.asarray(metric, dtype=float)
    return gamma_gap * np.sqrt(0.5 * energy)


@dataclass(frozen=True)
class DetectorConfig:
    gamma0: float = 0.0
    gamma1: float = 1.0
    ce_set: tuple[int, ...] = (0,)
    readers: Readers = ALL_OTHERS
    prior0: float = 0.5
    prior1: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "ce_set", tuple(int(t) for t in self.ce_set))
        if not isinstance(self.readers, str):
            object.__setattr__(self, "readers", tuple(int(r) for r in self.readers))
        if not self.gamma1 > self.gamma0:
            raise ValueError(f"need gamma1 > gamma0, got {self.gamma1} <= {self.gamma0}")
        if not (0 < self.prior0 < 1 and 0 < self.prior1 < 1) or abs(self.prior0 + self.prior1 - 1) > 1e-12:
            raise ValueError("priors must lie in (0, 1) and sum to 1")
        if not self.ce_set or len(set(self.ce_set)) != len(self.ce_set):
            raise ValueError("CE set must be non-empty with distinct indices")

    def pairs(self, K: int) -> list[Pair]:
        return reader_pairs(K, self.ce_set, self.readers)

    @property
    def gamma_gap(self) -> float:
        return self.gamma1 - self.gamma0

    @property
    def equal_priors(self) -> bool:
        return abs(self.prior0 - self.prior1) < 1e-15


@dataclass(frozen=True)
class TestStatistic:
    llr_prime: float
    threshold: float
    decision: int

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class PeResult:
    pe: float
    argument: float


@dataclass(frozen=True)
class BerEstimate:
    ber: float
    halfwidth: float  # 95% normal-approximation binomial half-width
    n_errors: int
    n_trials: int


def _pair_arrays(real: ChannelRealization, phi: ProbingSignal, pairs: Sequence[Pair]):
    """Stacked direct-link terms G_{t,r} Phi and cascades A_{t,r}, each ``(P, M, tau_d)``."""
    _check_phi(real, phi)
    direct = np.stack([real.direct(t, r, phi.phi) for t, r in pairs])
    cascade = np.stack([real.cascade(t, r, phi.phi) for t, r in pairs])
    return direct, cascade


def _check_phi(real: ChannelRealization, phi: ProbingSignal):
    if phi.phi.shape[0] != real.bd_channels.shape[1]:
        raise ValueError(f"probing signal has {phi.phi.shape[0]} rows, channels have M={real.bd_channels.shape[1]}")


def _cn_noise(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def threshold(cfg: DetectorConfig, energy: float) -> float:
    """MAP threshold on LLR' given energy = sum ||A||^2."""
    eta = 0.5 * (cfg.gamma1 + cfg.gamma0) * energy
    if not cfg.equal_priors:
        eta += math.log(cfg.prior0 / cfg.prior1) / (2.0 * cfg.gamma_gap)
    return eta


def _llr_prime(cascade: np.ndarray, y_prime: np.ndarray) -> np.ndarray:
    # Re Tr(A Y'^H) = Re sum_ij A_ij conj(Y'_ij); summed over pairs, batched over leading axes
    return np.einsum("pmn,...pmn->...", cascade, y_prime.conj()).real


def simulate_received(
    real: ChannelRealization,
    phi: ProbingSignal,
    cfg: DetectorConfig,
    bit: int,
    rng_seed=None,
    noise: bool = True,
) -> dict[Pair, np.ndarray]:
    """Received ``M x tau_d`` blocks Y_{t,r} = G_{t,r} Phi + gamma g_r g_t^T Phi + W for every processed pair."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    pairs = cfg.pairs(real.K)
    direct, cascade = _pair_arrays(real, phi, pairs)
    gamma = cfg.gamma1 if bit else cfg.gamma0
    y = direct + gamma * cascade
    if noise:
        y = y + _cn_noise(np.random.default_rng(rng_seed), y.shape)
    return {pair: y[i] for i, pair in enumerate(pairs)}


def llr_detect(
    blocks: Mapping[Pair, np.ndarray],
    real: ChannelRealization,
    phi: ProbingSignal,
    cfg: DetectorConfig,
) -> TestStatistic:
    pairs = cfg.pairs(real.K)
    missing = [p for p in pairs if p not in blocks]
    if missing:
        raise ValueError(f"received blocks missing for pairs {missing}")
    direct, cascade = _pair_arrays(real, phi, pairs)
    y = np.stack([np.asarray(blocks[p]) for p in pairs])
    if y.shape != cascade.shape:
        raise ValueError(f"received blocks have shape {y.shape[1:]}, expected {cascade.shape[1:]}")
    stat = float(_llr_prime(cascade, y - direct))
    eta = threshold(cfg, float(np.sum(np.abs(cascade) ** 2)))
    return TestStatistic(stat, eta, int(stat > eta))


def closed_form_pe(dep: Deployment, bd, cfg: DetectorConfig, phi: ProbingSignal) -> PeResult:
    """Exact equal-prior error probability from geometry alone (free-space LOS norms)."""
    if not cfg.equal_priors:
        raise ValueError("closed-form Pe is defined for equal priors")
    metric = pair_sum(dep, bd, cfg.pairs(dep.K))
    arg = float(pe_argument(metric, phi.transmit_snr, phi.M, cfg.gamma_gap))
    return PeResult(float(q_function(arg)), arg)


def closed_form_pe_case3(
    dep: Deployment, bd, cfg: DetectorConfig, phi: ProbingSignal, seqs: OrthogonalSequenceSet
) -> PeResult:
    """Simultaneous CEs with orthogonal sequences; only non-CE APs read.

    The energy sum is scaled by T * eta, which is 1 for eta = 1/T.
    """
    if not cfg.equal_priors:
        raise ValueError("closed-form Pe is defined for equal priors")
    if seqs.T != len(cfg.ce_set):
        raise ValueError(f"{seqs.T} sequences for {len(cfg.ce_set)} CEs")
    metric = pair_sum(dep, bd, reader_pairs(dep.K, cfg.ce_set, COMPLEMENT))
    arg = float(pe_argument(seqs.T * seqs.eta * metric, phi.transmit_snr, phi.M, cfg.gamma_gap))
    return PeResult(float(q_function(arg)), arg)


def simulate_received_case3(
    real: ChannelRealization,
    phi: ProbingSignal,
    cfg: DetectorConfig,
    seqs: OrthogonalSequenceSet,
    bit: int,
    rng_seed=None,
    noise: bool = True,
) -> dict[tuple[int, int], np.ndarray]:
    """Per-reader, per-slot blocks Y_r^l = sum_t (G_{t,r} Phi + gamma A_{t,r}) c_t^l + W_r^l, keyed ``(r, l)``."""
    gamma = cfg.gamma1 if bit else cfg.gamma0
    readers = [r for r in range(real.K) if r not in cfg.ce_set]
    rng = np.random.default_rng(rng_seed)
    out = {}
    for r in readers:
        per_ce = np.stack([real.direct(t, r, phi.phi) + gamma * real.cascade(t, r, phi.phi) for t in cfg.ce_set])
        for l in range(seqs.T):
            y = np.tensordot(seqs.coeffs[:, l], per_ce, axes=1)
            if noise:
                y = y + _cn_noise(rng, y.shape)
            out[(r, l)] = y
    return out


def despread(
    slot_blocks: Mapping[tuple[int, int], np.ndarray], cfg: DetectorConfig, seqs: OrthogonalSequenceSet, K: int
) -> dict[Pair, np.ndarray]:
    """Correlate each reader's slots with each CE's sequence, normalized by T * eta.

    The result has the single-CE form G_{t,r} Phi + gamma A_{t,r} + W' with W' i.i.d.
    CN(0, 1 / (T eta)).
    """
    gain = seqs.T * seqs.eta
    readers = [r for r in range(K) if r not in cfg.ce_set]
    out = {}
    for i, t in enumerate(cfg.ce_set):
        for r in readers:
            acc = sum(np.conj(seqs.coeffs[i, l]) * slot_blocks[(r, l)] for l in range(seqs.T))
            out[(t, r)] = acc / gain
    return out


def monte_carlo_ber(
    dep: Deployment,
    bd,
    cfg: DetectorConfig,
    phi: ProbingSignal,
    n_trials: int,
    rng_seed: int = 0,
    seqs: OrthogonalSequenceSet | None = None,
    channel_seed: int | None = None,
) -> BerEstimate:
    """Bit error rate of the full simulate -> detect chain.

    Bits are equiprobable. Trials are processed in blocks of ``MC_BLOCK``, block ``i``
    seeded from ``(rng_seed, i)``, so results do not depend on how blocks are scheduled.
    With ``seqs`` the simultaneous-CE (orthogonal sequence) path is used.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    real = synthesize_channels(dep, bd, rng_seed if channel_seed is None else channel_seed)
    if seqs is None:
        run = _block_runner(real, phi, cfg)
    else:
        run = _block_runner_case3(real, phi, cfg, seqs)
    errors = 0
    for b, start in enumerate(range(0, n_trials, MC_BLOCK)):
        n = min(MC_BLOCK, n_trials - start)
        rng = np.random.default_rng(np.random.SeedSequence([rng_seed, b]))
        errors += run(rng, n)
    ber = errors / n_trials
    half = 1.96 * math.sqrt(ber * (1 - ber) / n_trials)
    return BerEstimate(ber, half, errors, n_trials)


def _block_runner(real, phi, cfg):
    pairs = cfg.pairs(real.K)
    direct, cascade = _pair_arrays(real, phi, pairs)
    eta = threshold(cfg, float(np.sum(np.abs(cascade) ** 2)))
    p1 = cfg.prior1

    def run(rng, n):
        bits = (rng.random(n) < p1).astype(int)
        gamma = np.where(bits == 1, cfg.gamma1, cfg.gamma0)
        w = _cn_noise(rng, (n,) + cascade.shape)
        y = direct + gamma[:, None, None, None] * cascade + w
        stat = _llr_prime(cascade, y - direct)
        decided = (stat > eta).astype(int)
        return int(np.count_nonzero(decided != bits))

    return run


def _block_runner_case3(real, phi, cfg, seqs):
    if seqs.T != len(cfg.ce_set):
        raise ValueError(f"{seqs.T} sequences for {len(cfg.ce_set)} CEs")
    pairs = reader_pairs(real.K, cfg.ce_set, COMPLEMENT)
    readers = sorted({r for _, r in pairs})
    ce_pos = {t: i for i, t in enumerate(cfg.ce_set)}
    c = seqs.coeffs
    gain = seqs.T * seqs.eta
    # per (reader, CE) signal terms, (R, T, M, tau)
    direct = np.stack([np.stack([real.direct(t, r, phi.phi) for t in cfg.ce_set]) for r in readers])
    casc = np.stack([np.stack([real.cascade(t, r, phi.phi) for t in cfg.ce_set]) for r in readers])
    # pair-ordered views for the detector, (P, M, tau)
    ridx = {r: i for i, r in enumerate(readers)}
    d_pairs = np.stack([direct[ridx[r], ce_pos[t]] for t, r in pairs])
    a_pairs = np.stack([casc[ridx[r], ce_pos[t]] for t, r in pairs])
    eta_thr = threshold(cfg, float(np.sum(np.abs(a_pairs) ** 2)))
    sel_r = np.array([ridx[r] for _, r in pairs])
    sel_t = np.array([ce_pos[t] for t, _ in pairs])

    def run(rng, n):
        bits = (rng.random(n) < cfg.prior1).astype(int)
        gamma = np.where(bits == 1, cfg.gamma1, cfg.gamma0)
        sig = direct[None] + gamma[:, None, None, None, None] * casc[None]  # (n, R, T, M, tau)
        # slot l at reader r: sum_t c[t, l] * sig[..., r, t]
        y = np.einsum("tl,nrtmk->nrlmk", c, sig)
        y = y + _cn_noise(rng, y.shape)
        z = np.einsum("tl,nrlmk->nrtmk", c.conj(), y) / gain
        z_pairs = z[:, sel_r, sel_t]
        stat = _llr_prime(a_pairs, z_pairs - d_pairs)
        decided = (stat > eta_thr).astype(int)
        return int(np.count_nonzero(decided != bits))

    return run
