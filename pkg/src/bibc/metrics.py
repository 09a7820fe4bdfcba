"""Geometry-only figures of merit for CE/reader selection.

All metrics are sums of round-trip gains 1/(d_t^2 d_r^2) over a set of (CE, reader)
index pairs; they carry units of 1/m^4.  The received SNR of a set of pairs is
``p_t * tau_d * M * pair_sum``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .geometry import Deployment, Point, as_point, inverse_square_gains

Readers = Union[str, Sequence[int]]

ALL_OTHERS = "all-others"
COMPLEMENT = "complement"


def reader_pairs(K: int, ce_set: Sequence[int], readers: Readers = ALL_OTHERS) -> list[tuple[int, int]]:
    """(t, r) index pairs processed by the detector.

    ``"all-others"``: every AP except the transmitting one reads (Cases 1 and 2).
    ``"complement"``: only non-CE APs read, in every slot (Case 3).
    An explicit index list restricts the readers, still skipping r == t.
    """
    ce_set = [int(t) for t in ce_set]
    if not ce_set:
        raise ValueError("CE set must be non-empty")
    if len(set(ce_set)) != len(ce_set):
        raise ValueError(f"CE indices must be distinct: {ce_set}")
    if any(not 0 <= t < K for t in ce_set):
        raise ValueError(f"CE index out of range for K={K}: {ce_set}")
    if isinstance(readers, str):
        if readers == ALL_OTHERS:
            pool = range(K)
        elif readers == COMPLEMENT:
            pool = [r for r in range(K) if r not in ce_set]
        else:
            raise ValueError(f"unknown reader policy {readers!r}")
    else:
        pool = [int(r) for r in readers]
        if any(not 0 <= r < K for r in pool):
            raise ValueError(f"reader index out of range for K={K}: {pool}")
    pairs = [(t, r) for t in ce_set for r in pool if r != t]
    if not pairs:
        raise ValueError("no (CE, reader) pairs: every reader is a CE")
    return pairs


def pair_sum(dep: Deployment, p, pairs: Sequence[tuple[int, int]]) -> float:
    """Sum of 1/(d_t^2 d_r^2) over the given pairs, at BD position ``p``."""
    u = inverse_square_gains(dep.ap_positions, np.asarray(p, dtype=float))[0]
    return float(sum(u[t] * u[r] for t, r in pairs))


@dataclass(frozen=True)
class MetricContext:
    deployment: Deployment
    bd: Point
    ce_set: tuple[int, ...]
    T: int | None = None
    p_t: float = 1.0
    tau_d: int = 1
    M: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "bd", as_point(self.bd))
        object.__setattr__(self, "ce_set", tuple(int(t) for t in self.ce_set))
        if self.T is None:
            object.__setattr__(self, "T", len(self.ce_set))
        if self.M is None:
            object.__setattr__(self, "M", self.deployment.M)
        if self.T < 1:
            raise ValueError("T must be >= 1")

    def gains(self) -> np.ndarray:
        return inverse_square_gains(self.deployment.ap_positions, np.array(self.bd))[0]


def lambda1(ctx: MetricContext) -> float:
    """Case 1: CEs take turns, all other APs (idle CEs included) read."""
    reader_pairs(ctx.deployment.K, ctx.ce_set, ALL_OTHERS)  # validates the CE set
    u = ctx.gains()
    total = u.sum()
    ce = np.array(ctx.ce_set)
    return float(np.sum(u[ce] * (total - u[ce])))


def lambda2(ctx: MetricContext) -> float:
    """Case 2: the AP nearest the BD transmits in all T slots, the rest read."""
    u = ctx.gains()
    t = int(np.argmax(u))  # nearest AP, lowest index on ties
    return float(ctx.T * u[t] * (u.sum() - u[t]))


def lambda3(ctx: MetricContext) -> float:
    """Case 3: CEs transmit simultaneously with orthogonal sequences; only non-CE APs read."""
    K = ctx.deployment.K
    if len(set(ctx.ce_set)) >= K:
        raise ValueError("Case 3 needs at least one non-CE AP to read")
    reader_pairs(K, ctx.ce_set, COMPLEMENT)
    u = ctx.gains()
    is_ce = np.zeros(K, dtype=bool)
    is_ce[list(ctx.ce_set)] = True
    return float(u[is_ce].sum() * u[~is_ce].sum())


def pair_metric(dep: Deployment, t: int, r: int, p) -> float:
    if t == r:
        raise ValueError("CE and reader must differ")
    u = inverse_square_gains(dep.ap_positions[[t, r]], np.asarray(p, dtype=float))[0]
    return float(u[0] * u[1])


def received_snr(dep: Deployment, t: int, r: int, p, p_t: float, tau_d: float, M: int | None = None) -> float:
    M = dep.M if M is None else M
    return p_t * tau_d * M * pair_metric(dep, t, r, p)
