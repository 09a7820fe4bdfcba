"""Free-space LOS channel synthesis, probing signal and orthogonal CE sequences.

Noise is normalized to unit variance, so the transmit SNR is ``p_t * tau_d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Deployment, Point, as_point, inverse_square_gains, squared_distances


def _unitary_dft(n: int) -> np.ndarray:
    return np.fft.fft(np.eye(n)) / np.sqrt(n)


@dataclass(frozen=True, eq=False)
class ProbingSignal:
    phi: np.ndarray  # (M, tau_d), phi @ phi^H = (p_t tau_d / M) I
    p_t: float
    tau_d: int

    @property
    def M(self) -> int:
        return self.phi.shape[0]

    @property
    def energy(self) -> float:
        return self.p_t * self.tau_d

    @property
    def transmit_snr(self) -> float:
        return self.p_t * self.tau_d


def make_probing_signal(M: int, tau_d: int, p_t: float) -> ProbingSignal:
    """Rows of a ``tau_d``-point unitary DFT, scaled so ``phi phi^H = (p_t tau_d / M) I_M``."""
    if M < 1:
        raise ValueError("M must be >= 1")
    if tau_d < M:
        raise ValueError(f"probing slot too short: tau_d={tau_d} < M={M}")
    if not p_t > 0:
        raise ValueError("transmit power must be positive")
    phi = _unitary_dft(tau_d)[:M] * np.sqrt(p_t * tau_d / M)
    phi.setflags(write=False)
    return ProbingSignal(phi, float(p_t), int(tau_d))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Perfect-CSI channels for one geometry.

    ``bd_channels[t]`` is g_t (length M). ``inter_ap[t, r]`` is G_{t,r} (M x M);
    the diagonal blocks are unused zeros.
    """

    bd_channels: np.ndarray  # (K, M)
    inter_ap: np.ndarray  # (K, K, M, M)
    deployment: Deployment
    bd: Point
    seed: int | None = field(default=None)

    @property
    def K(self) -> int:
        return self.bd_channels.shape[0]

    def cascade(self, t: int, r: int, phi: np.ndarray) -> np.ndarray:
        """A_{t,r} = g_r g_t^T phi."""
        g = self.bd_channels
        return np.outer(g[r], g[t]) @ phi

    def direct(self, t: int, r: int, phi: np.ndarray) -> np.ndarray:
        return self.inter_ap[t, r] @ phi


def _los_entries(rng: np.random.Generator, gain: float, shape) -> np.ndarray:
    phases = rng.uniform(0.0, 2 * np.pi, size=shape)
    return np.sqrt(gain) * np.exp(1j * phases)


def synthesize_channels(dep: Deployment, bd, rng_seed=None) -> ChannelRealization:
    """Entries of magnitude sqrt(beta) with i.i.d. uniform phases; G_{r,t} = G_{t,r}^T."""
    bd = as_point(bd)
    beta = inverse_square_gains(dep.ap_positions, np.array(bd))[0]
    rng = np.random.default_rng(rng_seed)
    K, M = dep.K, dep.M
    g = np.stack([_los_entries(rng, beta[t], M) for t in range(K)])
    ap_d2 = squared_distances(dep.ap_positions, dep.ap_positions)
    G = np.zeros((K, K, M, M), dtype=complex)
    for t in range(K):
        for r in range(t + 1, K):
            G[t, r] = _los_entries(rng, 1.0 / ap_d2[t, r], (M, M))
            G[r, t] = G[t, r].T
    g.setflags(write=False)
    G.setflags(write=False)
    seed = rng_seed if isinstance(rng_seed, (int, np.integer)) else None
    return ChannelRealization(g, G, dep, bd, seed)


@dataclass(frozen=True, eq=False)
class OrthogonalSequenceSet:
    coeffs: np.ndarray  # (T, T): row t holds c_t^l over slots l

    @property
    def T(self) -> int:
        return self.coeffs.shape[0]

    @property
    def eta(self) -> float:
        return float(np.abs(self.coeffs[0, 0]) ** 2)

    def gram(self) -> np.ndarray:
        return self.coeffs @ self.coeffs.conj().T


def make_orthogonal_sequences(T: int) -> OrthogonalSequenceSet:
    """Unitary DFT rows: mutually orthogonal, |c_t^l|^2 = 1/T, valid for every T >= 1."""
    if T < 1:
        raise ValueError("T must be >= 1")
    c = _unitary_dft(T)
    c.setflags(write=False)
    return OrthogonalSequenceSet(c)
