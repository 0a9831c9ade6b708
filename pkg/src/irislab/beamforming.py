"""Passive-beamforming weights at the surface and zero-forcing detection.

The surface weights co-phase every cascaded path onto a real target vector;
each user then projects onto the null space of the other users' effective
columns and combines with MRC inside it.  ``link_snr`` is the ground-truth
post-detection SNR, ``model_snr`` the analytical-model counterpart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ChannelRealization, NetworkConfig, path_loss

__all__ = [
    "RankDeficiencyError",
    "BeamformingSolution",
    "stack_interference_matrix",
    "target_vector",
    "solve_passive_weights",
    "normalize_weights",
    "effective_channel",
    "detection_vector",
    "solve_beamforming",
    "link_snr",
    "model_snr",
]

_RANK_RCOND = 1e-10   # singular values below rcond * s_max count as zero


class RankDeficiencyError(RuntimeError):
    """The stacked cascade matrix lost rank; the draw must be resampled."""


@dataclass
class BeamformingSolution:
    phi_v: np.ndarray      # unnormalized weights, length N
    beta_max: float        # normalization, >= 1
    phi: np.ndarray        # normalized weights, |phi_n| <= 1
    V: list                # per-user unit detection vectors, length K each
    H_eff: list            # per-user effective channels, K x M each


def stack_interference_matrix(real: ChannelRealization) -> np.ndarray:
    """Stack the per-user cascade matrices into one MK x N system.

    Row (m, k), column n holds g_{m,k,n} * h_{n,m}.
    """
    M = len(real.G)
    rows = [real.G[m] * real.H[:, m][np.newaxis, :] for m in range(M)]
    return np.vstack(rows)


def target_vector(real: ChannelRealization) -> np.ndarray:
    """Maximal co-phased gains s_{m,k} = sum_n |g_{m,k,n}| |h_{n,m}|, stacked."""
    M = len(real.G)
    rows = [np.abs(real.G[m]) @ np.abs(real.H[:, m]) for m in range(M)]
    return np.concatenate(rows)


def solve_passive_weights(Hbar: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Solve Hbar @ phi_v = S for the surface weights.

    Underdetermined (N > MK) systems get the minimum-norm solution, which is
    deterministic and keeps the weight magnitudes small.
    """
    mk, n = Hbar.shape
    if n < mk:
        raise RankDeficiencyError(f"no solution for N={n} < MK={mk}")
    phi_v, _, rank, _ = np.linalg.lstsq(Hbar, S.astype(complex), rcond=_RANK_RCOND)
    if rank < mk:
        raise RankDeficiencyError(f"cascade matrix rank {rank} < MK={mk}")
    return phi_v


def normalize_weights(phi_v: np.ndarray):
    """Scale weights so every amplitude is feasible: phi = phi_v / beta_max.

    beta_max is floored at one; phases are untouched.
    """
    beta_max = max(1.0, float(np.max(np.abs(phi_v))))
    return phi_v / beta_max, beta_max


def effective_channel(real: ChannelRealization, phi: np.ndarray) -> list:
    """H_eff[m] = G[m] diag(phi) H, the K x M channel seen by user m."""
    return [real.G[m] @ (phi[:, np.newaxis] * real.H) for m in range(len(real.G))]


def detection_vector(H_eff_m: np.ndarray, m: int) -> np.ndarray:
    """Zero-forcing + MRC detection vector for user m.

    Null space of the other users' columns comes from the left singular
    vectors of the column-deleted matrix; MRC picks the direction inside it
    that maximizes |v^H h_m|.
    """
    K, M = H_eff_m.shape
    if K < M:
        raise ValueError(f"need K >= M for a nonempty null space, got K={K} M={M}")
    h_m = H_eff_m[:, m]
    others = np.delete(H_eff_m, m, axis=1)
    if others.shape[1] == 0:
        T = np.eye(K, dtype=complex)
    else:
        U, _, _ = np.linalg.svd(others, full_matrices=True)
        T = U[:, M - 1:]          # K x Q basis of the interference null space
    x = T.conj().T @ h_m
    x = x / np.linalg.norm(x)
    return T @ x


def solve_beamforming(real: ChannelRealization, cfg: NetworkConfig) -> BeamformingSolution:
    """Full pipeline: stack, solve, normalize, detect."""
    Hbar = stack_interference_matrix(real)
    S = target_vector(real)
    phi_v = solve_passive_weights(Hbar, S)
    phi, beta_max = normalize_weights(phi_v)
    H_eff = effective_channel(real, phi)
    V = [detection_vector(H_eff[m], m) for m in range(cfg.M)]
    return BeamformingSolution(phi_v=phi_v, beta_max=beta_max, phi=phi, V=V, H_eff=H_eff)


def link_snr(real: ChannelRealization, solution: BeamformingSolution,
             cfg: NetworkConfig, m: int) -> float:
    """Post-detection SNR of user m for one realization."""
    v = solution.V[m]
    h_m = solution.H_eff[m][:, m]
    gain = np.abs(v.conj() @ h_m) ** 2
    pl = path_loss(cfg.d1, real.d2[m], cfg.alpha, cfg.ref_atten_db)
    return float(gain * pl * cfg.p_b / cfg.sigma2)


def model_snr(sum_gains: np.ndarray, beta_max: float, d1: float, d2: float,
              cfg: NetworkConfig) -> float:
    """Analytical-model SNR from the Q co-phased row gains.

    sum_gains[q] = sum_n |g_{m,q,n}| |h_{n,m}|; the combiner norm contributes
    the Q in the denominator.
    """
    Q = cfg.Q
    if len(sum_gains) != Q:
        raise ValueError(f"expected {Q} row gains, got {len(sum_gains)}")
    gain = float(np.sum(np.square(sum_gains)))
    pl = path_loss(d1, d2, cfg.alpha, cfg.ref_atten_db)
    return gain * pl * cfg.p_b / (beta_max ** 2 * Q * cfg.sigma2)
