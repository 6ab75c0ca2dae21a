"""Pilot measurements, the grouped/shared pilot scheme and a ZF-precoded link.

Noise is calibrated against the analytic received pilot power: with unit
channel energy per antenna and unit-modulus pilots, ``E|y_k|^2 = M`` on
every pilot subcarrier, so ``noise_var = M / SNR``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import recovery
from .channel_model import ChannelBlock
from .errors import InvalidArgumentError, SingularSystemError
from .pilots import assemble_sensing

ALGORITHMS = ("assp", "oracle_assp", "oracle_ls", "asp")


@dataclass(frozen=True)
class GroupConfig:
    """Antenna grouping and pilot-sharing period (``f_p``, alias ``f_d``)."""

    N_G: int = 1
    M_G: int = None
    f_p: int = 1
    interpolation: str = "linear"

    def __post_init__(self):
        if self.N_G < 1:
            raise InvalidArgumentError("N_G must be >= 1")
        if self.f_p < 1:
            raise InvalidArgumentError("f_p must be >= 1")
        if self.interpolation not in ("linear", "hold"):
            raise InvalidArgumentError(f"unknown interpolation {self.interpolation!r}")

    def validate(self, M):
        if M % self.N_G:
            raise InvalidArgumentError(f"M={M} is not divisible by N_G={self.N_G}")
        if self.M_G is not None and self.M_G * self.N_G != M:
            raise InvalidArgumentError(f"M_G*N_G = {self.M_G * self.N_G} != M = {M}")
        return M // self.N_G


@dataclass(frozen=True)
class LinkConfig:
    K: int = 8
    constellation: str = "qam16"
    precoder: str = "zero-forcing"


@dataclass
class MeasurementBatch:
    y: np.ndarray
    noise_var: float
    snr_db: float
    w: np.ndarray = field(default=None, repr=False)


def noise_variance(M, snr_db):
    return 0.0 if np.isinf(snr_db) else M / 10.0 ** (snr_db / 10.0)


def measure(D, S, snr_db, rng):
    """``Y = Psi @ D + W``; ``snr_db=inf`` gives a noiseless measurement."""
    d = D.d if isinstance(D, ChannelBlock) else np.asarray(D)
    if d.ndim == 1:
        d = d[:, None]
    if d.shape[0] != S.psi.shape[1]:
        raise InvalidArgumentError(f"D has {d.shape[0]} rows, Psi has {S.psi.shape[1]} columns")
    var = noise_variance(S.M, snr_db)
    shape = (S.Np, d.shape[1])
    if var == 0.0:
        w = np.zeros(shape, dtype=complex)
    else:
        w = np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return MeasurementBatch(S.psi @ d + w, var, snr_db, w)


def interpolate_channels(h_first, h_last, r, f_p):
    """Linear estimate for symbol ``r`` between pilot symbols 1 and ``f_p+1``."""
    if not 1 < r <= f_p:
        raise InvalidArgumentError(f"need 1 < r <= f_p={f_p}, got r={r}")
    return ((f_p + 1 - r) * np.asarray(h_first) + (r - 1) * np.asarray(h_last)) / f_p


def run_estimator(algorithm, Y, S, p_th, block=None):
    """Dispatch one recovery algorithm; oracles read the truth from ``block``."""
    if algorithm == "assp":
        return recovery.assp(Y, S, recovery.StopConfig(p_th=p_th))
    if algorithm == "asp":
        return recovery.asp(Y, S, recovery.StopConfig(p_th=p_th))
    if algorithm == "oracle_assp":
        return recovery.oracle_assp(Y, S, len(block.support))
    if algorithm == "oracle_ls":
        support = np.asarray(block.support)
        return recovery.RecoveryResult(recovery.oracle_ls(Y, S, support), support, len(support))
    raise InvalidArgumentError(f"unknown algorithm {algorithm!r}")


@dataclass
class GroupedEstimate:
    """Full-array estimate plus, per group, one RecoveryResult per pilot symbol."""

    d_hat: np.ndarray
    group_results: list
    pilot_symbols: list


def _group_rngs(rng, n):
    if isinstance(rng, np.random.Generator):
        return rng.spawn(n)
    rngs = list(rng)
    if len(rngs) != n:
        raise InvalidArgumentError(f"need {n} generators, got {len(rngs)}")
    return rngs


def _stack_antennas(parts, L, R):
    """Concatenate per-group ``(L*M_G, R)`` estimates along antennas."""
    return np.concatenate([p.reshape(L, -1, R) for p in parts], axis=1).reshape(-1, R)


def estimate_grouped(block, group, pilot_cfgs, snr_db, rng, p_th, algorithm="assp",
                     sensing=None):
    """Estimate all ``M`` antennas group by group on orthogonal pilot resources.

    Parameters
    ----------
    block : ChannelBlock
        True channel over all antennas and ``R`` symbols.
    group : GroupConfig
    pilot_cfgs : sequence of PilotConfig
        One per group, each covering ``M_G`` antennas. Orthogonality between
        groups (disjoint subcarriers) is the caller's choice.
    rng : Generator or sequence of Generator
        A single generator is split into one child per group.
    sensing : sequence of SensingMatrix, optional
        Prebuilt operators matching ``pilot_cfgs``.

    With ``f_p == 1`` all ``R`` symbols carry pilots and are processed
    jointly. Otherwise symbols ``1, f_p+1, 2*f_p+1, ...`` carry pilots, are
    estimated one at a time, and the symbols between them are interpolated.
    """
    L, M, R = block.L, block.M, block.R
    M_G = group.validate(M)
    if len(pilot_cfgs) != group.N_G:
        raise InvalidArgumentError(f"need {group.N_G} pilot configs, got {len(pilot_cfgs)}")
    if group.f_p > 1 and (R - 1) % group.f_p:
        raise InvalidArgumentError(f"R-1={R - 1} must be a multiple of f_p={group.f_p}")
    rngs = _group_rngs(rng, group.N_G)
    pilot_syms = list(range(0, R, group.f_p))

    parts, results = [], []
    for g, cfg in enumerate(pilot_cfgs):
        if cfg.M != M_G:
            raise InvalidArgumentError(f"pilot config {g} covers {cfg.M} antennas, M_G={M_G}")
        S = sensing[g] if sensing is not None else assemble_sensing(cfg, L)
        sub = block.antennas(g * M_G, (g + 1) * M_G)
        est = np.zeros((L * M_G, R), dtype=complex)
        if group.f_p == 1:
            meas = measure(sub, S, snr_db, rngs[g])
            res = [run_estimator(algorithm, meas.y, S, p_th, sub)]
            est[:] = res[0].d_hat
        else:
            res = []
            for r in pilot_syms:
                meas = measure(sub.d[:, [r]], S, snr_db, rngs[g])
                res.append(run_estimator(algorithm, meas.y, S, p_th, sub))
                est[:, [r]] = res[-1].d_hat
            _fill_between(est, pilot_syms, group)
        parts.append(est)
        results.append(res)
    return GroupedEstimate(_stack_antennas(parts, L, R), results, pilot_syms)


def _fill_between(est, pilot_syms, group):
    for a, b in zip(pilot_syms, pilot_syms[1:]):
        for r in range(2, group.f_p + 1):
            if group.interpolation == "linear":
                est[:, a + r - 1] = interpolate_channels(est[:, a], est[:, b], r, group.f_p)
            else:
                est[:, a + r - 1] = est[:, a]


# -- downlink link ------------------------------------------------------------

_GRAY_LEVELS = np.array([-3.0, -1.0, 3.0, 1.0])  # index = 2-bit Gray label
_QAM_SCALE = 1.0 / np.sqrt(10.0)


def qam16_mod(bits):
    """Gray-mapped square 16-QAM with unit average energy.

    Each 4-bit group ``b0 b1 b2 b3`` maps ``b0 b1`` to the in-phase level and
    ``b2 b3`` to the quadrature level with ``00 -> -3, 01 -> -1, 11 -> +1,
    10 -> +3``, so ``0000 -> (-3-3j)/sqrt(10)``.
    """
    bits = np.asarray(bits, dtype=np.int8).ravel()
    if bits.size % 4:
        raise InvalidArgumentError(f"bit count {bits.size} is not a multiple of 4")
    b = bits.reshape(-1, 4)
    i = _GRAY_LEVELS[2 * b[:, 0] + b[:, 1]]
    q = _GRAY_LEVELS[2 * b[:, 2] + b[:, 3]]
    return (i + 1j * q) * _QAM_SCALE


def _level_bits(x):
    lv = np.clip(2 * np.floor(x / 2) + 1, -3, 3)
    lut = {-3.0: (0, 0), -1.0: (0, 1), 1.0: (1, 1), 3.0: (1, 0)}
    return np.array([lut[v] for v in (-3.0, -1.0, 1.0, 3.0)])[((lv + 3) / 2).astype(int)]


def qam16_demod(symbols):
    """Minimum-distance hard decisions, inverse of :func:`qam16_mod`."""
    z = np.asarray(symbols).ravel() / _QAM_SCALE
    bi = _level_bits(z.real)
    bq = _level_bits(z.imag)
    return np.concatenate([bi, bq], axis=1).ravel().astype(np.int8)


def zf_precode(H, symbols=None):
    """Zero-forcing precoder ``H^H (H H^H)^-1`` scaled to unit total power.

    Returns the ``M x K`` precoder, or the transmit vectors ``W @ symbols``
    when ``symbols`` (``K`` or ``K x T``) is given.
    """
    H = np.asarray(H)
    K, M = H.shape
    if K > M:
        raise SingularSystemError(f"K={K} users exceed M={M} antennas")
    G = H @ H.conj().T
    if np.linalg.cond(G) > 1e12:
        raise SingularSystemError("channel matrix is rank deficient")
    W = H.conj().T @ np.linalg.inv(G)
    W = W / np.linalg.norm(W)
    return W if symbols is None else W @ np.asarray(symbols)


def frequency_response(cir, N, subcarriers):
    """``H[..., n] = sum_l h[..., l] exp(-2j*pi*(n-1)*(l-1)/N)`` at 1-based ``n``."""
    cir = np.asarray(cir)
    L = cir.shape[-1]
    n = np.asarray(subcarriers, dtype=float)[:, None] - 1.0
    F = np.exp(-2j * np.pi * np.mod(n * np.arange(L), N) / N)
    return cir @ F.T


def ber_eval(h_est, h_true, link, snr_db_list, rng, N=4096, subcarriers=None,
             min_bits=100_000):
    """Downlink BER with ZF precoding designed on estimated channels.

    ``h_est`` and ``h_true`` are ``(K, M, L)`` CIRs of the ``K`` users (one
    realization). Precoding is per data subcarrier; the transmit power is
    one and the receiver noise variance ``1/SNR``. Returns one BER per SNR.
    """
    h_est, h_true = np.asarray(h_est), np.asarray(h_true)
    K = link.K
    if h_true.shape[0] != K or h_est.shape != h_true.shape:
        raise InvalidArgumentError("channel arrays must be (K, M, L) and agree in shape")
    if subcarriers is None:
        subcarriers = np.arange(1, N + 1, 16)
    Ht = np.moveaxis(frequency_response(h_true, N, subcarriers), -1, 0)  # (n, K, M)
    He = np.moveaxis(frequency_response(h_est, N, subcarriers), -1, 0)
    n_sc = len(subcarriers)
    W = np.empty((n_sc, h_true.shape[1], K), dtype=complex)
    for i in range(n_sc):
        try:
            W[i] = zf_precode(He[i])
        except SingularSystemError:
            W[i] = 0.0
    G = Ht @ W  # effective (n, K, K)
    # receivers scale by the mean ZF gain, which they learn from data pilots
    gain = np.sqrt(np.mean(np.abs(np.einsum("nkk->nk", G)) ** 2))
    gain = gain if gain > 0 else 1.0

    per_block = 4 * K * n_sc
    n_blocks = max(1, -(-min_bits // per_block))
    out = []
    for snr in snr_db_list:
        var = 10.0 ** (-snr / 10.0)
        errors = total = 0
        for _ in range(n_blocks):
            bits = rng.integers(0, 2, size=(n_sc, K, 4), dtype=np.int8)
            s = qam16_mod(bits.reshape(-1)).reshape(n_sc, K)
            noise = np.sqrt(var / 2) * (rng.standard_normal((n_sc, K))
                                        + 1j * rng.standard_normal((n_sc, K)))
            r = np.einsum("nkj,nj->nk", G, s) + noise
            hat = qam16_demod(r / gain).reshape(n_sc, K, 4)
            errors += int(np.count_nonzero(hat != bits))
            total += bits.size
        out.append(errors / total)
    return np.array(out)
