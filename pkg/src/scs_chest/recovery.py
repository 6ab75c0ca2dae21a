"""Greedy structured-sparse recovery: ASSP and its baselines.

Every solver works on ``Y = Psi @ D + W`` where ``D`` is ``(L*M, R)`` and
row-block ``l`` (``M`` rows) holds tap ``l``. Supports are returned as
sorted 1-based tap indices.
"""

import csv
import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import InvalidArgumentError, SingularSystemError
from .pilots import block_columns

RANK_RTOL = 1e-10


class Termination(str, enum.Enum):
    RESIDUAL_INCREASE = "residual-increase"
    NOISE_FLOOR = "noise-floor"
    S_MAX = "s_max-reached"
    K_MAX = "k_max-reached"
    RANK_DEFICIENT = "rank-deficient"
    CONVERGED = "converged"


@dataclass(frozen=True)
class StopConfig:
    """Stopping rules for the adaptive loop.

    ``s_max=None`` resolves to ``min(floor(Np / (2*group_M)), L)`` and
    ``group_M``/``R`` default to the operator and measurement shapes.
    """

    p_th: float
    s_max: int = None
    k_max: int = 50
    group_M: int = None
    R: int = None

    def __post_init__(self):
        if self.p_th < 0:
            raise InvalidArgumentError("p_th must be >= 0")
        if self.k_max < 1:
            raise InvalidArgumentError("k_max must be >= 1")
        if self.s_max is not None and self.s_max < 1:
            raise InvalidArgumentError("s_max must be >= 1")


@dataclass
class RecoveryResult:
    d_hat: np.ndarray
    support: np.ndarray
    s_hat: int
    residual_trace: list = field(default_factory=list)
    termination: Termination = Termination.CONVERGED
    iterations: int = 0

    def write_trace_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "iteration", "residual"])
            w.writerows((s, k, repr(r)) for s, k, r in self.residual_trace)


def _lstsq_qr(A, Y):
    """Least squares through a Householder QR; raises on rank deficiency.

    ``Q^H Y`` is applied from the reflectors without forming ``Q``.
    """
    m, n = A.shape
    if n == 0:
        return np.zeros((0, Y.shape[1]), dtype=complex)
    if n > m:
        raise np.linalg.LinAlgError("underdetermined")
    qr, tau, _, info = lapack.zgeqrf(np.asarray(A, dtype=complex))
    diag = np.abs(np.diag(qr[:n, :n]))
    if info != 0 or diag.min() <= RANK_RTOL * diag.max():
        raise np.linalg.LinAlgError("rank deficient")
    c, _, info = lapack.zunmqr("L", "C", qr, tau, np.asarray(Y, dtype=complex),
                               max(1, Y.shape[1]) * 64)
    return sla.solve_triangular(qr[:n, :n], c[:n], check_finite=False)


def _solve_blocks(A, Y, blocks, size):
    """LS fit of ``Y`` on the 0-based column ``blocks``; full-size output."""
    blocks = np.sort(np.asarray(blocks, dtype=int))
    cols = block_columns(blocks, size)
    try:
        coef = _lstsq_qr(A[:, cols], Y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(
            f"columns of taps {list(blocks + 1)} are rank deficient ({exc})", blocks + 1
        ) from None
    X = np.zeros((A.shape[1], Y.shape[1]), dtype=complex)
    X[cols] = coef
    return X


def _block_norms(X, size):
    return np.sqrt(np.sum(np.abs(X.reshape(-1, size * X.shape[1])) ** 2, axis=1))


def _largest(values, s, among=None):
    """Indices of the ``s`` largest values; ties go to the lower index."""
    idx = np.arange(len(values)) if among is None else np.sort(np.asarray(among, dtype=int))
    order = np.argsort(-values[idx], kind="stable")
    return np.sort(idx[order[:s]])


def structured_ls(Y, S, support):
    """Minimum-norm LS estimate of ``D`` restricted to the taps in ``support``."""
    Y = _as_matrix(Y)
    support = np.asarray(support, dtype=int)
    return _solve_blocks(S.psi, Y, support - 1, S.M)


def oracle_ls(Y, S, true_support):
    return structured_ls(Y, S, true_support)


def _as_matrix(Y):
    Y = np.asarray(Y)
    return Y[:, None] if Y.ndim == 1 else Y


class _Pursuit:
    """Shared state of the pursuit loop for block width ``size``."""

    def __init__(self, A, Y, size):
        self.A, self.Y, self.size = A, Y, size
        self.n_blocks = A.shape[1] // size

    def iterate(self, support, residual, s):
        """One pass of steps 2.1-2.5 at sparsity ``s``."""
        Z = self.A.conj().T @ residual
        cand = np.union1d(support, _largest(_block_norms(Z, self.size), s))
        X = _solve_blocks(self.A, self.Y, cand, self.size)
        pruned = _largest(_block_norms(X, self.size), s, among=cand)
        X = _solve_blocks(self.A, self.Y, pruned, self.size)
        R = self.Y - self.A @ X
        return X, pruned, R


def _adaptive(A, Y, size, p_th, s_max, k_max):
    """The adaptive ASSP loop with block width ``size`` (tap blocks or single columns)."""
    run = _Pursuit(A, Y, size)
    floor = np.sqrt(size * Y.shape[1]) * p_th
    s_max = min(s_max, run.n_blocks)

    s, k_level, total = 1, 0, 0
    support = np.zeros(0, dtype=int)
    X_prev = np.zeros((A.shape[1], Y.shape[1]), dtype=complex)
    R_prev = Y
    rn_prev = np.linalg.norm(Y)
    snap_X, snap_support, snap_rn = X_prev, support, np.inf
    trace = []

    while True:
        try:
            X, pruned, R = run.iterate(support, R_prev, s)
        except SingularSystemError:
            return snap_X, snap_support, trace, Termination.RANK_DEFICIENT, total
        total += 1
        rn = np.linalg.norm(R)
        if rn > snap_rn:
            return snap_X, snap_support, trace, Termination.RESIDUAL_INCREASE, total
        norms = _block_norms(X, size)
        if norms[pruned].min() <= floor:
            if s == 1:
                # no completed level to fall back on: keep the s=1 estimate
                return X, pruned[norms[pruned] > 0], trace, Termination.NOISE_FLOOR, total
            return snap_X, snap_support, trace, Termination.NOISE_FLOOR, total
        if rn_prev > rn:
            support, X_prev, R_prev, rn_prev = pruned, X, R, rn
            k_level += 1
            trace.append((s, k_level, float(rn)))
            if k_level >= k_max:
                return X, pruned, trace, Termination.K_MAX, total
        else:
            snap_X, snap_support, snap_rn = X_prev, support, rn_prev
            s, k_level = s + 1, 0
            if s > s_max:
                return snap_X, snap_support, trace, Termination.S_MAX, total


def _fixed(A, Y, size, s, k_max):
    """The inner pursuit loop at a known sparsity level."""
    run = _Pursuit(A, Y, size)
    support = np.zeros(0, dtype=int)
    X_prev = np.zeros((A.shape[1], Y.shape[1]), dtype=complex)
    R_prev, rn_prev = Y, np.linalg.norm(Y)
    trace = []
    for k in range(1, k_max + 1):
        try:
            X, pruned, R = run.iterate(support, R_prev, s)
        except SingularSystemError:
            return X_prev, support, trace, Termination.RANK_DEFICIENT, k - 1
        rn = np.linalg.norm(R)
        if rn_prev <= rn:
            return X_prev, support, trace, Termination.CONVERGED, k
        support, X_prev, R_prev, rn_prev = pruned, X, R, rn
        trace.append((s, k, float(rn)))
    return X_prev, support, trace, Termination.K_MAX, k_max


def _resolve_stop(stop, S, Y):
    group_M = stop.group_M or S.M
    s_max = stop.s_max if stop.s_max is not None else max(1, S.Np // (2 * group_M))
    if s_max > S.L:
        if stop.s_max is not None:
            raise InvalidArgumentError(f"s_max={stop.s_max} exceeds L={S.L}")
        s_max = S.L
    return s_max


def _check_dims(Y, S):
    if Y.shape[0] != S.Np:
        raise InvalidArgumentError(f"Y has {Y.shape[0]} rows, Psi has {S.Np}")


def _result(X, blocks, trace, term, iters, M):
    support = np.asarray(blocks, dtype=int) + 1
    return RecoveryResult(X, support, len(support), trace, term, iters)


def assp(Y, S, stop):
    """Adaptive structured subspace pursuit.

    Grows the sparsity level from one, running a subspace-pursuit inner loop
    at each level until the residual stops decreasing, and stops when the
    residual exceeds the previous level's or the weakest selected tap block
    falls below ``sqrt(M*R)*p_th``. Returns the last completed level.
    """
    Y = _as_matrix(Y)
    _check_dims(Y, S)
    s_max = _resolve_stop(stop, S, Y)
    X, blocks, trace, term, iters = _adaptive(S.psi, Y, S.M, stop.p_th, s_max, stop.k_max)
    return _result(X, blocks, trace, term, iters, S.M)


def oracle_assp(Y, S, P, k_max=50):
    """Structured subspace pursuit at the known sparsity ``P``."""
    Y = _as_matrix(Y)
    _check_dims(Y, S)
    if not 1 <= P <= S.L:
        raise InvalidArgumentError(f"need 1 <= P <= L={S.L}, got {P}")
    X, blocks, trace, term, iters = _fixed(S.psi, Y, S.M, P, k_max)
    return _result(X, blocks, trace, term, iters, S.M)


def asp(Y, S, stop):
    """Adaptive SP without the block structure.

    Each measurement column is recovered on its own over the ``M*L``
    individual columns of ``Psi``; the per-symbol estimates are stacked.
    The returned support is the union of taps touched by any coefficient.
    """
    Y = _as_matrix(Y)
    _check_dims(Y, S)
    n = S.psi.shape[1]
    s_max = stop.s_max if stop.s_max is not None else max(1, S.Np // 2)
    s_max = min(s_max, n)
    D = np.zeros((n, Y.shape[1]), dtype=complex)
    trace, terms, iters = [], [], 0
    for r in range(Y.shape[1]):
        x, _, tr, term, it = _adaptive(S.psi, Y[:, [r]], 1, stop.p_th, s_max, stop.k_max)
        D[:, r] = x[:, 0]
        trace.extend(tr)
        terms.append(term)
        iters += it
    taps = np.flatnonzero(_block_norms(D, S.M) > 0) + 1
    return RecoveryResult(D, taps, len(taps), trace, terms[-1], iters)


@dataclass
class ConvergenceReport:
    error_norm: float
    noise_norm: float
    ratio: float
    bound_constant: float
    bound_holds: object
    residual_monotone: bool


def convergence_constant(d_P, d_2P, d_3P):
    """Error constant ``C4`` of the s = P convergence bound, or None.

    Expressed for a sensing matrix normalized to unit-norm columns; None
    when the restricted isometry constants are too large for the bound.
    """
    if not (0 <= d_P < 1 and 0 <= d_2P < 1 and 0 < d_3P < 1):
        return None
    c1 = (1 - d_P) ** 2 * (1 - d_2P) / (2 * d_3P * (1 - d_P + d_2P) * (1 - d_2P + d_3P))
    c2 = (1 - d_P) / (d_3P * (1 - d_P + d_2P)) * (
        d_P * (1 - d_P) * np.sqrt(1 - d_2P) / (1 - d_2P + 2 * d_3P) + np.sqrt(1 + d_P)
    )
    den = c1 * (1 - d_P - d_2P) - np.sqrt(1 - d_P**2)
    if den <= 0:
        return None
    c3 = (2 * c1 * np.sqrt(1 - d_P) + c2 * np.sqrt(1 - d_P**2)) / den
    return float((c3 * (1 - d_P + d_2P) + np.sqrt(1 + d_P)) / (1 - d_P))


def residual_monotone(trace):
    """True when residuals strictly decrease within every sparsity level."""
    for (s0, _, r0), (s1, _, r1) in zip(trace, trace[1:]):
        if s0 == s1 and not r1 < r0:
            return False
    return True


def verify_theorem1(result, d_true, w_norm, deltas=None, Np=None):
    """Empirical check of the fixed-sparsity convergence claims.

    ``deltas`` maps ``P``, ``2P`` and ``3P`` to probed isometry constants of
    the column-normalized operator; ``Np`` rescales the noise accordingly.
    The bound is only evaluated when a finite constant exists.
    """
    err = float(np.linalg.norm(np.asarray(d_true) - result.d_hat))
    if w_norm > 0:
        ratio = err / w_norm
    else:
        ratio = 0.0 if err == 0 else np.inf
    const, holds = None, None
    if deltas is not None:
        P = result.s_hat
        const = convergence_constant(deltas.get(P), deltas.get(2 * P), deltas.get(3 * P)) \
            if all(k in deltas for k in (P, 2 * P, 3 * P)) else None
        if const is not None:
            scale = 1.0 / np.sqrt(Np) if Np else 1.0
            holds = bool(err <= const * w_norm * scale + 1e-12)
    return ConvergenceReport(err, float(w_norm), ratio, const, holds,
                          residual_monotone(result.residual_trace))
