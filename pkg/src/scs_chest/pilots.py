"""Non-orthogonal pilots and the sensing operators they induce.

All antennas of a group share the same pilot subcarriers ``xi`` and each
antenna modulates them with its own unit-modulus random phase sequence.
With 0-based DFT exponents, column ``(m, l)`` of the sensing matrix is

    psi[k, (l-1)*M + (m-1)] = exp(j*theta[k, m]) * exp(-2j*pi*(xi[k]-1)*(l-1)/N)

so every column has norm ``sqrt(Np)``.
"""

import json
from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .errors import InvalidArgumentError


def uniform_placement(N, Np, I0=1):
    """Equally spaced pilot subcarriers ``I0 + (k-1)*floor(N/Np)`` (1-based)."""
    if not 1 <= Np <= N:
        raise InvalidArgumentError(f"need 1 <= Np <= N, got Np={Np}, N={N}")
    step = N // Np
    if not 1 <= I0 <= step:
        raise InvalidArgumentError(f"need 1 <= I0 <= floor(N/Np) = {step}, got I0={I0}")
    return I0 + step * np.arange(Np)


def random_placement(N, Np, rng, offset=0, stride=1):
    """``Np`` distinct subcarriers drawn uniformly, sorted (1-based).

    Candidates are ``offset+1, offset+1+stride, ...``; groups using the same
    ``stride`` and distinct offsets get disjoint sets.
    """
    pool = np.arange(offset, N, stride) + 1
    if not 1 <= Np <= len(pool):
        raise InvalidArgumentError(f"need 1 <= Np <= {len(pool)}, got Np={Np}")
    return np.sort(rng.choice(pool, size=Np, replace=False))


def random_phases(Np, M, rng):
    """I.i.d. phases uniform on [0, 2*pi), shape ``(Np, M)``."""
    if Np < 1 or M < 1:
        raise InvalidArgumentError(f"need Np, M >= 1, got Np={Np}, M={M}")
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(Np, M))
    # uniform() can round up to the open endpoint
    theta[theta >= 2.0 * np.pi] = 0.0
    return theta


@dataclass(frozen=True)
class PilotConfig:
    """Pilot subcarrier set and per-antenna phase matrix.

    Build instances with :meth:`from_seed`; the phases (and, for random
    placement, the subcarriers) are a deterministic function of ``seed``.
    """

    N: int
    Np: int
    I0: int
    xi: np.ndarray
    theta: np.ndarray
    seed: int = None
    placement: str = "uniform"
    group: tuple = (0, 1)

    def __post_init__(self):
        self.xi.setflags(write=False)
        self.theta.setflags(write=False)

    @property
    def M(self):
        return self.theta.shape[1]

    @property
    def eta(self):
        """Pilot occupation ratio Np/N."""
        return self.Np / self.N

    @property
    def pilots(self):
        """Unit-modulus pilot symbols, shape ``(Np, M)``."""
        return np.exp(1j * self.theta)

    @classmethod
    def from_seed(cls, N, Np, M, seed, I0=1, placement="uniform", group=(0, 1)):
        """Uniform placement starts at ``I0``; random placement draws from the
        subcarriers reserved for ``group = (index, count)``."""
        rng = np.random.default_rng(seed)
        if placement == "uniform":
            xi = uniform_placement(N, Np, I0)
        elif placement == "random":
            xi = random_placement(N, Np, rng, offset=group[0], stride=group[1])
            I0 = int(xi[0])
        else:
            raise InvalidArgumentError(f"unknown placement {placement!r}")
        theta = random_phases(Np, M, rng)
        return cls(N, Np, int(I0), xi, theta, seed, placement, tuple(group))

    def to_json(self):
        if self.seed is None:
            raise InvalidArgumentError("only seeded pilot configs are serializable")
        doc = {"N": self.N, "Np": self.Np, "I0": self.I0, "seed": self.seed, "M": self.M}
        if self.placement != "uniform":
            doc["placement"] = self.placement
            doc["group"] = list(self.group)
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls.from_seed(doc["N"], doc["Np"], doc["M"], doc["seed"], doc.get("I0", 1),
                             doc.get("placement", "uniform"), tuple(doc.get("group", (0, 1))))


@dataclass(frozen=True)
class SensingMatrix:
    """The ``Np x (M*L)`` operator in tap-major (Psi) column order.

    ``phi_index[j]`` is the antenna-major (Phi) column that Psi column ``j``
    came from, i.e. ``psi == phi[:, phi_index]``.
    """

    psi: np.ndarray
    L: int
    M: int
    N: int
    phi_index: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.phi_index is None:
            j = np.arange(self.L * self.M)
            l, m = np.divmod(j, self.M)
            object.__setattr__(self, "phi_index", m * self.L + l)
        self.psi.setflags(write=False)

    @property
    def Np(self):
        return self.psi.shape[0]

    @property
    def pilot_occupation_eta(self):
        return self.Np / self.N

    @property
    def phi(self):
        """Antenna-major operator ``[Phi_1, ..., Phi_M]``."""
        out = np.empty_like(self.psi)
        out[:, self.phi_index] = self.psi
        return out

    def block(self, l):
        """``Psi_l``, the ``Np x M`` block of tap ``l`` (1-based)."""
        return self.psi[:, (l - 1) * self.M : l * self.M]

    def columns(self, support):
        """``Psi_Omega`` for a 1-based tap set, in increasing tap order."""
        cols = block_columns(np.sort(np.asarray(support, dtype=int)) - 1, self.M)
        return self.psi[:, cols]

    def rearrange(self, h_tilde):
        """Map an antenna-major aggregate CIR (Phi order) to Psi order."""
        return np.asarray(h_tilde)[self.phi_index]

    def unrearrange(self, d_tilde):
        """Inverse of :meth:`rearrange`."""
        out = np.empty_like(np.asarray(d_tilde))
        out[self.phi_index] = d_tilde
        return out


def block_columns(blocks, size):
    """Column indices of 0-based ``blocks`` of width ``size``."""
    blocks = np.asarray(blocks, dtype=int)
    return (blocks[:, None] * size + np.arange(size)).ravel()


def partial_dft(xi, N, L):
    """Rows ``xi`` (1-based) of the first ``L`` DFT columns, unnormalized."""
    n = np.asarray(xi, dtype=float)[:, None] - 1.0
    k = np.arange(L, dtype=float)[None, :]
    # reduce the exponent mod N before scaling to keep phases exact
    return np.exp(-2j * np.pi * np.mod(n * k, N) / N)


def assemble_sensing(cfg, L):
    """Build ``Psi`` from a pilot configuration for a channel of ``L`` taps."""
    if L > cfg.N:
        raise InvalidArgumentError(f"L={L} exceeds N={cfg.N}")
    F = partial_dft(cfg.xi, cfg.N, L)
    psi = (F[:, :, None] * cfg.pilots[:, None, :]).reshape(cfg.Np, L * cfg.M)
    return SensingMatrix(psi, L, cfg.M, cfg.N)


@dataclass
class CoherenceStats:
    mu_max: float
    values: np.ndarray
    counts: np.ndarray
    edges: np.ndarray


def coherence_stats(S, bins=50):
    """Normalized cross-correlations over all distinct column pairs."""
    A = S.psi if isinstance(S, SensingMatrix) else np.asarray(S)
    if A.shape[1] < 2:
        raise InvalidArgumentError("coherence needs at least two columns")
    A = A / np.linalg.norm(A, axis=0)
    G = np.abs(A.conj().T @ A)
    iu = np.triu_indices(A.shape[1], k=1)
    values = np.minimum(G[iu], 1.0)
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return CoherenceStats(float(values.max()), values, counts, edges)


def _isometry_defect(A, Np):
    sv = np.linalg.svd(A / np.sqrt(Np), compute_uv=False)
    return max(1.0 - sv[-1] ** 2, sv[0] ** 2 - 1.0)


def srip_probe(S, s, trials, rng=None):
    """Monte-Carlo lower bound on the structured RIP constant of order ``s``.

    Draws ``trials`` tap supports of size ``s`` and returns the largest
    deviation from isometry of ``Psi_Omega / sqrt(Np)``. When ``trials`` is
    at least ``C(L, s)`` every support is enumerated and the value is exact.
    """
    if not 1 <= s <= S.L:
        raise InvalidArgumentError(f"need 1 <= s <= L={S.L}, got s={s}")
    if trials < 1:
        raise InvalidArgumentError("trials must be >= 1")
    if trials >= comb(S.L, s):
        supports = combinations(range(1, S.L + 1), s)
    else:
        rng = np.random.default_rng() if rng is None else rng
        supports = (rng.choice(S.L, size=s, replace=False) + 1 for _ in range(trials))
    return max(_isometry_defect(S.columns(om), S.Np) for om in supports)
