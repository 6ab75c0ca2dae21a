"""Delay-domain MIMO channels with spatio-temporal common support.

A channel realization is stored in the stacked layout used by the recovery
code: an ``(L*M, R)`` complex matrix whose rows ``(l-1)*M : l*M`` hold the
gains of tap ``l`` for all ``M`` transmit antennas (rows) over ``R`` OFDM
symbols (columns). Tap indices exposed by the public API are 1-based.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import j0

from .errors import InvalidSpecError

SPEED_OF_LIGHT = 299_792_458.0

# ITU-R M.1225 Vehicular-A
ITU_VA_DELAYS_NS = (0.0, 310.0, 710.0, 1090.0, 1730.0, 2510.0)
ITU_VA_POWERS_DB = (0.0, -1.0, -9.0, -10.0, -15.0, -20.0)

PROFILE_NAMES = ("itu-va", "uniform-random")


@dataclass(frozen=True)
class PowerDelayProfile:
    """Tap delays (1-based sample indices) and relative tap powers in dB."""

    tap_delays: tuple
    tap_powers_db: tuple
    name: str = "custom"

    def __post_init__(self):
        delays = tuple(int(d) for d in self.tap_delays)
        powers = tuple(float(p) for p in self.tap_powers_db)
        if len(delays) != len(powers):
            raise InvalidSpecError("tap_delays and tap_powers_db differ in length")
        if len(set(delays)) != len(delays):
            raise InvalidSpecError(f"tap delays must be distinct, got {delays}")
        object.__setattr__(self, "tap_delays", delays)
        object.__setattr__(self, "tap_powers_db", powers)

    @classmethod
    def itu_va(cls, bandwidth_hz=10e6):
        """Vehicular-A delays rounded to the nearest sample at ``bandwidth_hz``."""
        delays = [int(np.floor(d * 1e-9 * bandwidth_hz + 0.5)) + 1 for d in ITU_VA_DELAYS_NS]
        return cls(tuple(delays), ITU_VA_POWERS_DB, name="itu-va")

    def linear_powers(self):
        """Linear tap powers normalized to unit sum, in ``tap_delays`` order."""
        p = 10.0 ** (np.asarray(self.tap_powers_db) / 10.0)
        return p / p.sum()

    def __len__(self):
        return len(self.tap_delays)


@dataclass(frozen=True)
class ChannelSpec:
    """Parameters of one channel realization.

    ``profile=None`` selects the uniform-random mode: ``P`` taps drawn
    without replacement from ``1..L`` with equal power ``1/P``.
    """

    L: int
    M: int
    P: int
    R: int = 1
    carrier_hz: float = 2e9
    bandwidth_hz: float = 10e6
    profile: PowerDelayProfile = None
    doppler_hz: float = 0.0
    # (N + Ng) / f_s for the default 4096-point OFDM with a 64-sample guard
    symbol_duration_s: float = 4160 / 10e6

    def __post_init__(self):
        problems = []
        if self.L < 1:
            problems.append(f"L must be >= 1, got {self.L}")
        if self.M < 1:
            problems.append(f"M must be >= 1, got {self.M}")
        if self.R < 1:
            problems.append(f"R must be >= 1, got {self.R}")
        if not 0 < self.P <= self.L:
            problems.append(f"need 0 < P <= L, got P={self.P}, L={self.L}")
        if self.doppler_hz < 0:
            problems.append("doppler_hz must be non-negative")
        if self.symbol_duration_s <= 0:
            problems.append("symbol_duration_s must be positive")
        if self.profile is not None:
            if len(self.profile) != self.P:
                problems.append(f"profile has {len(self.profile)} taps but P={self.P}")
            bad = [d for d in self.profile.tap_delays if not 1 <= d <= self.L]
            if bad:
                problems.append(f"profile tap delays {bad} outside [1, {self.L}]")
        if problems:
            raise InvalidSpecError("; ".join(problems))

    @property
    def randomized(self):
        return self.profile is None

    @property
    def correlation(self):
        """Symbol-to-symbol gain correlation J0(2*pi*f_D*T_sym)."""
        return float(j0(2.0 * np.pi * self.doppler_hz * self.symbol_duration_s))

    def with_(self, **changes):
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class ChannelBlock:
    """Structured-sparse equivalent CIR matrix and its true support."""

    d: np.ndarray
    support: np.ndarray
    spec: ChannelSpec
    tap_powers: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.d.setflags(write=False)
        self.support.setflags(write=False)

    @property
    def L(self):
        return self.spec.L

    @property
    def M(self):
        return self.d.shape[0] // self.spec.L

    @property
    def R(self):
        return self.d.shape[1]

    def tap(self, l):
        """The ``M x R`` block of tap ``l`` (1-based)."""
        return self.d[(l - 1) * self.M : l * self.M]

    def cir(self):
        """CIRs as an ``(M, L, R)`` array, ``h[m, l, r]``."""
        return self.d.reshape(self.L, self.M, self.R).transpose(1, 0, 2)

    def antennas(self, start, stop):
        """Sub-block restricted to antennas ``start:stop`` (0-based slice)."""
        d = self.d.reshape(self.L, self.M, self.R)[:, start:stop, :].reshape(-1, self.R)
        spec = self.spec.with_(M=stop - start)
        return ChannelBlock(np.array(d), np.array(self.support), spec, self.tap_powers)


def doppler_from_speed(speed_kmh, carrier_hz):
    """Maximum Doppler shift v*f_c/c for a speed in km/h."""
    return speed_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT


def profile_by_name(name, bandwidth_hz=10e6):
    """Resolve ``"itu-va"`` or ``"uniform-random"`` (returns None)."""
    if name == "itu-va":
        return PowerDelayProfile.itu_va(bandwidth_hz)
    if name == "uniform-random":
        return None
    raise InvalidSpecError(f"unknown profile {name!r}; expected one of {PROFILE_NAMES}")


def sample_support(spec, rng):
    """Return the sorted 1-based tap indices of the common support."""
    if spec.profile is not None:
        return np.array(sorted(spec.profile.tap_delays), dtype=int)
    return np.sort(rng.choice(spec.L, size=spec.P, replace=False)) + 1


def _tap_powers(spec, support):
    if spec.profile is None:
        return np.full(len(support), 1.0 / spec.P)
    lookup = dict(zip(spec.profile.tap_delays, spec.profile.linear_powers()))
    return np.array([lookup[int(l)] for l in support])


def _cgauss(rng, shape, var):
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_gains(spec, support, rng):
    """Draw symbol-1 gains on ``support``; later symbols are left at zero.

    Gains are independent across antennas and taps, with per-tap variance
    from the profile so that each antenna's expected energy is one.
    """
    support = np.asarray(support, dtype=int)
    if len(support) != spec.P:
        raise InvalidSpecError(f"support has {len(support)} taps, spec.P={spec.P}")
    powers = _tap_powers(spec, support)
    d = np.zeros((spec.L * spec.M, spec.R), dtype=complex)
    for l, p in zip(support, powers):
        d[(l - 1) * spec.M : l * spec.M, 0] = _cgauss(rng, spec.M, p)
    return ChannelBlock(d, support.copy(), spec, powers)


def evolve_gains(block, spec, rng):
    """Fill symbols 2..R with a first-order Gauss-Markov recursion.

    ``g[r+1] = rho*g[r] + sqrt(1-rho^2)*v`` with ``rho = spec.correlation``
    and ``v`` drawn with the tap's own variance. The support is unchanged.
    """
    rho = spec.correlation
    innov = np.sqrt(max(0.0, 1.0 - rho * rho))
    d = np.array(block.d)
    M = spec.M
    for l, p in zip(block.support, block.tap_powers):
        rows = slice((l - 1) * M, l * M)
        for r in range(1, spec.R):
            d[rows, r] = rho * d[rows, r - 1]
            if innov > 0:
                d[rows, r] += innov * _cgauss(rng, M, p)
    return ChannelBlock(d, np.array(block.support), spec, block.tap_powers)


def generate_channel(spec, rng):
    """Support, symbol-1 gains and temporal evolution in one call."""
    support = sample_support(spec, rng)
    block = sample_gains(spec, support, rng)
    return evolve_gains(block, spec, rng) if spec.R > 1 else block
