"""
Antenna groups and pilot sharing over time
==========================================

With 64 antennas split into two groups of 32, each group gets its own set
of pilot subcarriers. Pilots can also be sent only every f_p symbols, with
the channels of the symbols in between interpolated. How much that costs
depends on how fast the channel changes.
"""

import numpy as np

from scs_chest import ChannelSpec, GroupConfig, PilotConfig, PowerDelayProfile
from scs_chest import doppler_from_speed, estimate_grouped, generate_channel
from scs_chest.harness import pilot_overhead

fd = doppler_from_speed(60, 2e9)
spec = ChannelSpec(L=64, M=64, P=6, R=6, profile=PowerDelayProfile.itu_va(), doppler_hz=fd)
print(f"60 km/h at 2 GHz: Doppler {fd:.1f} Hz, symbol correlation {spec.correlation:.4f}")

pilots = [PilotConfig.from_seed(4096, 390, 32, seed=10 + g, I0=1 + g) for g in range(2)]
for f_p in (1, 5):
    print(f"f_p={f_p}: pilot overhead {pilot_overhead(390, 64, 4096, f_p, 32):.2%}")

# %%
rng = np.random.default_rng(0)
block = generate_channel(spec, rng)
for f_p in (1, 5):
    est = estimate_grouped(block, GroupConfig(N_G=2, f_p=f_p), pilots, 30.0, rng, p_th=0.04)
    err = np.sum(np.abs(est.d_hat[:, :5] - block.d[:, :5]) ** 2, axis=0)
    per_symbol = 10 * np.log10(err / np.sum(np.abs(block.d[:, :5]) ** 2, axis=0))
    print(f"f_p={f_p}: NMSE per symbol (dB)", np.round(per_symbol, 1))
