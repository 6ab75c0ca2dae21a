"""
Downlink BER with estimated channels
====================================

A 64-antenna base station serves 8 users with zero-forcing precoding and
16-QAM. The precoder is built from each user's estimated channel, so
estimation error shows up as residual inter-user interference.
"""

import numpy as np

from scs_chest import ChannelSpec, GroupConfig, LinkConfig, PilotConfig, PowerDelayProfile
from scs_chest import ber_eval, estimate_grouped, generate_channel

K, M = 8, 64
spec = ChannelSpec(L=64, M=M, P=6, profile=PowerDelayProfile.itu_va())
pilots = [PilotConfig.from_seed(4096, 390, 32, seed=20 + g, I0=1 + g) for g in range(2)]
rng = np.random.default_rng(1)

users = [generate_channel(spec, rng) for _ in range(K)]
h_true = np.stack([u.cir()[:, :, 0] for u in users])

# %%
snrs = [5.0, 10.0, 15.0]
print("SNR (dB)      ", snrs)
print("perfect CSI   ", ber_eval(h_true, h_true, LinkConfig(K=K), snrs, np.random.default_rng(2)))
for snr in snrs:
    ests = [estimate_grouped(u, GroupConfig(N_G=2), pilots, snr, rng, p_th=0.1) for u in users]
    h_est = np.stack([e.d_hat.reshape(64, M).T for e in ests])
    ber = ber_eval(h_est, h_true, LinkConfig(K=K), [snr], np.random.default_rng(2))[0]
    print(f"ASSP CSI at {snr:4.1f} dB: BER {ber:.4f}")
