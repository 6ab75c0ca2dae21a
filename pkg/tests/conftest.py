import numpy as np
import pytest

from scs_chest.channel_model import ChannelSpec, generate_channel
from scs_chest.pilots import PilotConfig, assemble_sensing


def toy_instance(seed, L=8, M=2, Np=8, N=8, P=2, R=1):
    """Random-support channel with random-phase pilots on a small grid."""
    rng = np.random.default_rng(seed)
    block = generate_channel(ChannelSpec(L=L, M=M, P=P, R=R), rng)
    cfg = PilotConfig.from_seed(N, Np, M, int(rng.integers(2**31)))
    return block, assemble_sensing(cfg, L)


@pytest.fixture
def toy():
    return toy_instance(0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, ok, detail in sorted(results):
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
