"""Seeded Monte-Carlo experiments and CSV output.

An experiment is described by a JSON document (see :func:`load_config`).
Each trial derives its generators from ``(seed, trial)`` only, so every
operating point of a sweep sees the same channel and pilot realizations
and results do not depend on how trials are scheduled across workers.
"""

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from itertools import combinations

import numpy as np

from .channel_model import ChannelSpec, doppler_from_speed, generate_channel, profile_by_name
from .errors import ConfigError, InvalidArgumentError, InvalidSpecError, SingularSystemError
from .link_sim import ALGORITHMS, GroupConfig, LinkConfig, ber_eval, estimate_grouped
from .pilots import PilotConfig, assemble_sensing
from .recovery import StopConfig, assp, structured_ls

SCENARIOS = (
    "mse_vs_overhead",
    "mse_vs_snr",
    "sparsity_histogram",
    "temporal_joint",
    "pilot_sharing",
    "ber_curve",
    "pilot_placement_compare",
)

# noise floor used by the stopping rule at the tabulated SNRs
P_TH_TABLE = ((10.0, 0.1), (15.0, 0.08), (20.0, 0.06), (25.0, 0.05), (30.0, 0.04))

CSV_COLUMNS = ("scenario", "algorithm", "snr_db", "np", "eta_p", "r", "f_p", "trials",
               "metric", "value", "ci95", "crlb")

MSE_METRICS = ("nmse", "nmse_db")

DEFAULT_PRESET = {
    "N": 4096,
    "Ng": 64,
    "channel": {"L": 64, "M": 64, "P": 6, "R": 1, "profile": "itu-va",
                "carrier_hz": 2e9, "bandwidth_hz": 10e6, "speed_kmh": 0.0},
    "group": {"N_G": 2, "f_p": 1},
    "np_list": [250, 300, 350, 390, 400, 450],
    "snr_db_list": [10, 15, 20, 25, 30],
    "trials": 200,
    "seed": 2016,
    "algorithms": ["assp", "oracle_assp", "oracle_ls", "asp"],
    "placement": "uniform",
    "K": 8,
}


def p_th_for_snr(snr_db):
    """Noise floor for an SNR, linear between table points, clamped outside."""
    snrs, vals = zip(*P_TH_TABLE)
    return float(np.interp(snr_db, snrs, vals))


def pilot_overhead(Np, M, N, f_p, M_G):
    """Pilot overhead ratio ``Np*M / (N*f_p*M_G)``."""
    return Np * M / (N * f_p * M_G)


@dataclass
class ExperimentConfig:
    scenario: str
    channel: ChannelSpec
    group: GroupConfig
    N: int = 4096
    Ng: int = 64
    snr_db_list: list = field(default_factory=lambda: [30.0])
    np_list: list = field(default_factory=lambda: [390])
    eta_p_list: list = None
    r_list: list = None
    fp_list: list = None
    trials: int = 200
    seed: int = 0
    algorithms: list = field(default_factory=lambda: ["assp"])
    placement: str = "uniform"
    link: LinkConfig = field(default_factory=LinkConfig)
    groups_simulated: str = "all"
    p_th: float = None

    @property
    def M_G(self):
        return self.channel.M // self.group.N_G

    def eta_p(self, Np, f_p=None):
        return pilot_overhead(Np, self.channel.M, self.N,
                              self.group.f_p if f_p is None else f_p, self.M_G)


def _problems(cfg):
    out = []
    if cfg.scenario not in SCENARIOS:
        out.append(f"scenario {cfg.scenario!r} not in {SCENARIOS}")
    if cfg.trials < 1:
        out.append(f"trials must be >= 1, got {cfg.trials}")
    if not cfg.snr_db_list:
        out.append("snr_db_list is empty")
    if not cfg.np_list:
        out.append("np_list is empty")
    bad = [a for a in cfg.algorithms if a not in ALGORITHMS]
    if bad:
        out.append(f"unknown algorithms {bad}; expected a subset of {ALGORITHMS}")
    if not cfg.algorithms:
        out.append("algorithms is empty")
    if cfg.placement not in ("uniform", "random"):
        out.append(f"placement must be 'uniform' or 'random', got {cfg.placement!r}")
    if cfg.groups_simulated not in ("all", "one"):
        out.append("groups_simulated must be 'all' or 'one'")
    if cfg.channel.M % cfg.group.N_G:
        out.append(f"M={cfg.channel.M} not divisible by N_G={cfg.group.N_G}")
    if cfg.channel.L > cfg.Ng:
        out.append(f"L={cfg.channel.L} exceeds the guard interval Ng={cfg.Ng}")
    for Np in cfg.np_list:
        if not 1 <= Np <= cfg.N:
            out.append(f"Np={Np} outside [1, N={cfg.N}]")
        elif cfg.placement == "uniform" and cfg.group.N_G > cfg.N // Np:
            out.append(f"Np={Np}: {cfg.group.N_G} groups do not fit in pilot interval {cfg.N // Np}")
    if cfg.eta_p_list is not None:
        if len(cfg.eta_p_list) != len(cfg.np_list):
            out.append("eta_p_list and np_list differ in length")
        else:
            for Np, eta in zip(cfg.np_list, cfg.eta_p_list):
                derived = cfg.eta_p(Np)
                if abs(derived - eta) > 1e-4:
                    out.append(f"eta_p={eta:.6f} does not match Np={Np} (derived {derived:.6f})")
    if cfg.scenario == "temporal_joint" and not cfg.r_list:
        out.append("temporal_joint needs r_list")
    if cfg.scenario == "pilot_sharing" and not cfg.fp_list:
        out.append("pilot_sharing needs fp_list")
    if cfg.scenario == "ber_curve" and cfg.link.K > cfg.channel.M:
        out.append(f"K={cfg.link.K} exceeds M={cfg.channel.M}")
    if cfg.p_th is not None and cfg.p_th < 0:
        out.append("p_th must be >= 0")
    return out


def validate(cfg):
    problems = _problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def config_from_dict(doc):
    """Build and validate an :class:`ExperimentConfig` from a JSON-like dict.

    ``"preset": "paper"`` preloads the simulation defaults; any other key
    overrides them. ``eta_p_list`` without ``np_list`` derives the pilot
    counts by rounding.
    """
    problems = []
    doc = dict(doc)
    derive_np = "eta_p_list" in doc and "np_list" not in doc
    preset = doc.pop("preset", None)
    if preset == "paper":
        doc = _merge(DEFAULT_PRESET, doc)
    elif preset is not None:
        problems.append(f"unknown preset {preset!r}")
    known = {f for f in ExperimentConfig.__dataclass_fields__} | {"K"}
    unknown = sorted(set(doc) - known)
    if unknown:
        problems.append(f"unknown keys {unknown}")
    if "scenario" not in doc:
        problems.append("missing 'scenario'")
    ch = dict(doc.get("channel", {}))
    grp = dict(doc.get("group", {}))

    channel = group = None
    try:
        bw = ch.get("bandwidth_hz", 10e6)
        profile = profile_by_name(ch.pop("profile", "itu-va"), bw)
        speed = ch.pop("speed_kmh", None)
        if speed is not None:
            ch["doppler_hz"] = doppler_from_speed(speed, ch.get("carrier_hz", 2e9))
        ch.setdefault("P", len(profile) if profile else 6)
        N, Ng = doc.get("N", 4096), doc.get("Ng", 64)
        ch.setdefault("symbol_duration_s", (N + Ng) / bw)
        channel = ChannelSpec(profile=profile, **ch)
    except (InvalidSpecError, TypeError, KeyError) as exc:
        problems.append(f"channel: {exc}")
    try:
        group = GroupConfig(**grp)
        if channel is not None:
            group.validate(channel.M)
    except (InvalidArgumentError, TypeError) as exc:
        problems.append(f"group: {exc}")

    if problems or channel is None or group is None:
        raise ConfigError(problems)

    kwargs = {k: v for k, v in doc.items() if k not in ("channel", "group", "K")}
    if "K" in doc:
        kwargs["link"] = LinkConfig(K=doc["K"])
    try:
        cfg = ExperimentConfig(channel=channel, group=group, **kwargs)
    except TypeError as exc:
        raise ConfigError([str(exc)]) from None
    if derive_np:
        scale = cfg.N * cfg.group.f_p * cfg.M_G / cfg.channel.M
        cfg.np_list = [int(round(e * scale)) for e in cfg.eta_p_list]
    return validate(cfg)


def load_config(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    if not isinstance(doc, dict):
        raise ConfigError([f"{path}: top level must be an object"])
    return config_from_dict(doc)


@dataclass
class ResultRecord:
    scenario: str
    algorithm: str
    snr_db: float
    Np: int
    eta_p: float
    R: int
    f_p: int
    trial_count: int
    metric_name: str
    metric_value: float
    ci95: float

    @property
    def crlb(self):
        """Linear-estimator reference 1/SNR (linear) for MSE metrics, else None."""
        if self.metric_name in MSE_METRICS:
            return 10.0 ** (-self.snr_db / 10.0)
        return None


# -- trial execution ------------------------------------------------------------


@dataclass(frozen=True)
class _Point:
    snr_db: float
    Np: int
    R: int = 1
    f_p: int = 1
    placement: str = "uniform"


def _points(cfg):
    snrs = [float(s) for s in cfg.snr_db_list]
    if cfg.scenario == "temporal_joint":
        return [_Point(s, cfg.np_list[0], R=r) for r in cfg.r_list for s in snrs]
    if cfg.scenario == "pilot_sharing":
        return [_Point(s, cfg.np_list[0], R=f + 1 if f > 1 else 1, f_p=f)
                for f in cfg.fp_list for s in snrs]
    if cfg.scenario == "pilot_placement_compare":
        return [_Point(s, Np, placement=p) for p in ("uniform", "random")
                for Np in cfg.np_list for s in snrs]
    if cfg.scenario == "ber_curve":
        return [_Point(s, cfg.np_list[0]) for s in snrs]
    return [_Point(s, Np, R=cfg.channel.R, f_p=cfg.group.f_p, placement=cfg.placement)
            for Np in cfg.np_list for s in snrs]


def _trial_rng(cfg, trial, *stream):
    return np.random.default_rng([cfg.seed, trial, *stream])


def _pilots(cfg, trial, pt, n_groups, M_G):
    seed = int(_trial_rng(cfg, trial, 1, pt.Np).integers(2**31))
    return [PilotConfig.from_seed(cfg.N, pt.Np, M_G, seed + g, I0=1 + g,
                                  placement=pt.placement, group=(g, n_groups))
            for g in range(n_groups)]


def _nmse(d, d_hat):
    return float(np.sum(np.abs(d - d_hat) ** 2) / np.sum(np.abs(d) ** 2))


def _s_hats(est):
    return [r.s_hat for grp in est.group_results for r in grp]


def _run_trial(args):
    """Per-trial metrics keyed by (point index, algorithm, metric)."""
    cfg, trial = args
    out = {}
    M_G = cfg.M_G
    n_groups = cfg.group.N_G
    if cfg.groups_simulated == "one" and cfg.scenario != "ber_curve":
        # groups are statistically identical; precoding needs every antenna
        n_groups = 1
    M_sim = M_G * n_groups
    for ip, pt in enumerate(_points(cfg)):
        p_th = cfg.p_th if cfg.p_th is not None else p_th_for_snr(pt.snr_db)
        pilots = _pilots(cfg, trial, pt, n_groups, M_G)
        group = replace(cfg.group, N_G=n_groups, M_G=M_G, f_p=pt.f_p)
        if cfg.scenario == "ber_curve":
            _ber_trial(cfg, trial, ip, pt, pilots, group, p_th, out)
            continue
        spec = cfg.channel.with_(M=M_sim, R=pt.R)
        block = generate_channel(spec, _trial_rng(cfg, trial, 0))
        # the symbol after the last interpolated one belongs to the next period
        keep = slice(0, pt.f_p) if pt.f_p > 1 else slice(None)
        algorithms = cfg.algorithms
        if cfg.scenario == "sparsity_histogram":
            algorithms = ["assp"]
        for alg in algorithms:
            est = estimate_grouped(block, group, pilots, pt.snr_db,
                                   _trial_rng(cfg, trial, 2, ip).spawn(n_groups), p_th, alg)
            out[(ip, alg, "nmse")] = _nmse(block.d[:, keep], est.d_hat[:, keep])
            if alg in ("assp", "asp"):
                out[(ip, alg, "s_hat")] = float(np.mean(_s_hats(est)))
            if alg == "assp" and cfg.scenario == "sparsity_histogram":
                out[(ip, alg, "s_hat_values")] = _s_hats(est)
    return out


def _ber_trial(cfg, trial, ip, pt, pilots, group, p_th, out):
    K, M = cfg.link.K, cfg.channel.M
    spec = cfg.channel.with_(R=1)
    rng = _trial_rng(cfg, trial, 0)
    users = [generate_channel(spec, rng) for _ in range(K)]
    h_true = np.stack([u.cir()[:, :, 0] for u in users])
    per_trial_bits = math.ceil(100_000 / cfg.trials)
    ber_rng = _trial_rng(cfg, trial, 3, ip)
    out[(ip, "perfect", "ber")] = float(
        ber_eval(h_true, h_true, cfg.link, [pt.snr_db], ber_rng, N=cfg.N,
                 min_bits=per_trial_bits)[0])
    for alg in cfg.algorithms:
        rngs = _trial_rng(cfg, trial, 2, ip).spawn(K)
        ests = [estimate_grouped(u, group, pilots, pt.snr_db, r.spawn(group.N_G), p_th, alg)
                for u, r in zip(users, rngs)]
        h_est = np.stack([e.d_hat.reshape(spec.L, M, 1)[:, :, 0].T for e in ests])
        out[(ip, alg, "ber")] = float(
            ber_eval(h_est, h_true, cfg.link, [pt.snr_db], _trial_rng(cfg, trial, 3, ip),
                     N=cfg.N, min_bits=per_trial_bits)[0])


def _mean_ci(values):
    v = np.asarray(values, dtype=float)
    if len(v) < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(1.96 * v.std(ddof=1) / np.sqrt(len(v)))


def _label(alg, pt, cfg):
    return f"{alg}[{pt.placement}]" if cfg.scenario == "pilot_placement_compare" else alg


def aggregate(cfg, trial_outputs):
    """Reduce per-trial metric dicts to :class:`ResultRecord` rows."""
    points = _points(cfg)
    keys = []
    for out in trial_outputs:
        for k in out:
            if k not in keys:
                keys.append(k)
    records = []
    for ip, alg, metric in sorted(keys, key=lambda k: (k[0], _alg_order(k[1]), k[2])):
        pt = points[ip]
        vals = [o[(ip, alg, metric)] for o in trial_outputs if (ip, alg, metric) in o]
        base = dict(scenario=cfg.scenario, algorithm=_label(alg, pt, cfg), snr_db=pt.snr_db,
                    Np=pt.Np, eta_p=cfg.eta_p(pt.Np, pt.f_p), R=pt.R, f_p=pt.f_p,
                    trial_count=len(vals))
        if metric == "s_hat_values":
            flat = np.concatenate([np.atleast_1d(v) for v in vals])
            for s in range(int(flat.max()) + 1):
                frac = float(np.mean(flat == s))
                ci = 1.96 * math.sqrt(frac * (1 - frac) / len(flat))
                records.append(ResultRecord(metric_name=f"p_s_hat_{s}", metric_value=frac,
                                            ci95=ci, **base))
            continue
        mean, ci = _mean_ci(vals)
        records.append(ResultRecord(metric_name=metric, metric_value=mean, ci95=ci, **base))
        if metric == "nmse":
            db = 10 * math.log10(mean) if mean > 0 else -math.inf
            ci_db = 10 * math.log10(1 + ci / mean) if mean > 0 else 0.0
            if math.isfinite(db):
                records.append(ResultRecord(metric_name="nmse_db", metric_value=db, ci95=ci_db,
                                            **base))
    return records


def _alg_order(alg):
    order = list(ALGORITHMS) + ["perfect"]
    return order.index(alg) if alg in order else len(order)


def run(config, workers=1, trial_log=None):
    """Execute all trials of ``config`` and aggregate them.

    ``trial_log`` (a path) receives one JSON line of raw metrics per trial.
    """
    cfg = validate(config) if isinstance(config, ExperimentConfig) else config_from_dict(config)
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_trial, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        outputs = [_run_trial(j) for j in jobs]
    if trial_log is not None:
        with open(trial_log, "w") as fh:
            for t, out in enumerate(outputs):
                row = {"|".join(map(str, k)): v for k, v in out.items()}
                fh.write(json.dumps({"trial": t, "metrics": row}) + "\n")
    return aggregate(cfg, outputs)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(round(x, 12))
    return str(x)


def emit_csv(records, path, timestamp=False):
    """Write records with the fixed column order; ``crlb`` blank for non-MSE rows.

    With ``timestamp=True`` a leading ``#`` comment records the write time;
    everything else is a deterministic function of the records.
    """
    if not records:
        raise InvalidArgumentError("no records to write")
    try:
        with open(path, "w", newline="") as fh:
            if timestamp:
                fh.write(f"# generated {datetime.now(timezone.utc).isoformat()}\n")
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for r in records:
                w.writerow([r.scenario, r.algorithm, _fmt(float(r.snr_db)), r.Np,
                            _fmt(float(r.eta_p)), r.R, r.f_p, r.trial_count, r.metric_name,
                            _fmt(float(r.metric_value)), _fmt(float(r.ci95)), _fmt(r.crlb)])
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def records_to_dicts(records):
    return [asdict(r) | {"crlb": r.crlb} for r in records]


# -- toy exhaustive check ---------------------------------------------------------


def exhaustive_ls(Y, S, s):
    """Best ``s``-tap structured LS fit by enumerating every support.

    Returns ``(d_hat, support)`` minimizing the residual norm; singular
    supports are skipped.
    """
    best = (np.inf, None, None)
    for om in combinations(range(1, S.L + 1), s):
        try:
            d = structured_ls(Y, S, om)
        except SingularSystemError:
            continue
        res = np.linalg.norm(np.atleast_2d(Y.T).T - S.psi @ d)
        if res < best[0]:
            best = (res, d, np.array(om))
    return best[1], best[2]


@dataclass
class SelftestReport:
    trials: int
    exact: int
    agree: int
    both: int
    # subspace pursuit at Np = 2*s*M stalls on roughly 1.4% of random draws
    min_rate: float = 0.95

    @property
    def ok(self):
        return self.exact >= math.ceil(self.min_rate * self.trials) and self.agree == self.both


def toy_selftest(trials=100, seed=0, tol=1e-8):
    """Noiseless toy instances (L=8, M=2, Np=8, P=2) against exhaustive search."""
    spec = ChannelSpec(L=8, M=2, P=2, R=1)
    exact = agree = both = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        block = generate_channel(spec, rng)
        cfg = PilotConfig.from_seed(8, 8, 2, int(rng.integers(2**31)), placement="random")
        S = assemble_sensing(cfg, spec.L)
        Y = S.psi @ block.d
        res = assp(Y, S, StopConfig(p_th=0.0))
        err = np.linalg.norm(res.d_hat - block.d) / np.linalg.norm(block.d)
        ok = err < tol and np.array_equal(res.support, block.support)
        d_ex, om = exhaustive_ls(Y, S, spec.P)
        ex_ok = d_ex is not None and np.linalg.norm(d_ex - block.d) / np.linalg.norm(block.d) < tol
        exact += ok
        if ok and ex_ok:
            both += 1
            agree += np.allclose(res.d_hat, d_ex, atol=tol) and np.array_equal(res.support, om)
    return SelftestReport(trials, exact, agree, both)
