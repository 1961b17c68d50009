"""Configuration-driven experiment runner with CSV output.

Experiments average game equilibria, large-system predictions and the
social optimum over seeded Monte Carlo realizations.  All variants within
one trial consume the same realization (same starting codes, gains and
positions), matching how the comparison curves are meant to be read.

Three CSV schemas are emitted:

  sweep       experiment,K,variant,mean_utility_bpj,mean_tx_power_w,
              mean_sinr_db,frac_at_pmax,trials
  profile     rank,quantile_gain,power_w,sinr_db,utility_bpj,method
  efficiency  gamma,packet_success,efficiency

Powers are Watts and SINRs linear everywhere inside the package; decibels
appear only in the CSV files.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import channel, games, lsa, tmse_opt
from .model import NetworkState, SystemConfig, efficiency, packet_success, utility_all

SWEEP_HEADER = ("experiment,K,variant,mean_utility_bpj,mean_tx_power_w,"
                "mean_sinr_db,frac_at_pmax,trials")
PROFILE_HEADER = "rank,quantile_gain,power_w,sinr_db,utility_bpj,method"
EFFICIENCY_HEADER = "gamma,packet_success,efficiency"

OUTPUT_DIR_ENV = "EECDMA_OUTPUT_DIR"

_DB_FLOOR = 1e-30  # keeps dB conversions finite for identically zero SINRs


class ExperimentKind(enum.Enum):
    FIG_EFFICIENCY = "FIG_EFFICIENCY"
    GAME_SWEEP = "GAME_SWEEP"
    POWER_PROFILE = "POWER_PROFILE"
    LSA_SWEEP = "LSA_SWEEP"
    OVERSAT_UTILITY = "OVERSAT_UTILITY"


@dataclass
class ExperimentSpec:
    experiment: ExperimentKind
    cfg: SystemConfig
    model: channel.ChannelModel
    variants: list = field(default_factory=lambda: [
        games.GameVariant.POWER_ONLY_MF, games.GameVariant.POWER_MMSE,
        games.GameVariant.FULL_CROSS_LAYER])
    k_values: list = field(default_factory=lambda: [4, 8, 12, 16, 20, 24])
    trials: int = 200
    seed: int = 0
    output_path: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.k_values:
            raise ValueError("k_values must be nonempty")


@dataclass
class ResultRow:
    experiment: str
    K: int
    variant: str
    mean_utility: float   # bit/Joule
    mean_tx_power: float  # W
    mean_sinr: float      # linear
    frac_at_pmax: float
    trials: int


def aggregate(rows: list) -> ResultRow:
    """Arithmetic mean of per-trial rows (same experiment/K/variant)."""
    if not rows:
        raise ValueError("cannot aggregate an empty set of trials")
    first = rows[0]
    return ResultRow(
        experiment=first.experiment, K=first.K, variant=first.variant,
        mean_utility=float(np.mean([r.mean_utility for r in rows])),
        mean_tx_power=float(np.mean([r.mean_tx_power for r in rows])),
        mean_sinr=float(np.mean([r.mean_sinr for r in rows])),
        frac_at_pmax=float(np.mean([r.frac_at_pmax for r in rows])),
        trials=len(rows))


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

_CONFIG_KEYS = {
    "experiment", "variants", "k_values", "trials", "seed", "output_path",
    "N", "M", "L", "R", "noise_psd", "p_max_w", "p_max_dbw",
    "r_a", "r_b", "n_exp", "partitions",
}


def parse_config(text: str) -> ExperimentSpec:
    """Parse a flat key = value experiment description.

    Lines are ``key = value`` with ``#`` comments; list values are comma
    separated.  Unknown keys are rejected.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: unknown configuration key {key!r}")
        if key in raw:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    if "experiment" not in raw:
        raise ValueError("configuration must set 'experiment'")
    if "p_max_w" in raw and "p_max_dbw" in raw:
        raise ValueError("set only one of p_max_w and p_max_dbw")

    kind = ExperimentKind(raw["experiment"])
    if "p_max_w" in raw:
        p_max = float(raw["p_max_w"])
    else:
        p_max = 10.0 ** (float(raw.get("p_max_dbw", "-25")) / 10.0)
    M = int(raw.get("M", "120"))
    k_values = [int(v) for v in raw.get("k_values", "4,8,12,16,20,24").split(",")]
    cfg = SystemConfig(
        N=int(raw.get("N", "16")), K=k_values[0],
        noise_psd=float(raw.get("noise_psd", "1e-9")),
        M=M, L=int(raw.get("L", str(M))), R=float(raw.get("R", "1e5")),
        p_max=p_max)
    seed = int(raw.get("seed", "0"))
    model = channel.ChannelModel(
        r_a=float(raw.get("r_a", "10")), r_b=float(raw.get("r_b", "1000")),
        n_exp=float(raw.get("n_exp", "2")),
        partitions=int(raw.get("partitions", "200")), seed=seed)
    variants = [games.GameVariant(v.strip())
                for v in raw.get(
                    "variants",
                    "POWER_ONLY_MF,POWER_MMSE,FULL_CROSS_LAYER").split(",")]
    return ExperimentSpec(
        experiment=kind, cfg=cfg, model=model, variants=variants,
        k_values=k_values, trials=int(raw.get("trials", "200")), seed=seed,
        output_path=raw.get("output_path", f"{kind.value.lower()}.csv"))


def load_config(path: str) -> ExperimentSpec:
    return parse_config(Path(path).read_text())


# ---------------------------------------------------------------------------
# per-trial computations
# ---------------------------------------------------------------------------

def initial_state(real: channel.Realization, cfg: SystemConfig) -> NetworkState:
    # small positive start keeps utilities defined from the first iteration
    p0 = np.full(cfg.K, cfg.p_max / 100.0)
    return NetworkState(p0, real.gains.copy(), real.codes.copy(),
                        real.codes.copy())


def _trial_row(kind, K, variant_name, powers, sinrs, cfg) -> ResultRow:
    utils = utility_all(powers, sinrs, cfg)
    at_cap = powers >= cfg.p_max * (1 - 1e-9)
    return ResultRow(experiment=kind.value, K=K, variant=variant_name,
                     mean_utility=float(np.mean(utils)),
                     mean_tx_power=float(np.mean(powers)),
                     mean_sinr=float(np.mean(sinrs)),
                     frac_at_pmax=float(np.mean(at_cap)), trials=1)


def _nan_row(kind, K, variant_name) -> ResultRow:
    nan = float("nan")
    return ResultRow(kind.value, K, variant_name, nan, nan, nan, nan, 0)


def _lsa_inputs_for(cfg: SystemConfig, model: channel.ChannelModel,
                    gamma_bar: float, K: int) -> lsa.LsaInputs:
    return lsa.LsaInputs.from_config(
        cfg, lambda y: channel.sampled_gain_quantile(model, y), gamma_bar, K=K)


def _mmse_outcome_at_powers(real, powers, cfg):
    """Achieved SINRs when fixed powers are paired with MMSE receivers."""
    state = NetworkState(powers, real.gains, real.codes,
                         np.zeros_like(real.codes))
    from .model import mmse_receiver_bank, sinr_all
    state.receivers = mmse_receiver_bank(state, cfg)
    return sinr_all(state, cfg)


def _run_game_sweep(spec: ExperimentSpec) -> list:
    rows = []
    for K in spec.k_values:
        cfg = dataclasses.replace(spec.cfg, K=K)
        per_variant = {v: [] for v in spec.variants}
        for t in range(spec.trials):
            real = channel.sample(spec.model, cfg, t)
            for variant in spec.variants:
                try:
                    out = games.run_game(initial_state(real, cfg), cfg,
                                         variant)
                    per_variant[variant].append(_trial_row(
                        spec.experiment, K, variant.value,
                        out.state.powers, out.sinrs, cfg))
                except ValueError as exc:
                    print(f"warning: K={K} {variant.value}: {exc}",
                          file=sys.stderr)
        for variant in spec.variants:
            trials = per_variant[variant]
            rows.append(aggregate(trials) if trials
                        else _nan_row(spec.experiment, K, variant.value))
    return rows


def _run_lsa_sweep(spec: ExperimentSpec) -> list:
    gamma_bar = games.target_sinr(spec.cfg.M)
    rows = []
    for K in spec.k_values:
        cfg = dataclasses.replace(spec.cfg, K=K)
        inputs = _lsa_inputs_for(cfg, spec.model, gamma_bar, K)
        try:
            p_rx = lsa.solve_receive_power(inputs, lsa.estimate_u2(inputs))
            p_eq19 = lsa._equal_power_received(inputs)
        except lsa.InfeasibleLoadError as exc:
            print(f"warning: K={K}: {exc}", file=sys.stderr)
            rows.extend(_nan_row(spec.experiment, K, name) for name in
                        ("POWER_MMSE", "LSA_DISTRIBUTED", "EQ19_BASELINE"))
            continue
        buckets = {name: [] for name in
                   ("POWER_MMSE", "LSA_DISTRIBUTED", "EQ19_BASELINE")}
        for t in range(spec.trials):
            real = channel.sample(spec.model, cfg, t)
            out = games.run_game(initial_state(real, cfg), cfg,
                                 games.GameVariant.POWER_MMSE)
            buckets["POWER_MMSE"].append(_trial_row(
                spec.experiment, K, "POWER_MMSE", out.state.powers, out.sinrs,
                cfg))
            g2 = real.gains ** 2
            for name, target_rx in (("LSA_DISTRIBUTED", p_rx),
                                    ("EQ19_BASELINE", p_eq19)):
                powers = np.minimum(target_rx / g2, cfg.p_max)
                sinrs = _mmse_outcome_at_powers(real, powers, cfg)
                buckets[name].append(_trial_row(
                    spec.experiment, K, name, powers, sinrs, cfg))
        for name, trials in buckets.items():
            rows.append(aggregate(trials))
    return rows


def _profile_accumulate(acc, powers, sinrs, utils, order):
    acc["power"] += powers[order]
    acc["sinr"] += sinrs[order]
    acc["utility"] += utils[order]


def _run_power_profile(spec: ExperimentSpec):
    """Per-rank transmit power profile: centralized, distributed, baseline."""
    K = spec.k_values[0]
    cfg = dataclasses.replace(spec.cfg, K=K)
    gamma_bar = games.target_sinr(cfg.M)
    inputs = _lsa_inputs_for(cfg, spec.model, gamma_bar, K)
    p_rx = lsa.solve_receive_power(inputs, lsa.estimate_u2(inputs))
    p_eq19 = lsa._equal_power_received(inputs)
    methods = ("centralized", "lsa_distributed", "eq19_baseline")
    acc = {m: {"power": np.zeros(K), "sinr": np.zeros(K), "utility": np.zeros(K)}
           for m in methods}
    for t in range(spec.trials):
        real = channel.sample(spec.model, cfg, t)
        order = np.argsort(real.gains)[::-1]
        out = games.run_game(initial_state(real, cfg), cfg,
                             games.GameVariant.POWER_MMSE)
        _profile_accumulate(acc["centralized"], out.state.powers, out.sinrs,
                            out.utilities, order)
        g2 = real.gains ** 2
        for name, target_rx in (("lsa_distributed", p_rx),
                                ("eq19_baseline", p_eq19)):
            powers = np.minimum(target_rx / g2, cfg.p_max)
            sinrs = _mmse_outcome_at_powers(real, powers, cfg)
            _profile_accumulate(acc[name], powers, sinrs,
                                utility_all(powers, sinrs, cfg), order)
    quantiles = channel.sampled_sorted_gain_quantiles(spec.model, K)
    profile_rows = []
    for method in methods:
        for i in range(K):
            profile_rows.append((i + 1, quantiles[i],
                                 acc[method]["power"][i] / spec.trials,
                                 acc[method]["sinr"][i] / spec.trials,
                                 acc[method]["utility"][i] / spec.trials,
                                 method))
    summary = []
    for method in methods:
        mean_p = acc[method]["power"] / spec.trials
        # capped ranks sit exactly at the cap in every trial, so the
        # per-rank mean recovers the capped fraction
        frac = float(np.mean(mean_p >= cfg.p_max * (1 - 1e-9)))
        summary.append(ResultRow(spec.experiment.value, K, method,
                                 float(np.mean(acc[method]["utility"])
                                       / spec.trials),
                                 float(mean_p.mean()),
                                 float(np.mean(acc[method]["sinr"])
                                       / spec.trials),
                                 frac, spec.trials))
    return profile_rows, summary


def _run_oversat(spec: ExperimentSpec):
    """Per-rank utility profile: game, oversaturated prediction, social.

    The oversaturated analysis (and the social optimum) model the regime
    where every user reaches the target SINR at equal received power, so
    the games start from the equal-received-power point with tight code
    convergence; the equal-received equilibrium is a knife edge of the
    alternation, and a sloppy code phase tips the run into a stratified
    fixed point the analysis does not describe.
    """
    K = spec.k_values[0]
    cfg = dataclasses.replace(spec.cfg, K=K)
    gamma_bar = games.target_sinr(cfg.M)
    inputs = _lsa_inputs_for(cfg, spec.model, gamma_bar, K)
    gamma_soc = lsa.social_optimum_sinr(inputs, cfg.M)
    p_rx_soc = (gamma_soc * cfg.noise_half
                / (1.0 - gamma_soc * (inputs.alpha - 1.0)))
    p_rx_game = lsa.profile_wbe(inputs).receive_power
    gcfg = games.GameConfig(
        power_tol=1e-4,
        tmse=tmse_opt.TmseConfig(max_iters=20000, tmse_tol=1e-15),
        tmse_warm_max_iters=20000)
    methods = ("game", "lsa_wbe", "social_optimum")
    acc = {m: {"power": np.zeros(K), "sinr": np.zeros(K), "utility": np.zeros(K)}
           for m in ("game", "social_optimum")}
    for t in range(spec.trials):
        real = channel.sample(spec.model, cfg, t)
        order = np.argsort(real.gains)[::-1]
        g2 = real.gains ** 2
        p0 = np.minimum(p_rx_game / g2, cfg.p_max)
        state = NetworkState(p0, real.gains.copy(), real.codes.copy(),
                             real.codes.copy())
        out = games.run_game(state, cfg, games.GameVariant.FULL_CROSS_LAYER,
                             gcfg)
        _profile_accumulate(acc["game"], out.state.powers, out.sinrs,
                            out.utilities, order)
        # the social solution assumes no cap binds; powers follow the
        # equal-received-power rule for the realized gains
        p_soc = p_rx_soc / g2
        s_soc = np.full(K, gamma_soc)
        _profile_accumulate(acc["social_optimum"], p_soc, s_soc,
                            utility_all(p_soc, s_soc, cfg), order)
    wbe = lsa.profile_wbe(inputs)
    quantiles = channel.sampled_sorted_gain_quantiles(spec.model, K)
    profile_rows = []
    for method in methods:
        for i in range(K):
            if method == "lsa_wbe":
                vals = (wbe.powers[i], wbe.sinrs[i], wbe.utilities[i])
            else:
                vals = (acc[method]["power"][i] / spec.trials,
                        acc[method]["sinr"][i] / spec.trials,
                        acc[method]["utility"][i] / spec.trials)
            profile_rows.append((i + 1, quantiles[i]) + vals + (method,))
    summary = []
    for method in methods:
        util = np.array([r[4] for r in profile_rows if r[5] == method])
        power = np.array([r[2] for r in profile_rows if r[5] == method])
        sinr_lin = np.array([r[3] for r in profile_rows if r[5] == method])
        frac = float(np.mean(power >= cfg.p_max * (1 - 1e-9)))
        summary.append(ResultRow(spec.experiment.value, K, method,
                                 float(util.mean()), float(power.mean()),
                                 float(sinr_lin.mean()), frac, spec.trials))
    return profile_rows, summary


def _efficiency_table(cfg: SystemConfig) -> list:
    grid = np.round(np.linspace(0.0, 12.0, 121), 10)
    return [(g, packet_success(g, cfg.M), efficiency(g, cfg.M)) for g in grid]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def _resolve_output(path: str) -> Path:
    override = os.environ.get(OUTPUT_DIR_ENV)
    p = Path(path)
    if override:
        p = Path(override) / p.name
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _db(x: float) -> float:
    return 10.0 * math.log10(max(x, _DB_FLOOR))


def _write_manifest(path: Path, spec: ExperimentSpec) -> None:
    manifest = {
        "experiment": spec.experiment.value,
        "seed": spec.seed,
        "trials": spec.trials,
        "k_values": spec.k_values,
        "variants": [v.value for v in spec.variants],
        "system": dataclasses.asdict(spec.cfg),
        "channel": dataclasses.asdict(spec.model),
        "output": path.name,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path.with_suffix(path.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def run_experiment(spec: ExperimentSpec) -> list:
    """Run one experiment, write its CSV and manifest, return summary rows."""
    out_path = _resolve_output(spec.output_path or
                               f"{spec.experiment.value.lower()}.csv")
    if spec.experiment is ExperimentKind.FIG_EFFICIENCY:
        _write_csv(out_path, EFFICIENCY_HEADER, _efficiency_table(spec.cfg))
        _write_manifest(out_path, spec)
        return []
    if spec.experiment in (ExperimentKind.GAME_SWEEP, ExperimentKind.LSA_SWEEP):
        runner = (_run_game_sweep if spec.experiment is ExperimentKind.GAME_SWEEP
                  else _run_lsa_sweep)
        rows = runner(spec)
        csv_rows = [(r.experiment, r.K, r.variant, r.mean_utility,
                     r.mean_tx_power, _db(r.mean_sinr) if r.trials else
                     float("nan"), r.frac_at_pmax, r.trials) for r in rows]
        _write_csv(out_path, SWEEP_HEADER, csv_rows)
        _write_manifest(out_path, spec)
        return rows
    runner = (_run_power_profile
              if spec.experiment is ExperimentKind.POWER_PROFILE
              else _run_oversat)
    profile_rows, summary = runner(spec)
    csv_rows = [(rank, q, p, _db(s), u, method)
                for rank, q, p, s, u, method in profile_rows]
    _write_csv(out_path, PROFILE_HEADER, csv_rows)
    _write_manifest(out_path, spec)
    return summary


def run_lsa_prediction(spec: ExperimentSpec) -> Path:
    """Write the pure large-system profile for a profile experiment.

    POWER_PROFILE emits the MMSE-receiver prediction; OVERSAT_UTILITY emits
    the oversaturated equal-received-power prediction.  No Monte Carlo.
    """
    if spec.experiment not in (ExperimentKind.POWER_PROFILE,
                               ExperimentKind.OVERSAT_UTILITY):
        raise ValueError("lsa prediction needs a profile experiment")
    K = spec.k_values[0]
    cfg = dataclasses.replace(spec.cfg, K=K)
    gamma_bar = games.target_sinr(cfg.M)
    inputs = _lsa_inputs_for(cfg, spec.model, gamma_bar, K)
    if spec.experiment is ExperimentKind.POWER_PROFILE:
        pred = lsa.profile_mmse(inputs)
        method = "lsa_mmse"
    else:
        pred = lsa.profile_wbe(inputs)
        method = "lsa_wbe"
    quantiles = channel.sampled_sorted_gain_quantiles(spec.model, K)
    rows = [(i + 1, quantiles[i], pred.powers[i], _db(pred.sinrs[i]),
             pred.utilities[i], method) for i in range(K)]
    out_path = _resolve_output(spec.output_path or f"{method}.csv")
    _write_csv(out_path, PROFILE_HEADER, rows)
    _write_manifest(out_path, spec)
    return out_path
