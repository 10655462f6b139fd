"""Experiment orchestration: configuration, episode loop and metrics output."""
from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import aircomp, channel, data, learner, scheduler, topology
from .errors import ConfigurationError, SimulationError

MODES = ("ideal", "digital", "analog", "tdma_digital", "tdma_analog", "none")
CSV_HEADER = ["episode_seed", "block_index", "iteration", "mode", "avg_test_accuracy"]


class RunError(SimulationError):
    """A module error raised inside an episode, tagged with where it happened."""


@dataclass
class ExperimentConfig:
    mode: str = "ideal"
    seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    # topology
    K: int = 8
    p: float = 0.1
    d_min: float = 20.0
    d_max: float = 200.0
    # channel (dB-domain inputs, converted once in channel_params())
    a0_db: float = -33.5
    d0_m: float = 1.0
    pathloss_exp: float = 3.76
    n0_dbm: float | None = -169.0
    pbar_mw: float = 1.0
    channel_uses_per_block: int = 30000
    # learning
    eta0: float = 0.05
    eta_decay_iters: float = 500.0
    tau: int = 10
    batch_size: int = 32
    blocks: int = 100
    init_scale: float = 0.0
    # digital compression
    quant_bits: int = 16
    charge_header_bits: bool = False
    lossless_digital: bool = False
    # analog
    sparsity_k: int | None = None
    lasso_lambda_scale: float = 1.0
    lasso_iters: int = 200
    deep_fade_threshold: float = 1e-2
    allow_overdetermined: bool = False
    cap_slot_uses: bool = True
    # data
    dataset: str = "synthetic"
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    data_seed: int = 12345
    synth_classes: int = 10
    synth_dim: int = 20
    synth_per_class: int = 200
    synth_test_per_class: int = 100
    synth_spread: float = 1.0
    samples_per_device: int = 2000
    # output
    out: str = "metrics.csv"
    emit_plot_script: bool = False
    per_device_accuracy: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if not self.seeds:
            raise ConfigurationError("at least one episode seed is required")
        if self.K < 2:
            raise ConfigurationError("K must be >= 2")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError("p must be in [0, 1]")
        if self.tau < 1 or self.batch_size < 1 or self.blocks < 0:
            raise ConfigurationError("tau, batch_size must be >= 1 and blocks >= 0")
        if self.dataset not in ("synthetic", "idx"):
            raise ConfigurationError("dataset must be 'synthetic' or 'idx'")
        if self.quant_bits < 1:
            raise ConfigurationError("quant_bits must be >= 1")
        if self.deep_fade_threshold < 0:
            raise ConfigurationError("deep_fade_threshold must be >= 0")
        self.channel_params()
        return self

    def channel_params(self) -> channel.ChannelParams:
        return channel.ChannelParams.from_db(self.a0_db, self.d0_m, self.pathloss_exp,
                                             self.n0_dbm, self.pbar_mw,
                                             self.channel_uses_per_block)

    def learning(self) -> learner.LearningConfig:
        return learner.LearningConfig(self.eta0, self.eta_decay_iters, self.tau,
                                      self.batch_size, self.blocks)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class MetricsRow:
    episode_seed: int
    block_index: int
    iteration: int
    mode: str
    avg_test_accuracy: float
    per_device_accuracy: tuple | None = None


def _coerce(name: str, raw: str, current):
    text = raw.strip()
    if name == "seeds":
        try:
            return [int(s) for s in text.replace(",", " ").split()]
        except ValueError:
            raise ConfigurationError(f"bad seed list {text!r}") from None
    if name == "n0_dbm" and text.lower() in ("off", "none", "-inf"):
        return None
    if name == "sparsity_k" and text.lower() in ("auto", "none", ""):
        return None
    kind = type(current)
    if name in ("n0_dbm",):
        kind = float
    if name == "sparsity_k":
        kind = int
    try:
        if kind is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigurationError(f"bad value for {name}: {text!r}") from None


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) over ``base``."""
    cfg = dataclasses.replace(base) if base else ExperimentConfig()
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, value, getattr(cfg, key)))
    return cfg


def load_config(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, base)


def make_tdma_schedule(graph: topology.ConnectivityGraph, flavor: str):
    """One transmitter per slot (digital) or one star center per round (analog).

    Analog rounds visit centers in node order and only activate edges not
    covered by an earlier round, so every edge is exchanged once.
    """
    K = graph.node_count
    if flavor == "digital":
        return scheduler.DigitalSchedule(tuple(range(K)), K)
    if flavor != "analog":
        raise ConfigurationError(f"unknown TDMA flavor {flavor!r}")
    residual = set(graph.edges)
    rounds = []
    for c in range(K):
        active = frozenset(e for e in residual if c in e)
        residual -= active
        rounds.append(scheduler.AnalogRound(frozenset({c}), active))
    return scheduler.AnalogSchedule(K, tuple(rounds))


def evaluate_accuracy(devices, test: data.Dataset, per_device: bool = False):
    """Mean top-1 test accuracy over devices (optionally with the per-device list)."""
    if len(test) == 0:
        raise ValueError("empty test set")
    accs = [learner.accuracy(dev.theta, test) for dev in devices]
    mean = float(np.mean(accs))
    return (mean, accs) if per_device else mean


def load_datasets(cfg: ExperimentConfig):
    if cfg.dataset == "idx":
        return (data.load_idx(cfg.train_images, cfg.train_labels),
                data.load_idx(cfg.test_images, cfg.test_labels))
    train = data.synth_dataset(cfg.data_seed, cfg.synth_classes, cfg.synth_dim,
                               cfg.synth_per_class, cfg.synth_spread)
    test = data.synth_dataset(cfg.data_seed, cfg.synth_classes, cfg.synth_dim,
                              cfg.synth_test_per_class, cfg.synth_spread,
                              sample_seed=cfg.data_seed + 1_000_003)
    return train, test


def _schedule_for(cfg: ExperimentConfig, graph):
    if cfg.mode == "digital":
        return scheduler.make_digital_schedule(graph)
    if cfg.mode == "analog":
        return scheduler.make_analog_schedule(graph)
    if cfg.mode == "tdma_digital":
        return make_tdma_schedule(graph, "digital")
    if cfg.mode == "tdma_analog":
        return make_tdma_schedule(graph, "analog")
    return None


def run_episode(cfg: ExperimentConfig, seed: int, train: data.Dataset, test: data.Dataset,
                stats: dict | None = None, trace: list | None = None) -> list[MetricsRow]:
    """Train one episode and return one metrics row per communication block.

    ``trace``, when given, collects ``(iteration, [theta_i ...])`` after
    every block for diagnostics.
    """
    params = cfg.channel_params()
    lcfg = cfg.learning()
    graph = topology.generate_star_extended(seed, cfg.K, cfg.p, cfg.d_min, cfg.d_max)
    part = data.partition_noniid(seed, train, cfg.K, cfg.samples_per_device)
    d = learner.param_dim(train.dim, train.num_classes)
    devices = learner.make_devices([part.shard(train, i) for i in range(cfg.K)], d, seed,
                                   cfg.init_scale)

    W = topology.build_mixing_matrix(graph) if cfg.mode != "none" else None
    schedule = _schedule_for(cfg, graph)
    analog = cfg.mode in ("analog", "tdma_analog")
    matrix = None
    if analog and schedule.num_slots:
        m = params.N // schedule.num_slots
        if cfg.cap_slot_uses and not cfg.allow_overdetermined:
            # an analog slot never needs d or more channel uses
            m = min(m, d - 1)
        matrix = aircomp.build_compression_matrix(seed, m, d,
                                                  allow_overdetermined=cfg.allow_overdetermined)
    dcfg = learner.DigitalConfig(cfg.quant_bits, cfg.charge_header_bits, cfg.lossless_digital)
    acfg = learner.AnalogConfig(cfg.sparsity_k, cfg.lasso_lambda_scale, cfg.lasso_iters,
                                cfg.deep_fade_threshold)

    rows = []
    for t in range(1, lcfg.total_iterations + 1):
        if t % lcfg.tau:
            for dev in devices:
                learner.local_step(dev, t, lcfg)
            continue
        block = t // lcfg.tau
        if cfg.mode == "none":
            for dev in devices:
                learner.local_step(dev, t, lcfg)
        elif cfg.mode == "ideal":
            learner.ideal_consensus(devices, W, t, lcfg)
        else:
            states = channel.sample_block_fading(seed, block, graph)
            if analog:
                noise = channel.block_rng(seed, block, channel.NOISE_STREAM) if params.N0 else None
                if matrix is None:
                    for dev in devices:
                        learner.local_step(dev, t, lcfg)
                else:
                    learner.analog_consensus(devices, W, schedule, matrix, states, params, lcfg,
                                             t, acfg, noise, stats)
            else:
                learner.digital_consensus(devices, W, schedule, states, params, lcfg, t, dcfg,
                                          stats)
        if cfg.per_device_accuracy:
            mean, accs = evaluate_accuracy(devices, test, per_device=True)
        else:
            mean, accs = evaluate_accuracy(devices, test), None
        rows.append(MetricsRow(seed, block, t, cfg.mode, mean,
                               tuple(accs) if accs is not None else None))
        if trace is not None:
            trace.append((t, [dev.theta.copy() for dev in devices]))
    return rows


def run_experiment(cfg: ExperimentConfig, stats: dict | None = None) -> list[MetricsRow]:
    """Run every episode seed in ``cfg`` and return rows ordered by (seed, block)."""
    cfg.validate()
    train, test = load_datasets(cfg)
    rows = []
    for seed in cfg.seeds:
        try:
            rows.extend(run_episode(cfg, seed, train, test, stats))
        except SimulationError as exc:
            raise RunError(f"episode seed {seed} ({cfg.mode}): {exc}") from exc
    rows.sort(key=lambda r: (r.episode_seed, r.block_index))
    return rows


def write_metrics(rows, path, emit_plot_script: bool = False) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in rows:
                writer.writerow([r.episode_seed, r.block_index, r.iteration, r.mode,
                                 f"{r.avg_test_accuracy:.6f}"])
        if emit_plot_script:
            plot_script_path(path).write_text(PLOT_SCRIPT.format(csv_name=path.name))
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc
    return path


def read_metrics(path) -> list[MetricsRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        return [MetricsRow(int(s), int(b), int(t), m, float(a)) for s, b, t, m, a in reader]


def plot_script_path(csv_path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(csv_path.stem + "_plot.py")


PLOT_SCRIPT = '''"""Average test accuracy versus communication blocks, one line per mode."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent
acc = defaultdict(lambda: defaultdict(list))
with open(here / "{csv_name}", newline="") as fh:
    for row in csv.DictReader(fh):
        acc[row["mode"]][int(row["block_index"])].append(float(row["avg_test_accuracy"]))

for mode, by_block in sorted(acc.items()):
    blocks = sorted(by_block)
    plt.plot(blocks, [sum(by_block[b]) / len(by_block[b]) for b in blocks], label=mode)
plt.xlabel("communication blocks")
plt.ylabel("average test accuracy")
plt.legend()
plt.savefig(here / "{csv_name}".replace(".csv", ".png"), dpi=150)
'''
