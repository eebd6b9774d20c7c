"""Training, evaluation and sweeps for the proposed and baseline feedback schemes."""
from __future__ import annotations

import csv
import logging
import statistics
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .codec import NormalizationSpec, channel_to_tensor, extract_ratio, ratio_to_tensor
from .dataset import ChannelConfig, EpisodeDataset
from .errors import ConfigError
from .metrics import average_nmse_db, format_db, nmse
from .nn import TrainConfig, build_ae1, build_ae2, count_flops, load_model, save_model, train
from .protocol import BsEndpoint, LinkConfig, UeEndpoint, equivalent_overhead

log = logging.getLogger(__name__)

METHODS = ("proposed", "baseline")


@dataclass(frozen=True)
class ExperimentConfig:
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    T: int = 9
    gamma1: Fraction = Fraction(1, 4)
    gamma2: Fraction = Fraction(1, 4)
    n_q: int | None = 4
    method: str = "proposed"
    seed: int = 0
    ae1_filters: int = 16
    ae2_hidden: int | None = None
    ae1_train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=64))
    ae2_train: TrainConfig = field(default_factory=lambda: TrainConfig(batch_size=256))
    max_train_samples: int | None = None  # cap on AE1/AE2 training vectors
    max_eval_episodes: int | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.T < 0:
            raise ConfigError("T must be >= 0")
        if self.T > self.channel.T:
            raise ConfigError(f"T={self.T} exceeds the dataset episode length T={self.channel.T}")
        self.n_s1  # noqa: B018 - validates gamma1
        if self.method == "proposed":
            self.n_s2  # noqa: B018

    @property
    def n_ris(self) -> int:
        return self.channel.geometry.n_ris

    @property
    def n_t(self) -> int:
        return self.channel.geometry.n_t

    @property
    def n_s1(self) -> int:
        return _code_size(Fraction(self.gamma1), 2 * self.n_ris * self.n_t, "gamma1")

    @property
    def n_s2(self) -> int:
        return _code_size(Fraction(self.gamma2), 2 * self.n_ris, "gamma2")

    @property
    def effective_T(self) -> int:
        return 0 if self.method == "baseline" else self.T


def _code_size(gamma, n_real, name):
    n = gamma * n_real
    if n.denominator != 1 or not 1 <= n <= n_real:
        raise ConfigError(f"{name}={gamma} gives a non-integer or out-of-range code size {float(n)}")
    return int(n)


@dataclass
class FeedbackModels:
    ae1: object
    channel_spec: NormalizationSpec
    ae2: object = None
    ratio_spec: NormalizationSpec | None = None
    histories: dict = field(default_factory=dict)

    def link(self, T, n_q) -> LinkConfig:
        return LinkConfig(T=T, n_q=n_q, channel_spec=self.channel_spec,
                          ratio_spec=self.ratio_spec if T > 0 else None)


# -- data preparation ---------------------------------------------------------

def anchor_ratios(episodes, T) -> np.ndarray:
    """Ratio vectors ``p(t)``, ``t = 1..T``, against each episode's true ``H(0)``."""
    H0 = np.broadcast_to(episodes[:, :1], episodes[:, 1:T + 1].shape)
    return extract_ratio(H0, episodes[:, 1:T + 1]).values


def _cap(x, n):
    return x if n is None else x[:n]


def fit_specs(ds: EpisodeDataset, T=None) -> tuple[NormalizationSpec, NormalizationSpec]:
    T = ds.T if T is None else T
    train_eps = ds.split("train")
    channel_spec = NormalizationSpec.fit(train_eps)
    ratio_spec = NormalizationSpec.fit(anchor_ratios(train_eps, T)) if T > 0 else NormalizationSpec(1.0)
    return channel_spec, ratio_spec


def channel_tensors(ds, split, spec, limit=None):
    H = ds.split(split)
    H = H.reshape((-1,) + H.shape[2:])
    return channel_to_tensor(_cap(H, limit), spec)


def ratio_tensors(ds, split, spec, T, limit=None):
    p = anchor_ratios(ds.split(split), T)
    p = p.reshape((-1, p.shape[-1]))
    return ratio_to_tensor(_cap(p, limit), spec)


def _val_limit(limit):
    return None if limit is None else max(1, limit // 8)


def train_ae1(cfg: ExperimentConfig, ds: EpisodeDataset, spec: NormalizationSpec, seed=None):
    seed = cfg.seed if seed is None else seed
    model = build_ae1(cfg.n_ris, cfg.n_t, cfg.n_s1, filters=cfg.ae1_filters, seed=seed)
    x_train = channel_tensors(ds, "train", spec, cfg.max_train_samples)
    x_val = channel_tensors(ds, "val", spec, _val_limit(cfg.max_train_samples))
    log.info("training AE1 n_s1=%d on %d samples", cfg.n_s1, x_train.shape[0])
    return train(model, x_train, x_val, replace(cfg.ae1_train, seed=seed))


def train_ae2(cfg: ExperimentConfig, ds: EpisodeDataset, spec: NormalizationSpec, seed=None):
    seed = cfg.seed if seed is None else seed
    model = build_ae2(cfg.n_ris, cfg.n_s2, hidden=cfg.ae2_hidden, seed=seed)
    T = ds.T
    x_train = ratio_tensors(ds, "train", spec, T, cfg.max_train_samples)
    x_val = ratio_tensors(ds, "val", spec, T, _val_limit(cfg.max_train_samples))
    log.info("training AE2 n_s2=%d on %d samples", cfg.n_s2, x_train.shape[0])
    return train(model, x_train, x_val, replace(cfg.ae2_train, seed=seed))


def train_models(cfg: ExperimentConfig, ds: EpisodeDataset) -> FeedbackModels:
    """Train AE1, and AE2 unless the method is the baseline."""
    _check_dims(cfg, ds)
    channel_spec, ratio_spec = fit_specs(ds)
    r1 = train_ae1(cfg, ds, channel_spec)
    models = FeedbackModels(r1.model, channel_spec, histories={"ae1": r1.history})
    if cfg.method == "proposed" and ds.T > 0:
        r2 = train_ae2(cfg, ds, ratio_spec)
        models.ae2, models.ratio_spec = r2.model, ratio_spec
        models.histories["ae2"] = r2.history
    return models


def _check_dims(cfg, ds):
    g = ds.geometry
    if (g.n_ris, g.n_t) != (cfg.n_ris, cfg.n_t):
        raise ConfigError(f"dataset geometry {g.n_ris}x{g.n_t} does not match config {cfg.n_ris}x{cfg.n_t}")
    if cfg.T > ds.T:
        raise ConfigError(f"T={cfg.T} exceeds dataset episode length {ds.T}")


# -- model files ----------------------------------------------------------------

def save_models(models: FeedbackModels, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_model(models.ae1, out_dir / "ae1.rcnn", extras={"scale": models.channel_spec.scale})
    if models.ae2 is not None:
        save_model(models.ae2, out_dir / "ae2.rcnn", extras={"scale": models.ratio_spec.scale})
    return out_dir


def load_models(model_dir) -> FeedbackModels:
    model_dir = Path(model_dir)
    ae1, extra1 = load_model(model_dir / "ae1.rcnn")
    models = FeedbackModels(ae1, NormalizationSpec(float(extra1["scale"][0])))
    if (model_dir / "ae2.rcnn").exists():
        ae2, extra2 = load_model(model_dir / "ae2.rcnn")
        models.ae2, models.ratio_spec = ae2, NormalizationSpec(float(extra2["scale"][0]))
    return models


# -- evaluation -------------------------------------------------------------------

def run_episode(link: LinkConfig, ae1, ae2, episode, ue_ae1=None, ue_ae2=None) -> list[float]:
    """Drive one UE/BS pair through ``episode`` and return linear NMSE per interval.

    The link's ``T`` selects the scheme (``T = 0`` sends every interval in
    full).  ``ue_ae1``/``ue_ae2`` override the compressors on the UE side.
    """
    ue = UeEndpoint(link, ue_ae1 or ae1, ue_ae2 or ae2)
    bs = BsEndpoint(link, ae1, ae2)
    out = []
    for H_t in episode:
        msg = ue.step(H_t)
        H_hat = bs.step(msg)
        out.append(nmse(H_t, H_hat))
    return out


@dataclass
class EvalResult:
    method: str
    T: int
    per_interval: np.ndarray  # mean linear NMSE at each t
    n_equ: float

    @property
    def avg_linear(self) -> float:
        return float(np.mean(self.per_interval))

    @property
    def avg_db(self) -> float:
        return average_nmse_db(self.per_interval)


def evaluate(cfg: ExperimentConfig, models: FeedbackModels, episodes, method=None) -> EvalResult:
    method = cfg.method if method is None else method
    T = 0 if method == "baseline" else cfg.T
    link = models.link(T, cfg.n_q)
    episodes = _cap(np.asarray(episodes), cfg.max_eval_episodes)
    window = episodes[:, : cfg.T + 1]
    scores = np.array([run_episode(link, models.ae1, models.ae2, ep) for ep in window])
    bits = 64 if cfg.n_q is None else cfg.n_q
    n_s2 = cfg.n_s2 if T > 0 else 0
    return EvalResult(method, cfg.T, scores.mean(axis=0), equivalent_overhead(bits, cfg.n_s1, n_s2, T))


# -- complexity -----------------------------------------------------------------------

def report_complexity(ae1, ae2, T: int) -> dict:
    """Per-interval FLOPs of both schemes and their exact ratio.

    ``ae1``/``ae2`` may be models or pre-computed FLOP counts.
    """
    f1 = ae1 if isinstance(ae1, int) else count_flops(ae1)
    f2 = ae2 if isinstance(ae2, int) else count_flops(ae2)
    proposed = Fraction(f1 + T * f2, T + 1)
    baseline = Fraction(f1)
    return {
        "T": T,
        "ae1_flops": f1,
        "ae2_flops": f2,
        "proposed_flops_per_interval": proposed,
        "baseline_flops_per_interval": baseline,
        "ratio": proposed / baseline,
    }


# -- sweeps ----------------------------------------------------------------------------

SWEEP_COLUMNS = [
    "method", "T", "gamma1", "gamma2", "n_s1", "n_s2", "n_q", "n_equ", "n_equ_exact",
    "avg_nmse_db", "nmse_db_min", "nmse_db_max", "n_seeds",
    "ae1_flops", "ae2_flops", "avg_flops_per_interval",
]


def run_sweep(base: ExperimentConfig, ds: EpisodeDataset, gamma1s, gamma2s, Ts, methods=METHODS,
              seeds=(0, 1, 2)) -> list[dict]:
    """Train every needed model once and evaluate all grid points on the test split.

    One row per (method, T, gamma1, gamma2); NMSE is the median over seeds
    with the min/max as spread.  Baseline rows ignore ``gamma2``.
    """
    _check_dims(base, ds)
    channel_spec, ratio_spec = fit_specs(ds)
    test = ds.split("test")
    ae1_cache, ae2_cache = {}, {}
    rows = []
    for g1 in gamma1s:
        for seed in seeds:
            cfg = replace(base, gamma1=Fraction(g1), seed=seed)
            t0 = time.perf_counter()
            ae1_cache[(Fraction(g1), seed)] = train_ae1(cfg, ds, channel_spec).model
            log.info("AE1 gamma1=%s seed=%d trained in %.1fs", g1, seed, time.perf_counter() - t0)
    if "proposed" in methods:
        for g2 in gamma2s:
            for seed in seeds:
                cfg = replace(base, gamma2=Fraction(g2), seed=seed)
                ae2_cache[(Fraction(g2), seed)] = train_ae2(cfg, ds, ratio_spec).model

    for method in methods:
        for T in Ts:
            for g1 in gamma1s:
                for g2 in (gamma2s if method == "proposed" else [None]):
                    cfg = replace(base, method=method, T=T, gamma1=Fraction(g1),
                                  gamma2=Fraction(g2) if g2 is not None else base.gamma2)
                    dbs, ae2 = [], None
                    for seed in seeds:
                        ae1 = ae1_cache[(Fraction(g1), seed)]
                        ae2 = ae2_cache.get((Fraction(g2), seed)) if g2 is not None else None
                        models = FeedbackModels(ae1, channel_spec, ae2, ratio_spec if ae2 else None)
                        dbs.append(evaluate(cfg, models, test, method).avg_db)
                    f1 = count_flops(ae1)
                    f2 = count_flops(ae2) if ae2 is not None else 0
                    T_eff = T if method == "proposed" else 0
                    cx = report_complexity(f1, f2, T_eff)
                    bits = 64 if cfg.n_q is None else cfg.n_q
                    n_equ = equivalent_overhead(bits, cfg.n_s1, cfg.n_s2 if g2 is not None else 0, T_eff, exact=True)
                    rows.append({
                        "method": method,
                        "T": T,
                        "gamma1": str(Fraction(g1)),
                        "gamma2": str(Fraction(g2)) if g2 is not None else "",
                        "n_s1": cfg.n_s1,
                        "n_s2": cfg.n_s2 if g2 is not None else 0,
                        "n_q": bits,
                        "n_equ": float(n_equ),
                        "n_equ_exact": n_equ,
                        "avg_nmse_db": statistics.median(dbs),
                        "nmse_db_min": min(dbs),
                        "nmse_db_max": max(dbs),
                        "n_seeds": len(dbs),
                        "ae1_flops": f1,
                        "ae2_flops": f2,
                        "avg_flops_per_interval": cx["proposed_flops_per_interval"],
                    })
    return rows


def _fmt(value):
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else str(value.numerator)
    if isinstance(value, (float, np.floating)):
        if value == -np.inf:
            return format_db(0.0)
        return repr(float(value))
    return str(value)


def write_csv(rows, path, columns=None) -> Path:
    path = Path(path)
    columns = columns or (list(rows[0].keys()) if rows else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    return path
