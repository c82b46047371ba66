"""Declarative Monte Carlo experiment runner.

A scenario JSON describes noise, splitting, forward model, estimator,
encoder, hypotheses and trial counts; the runner simulates the full
split -> estimate -> encode -> test pipeline and aggregates Type I error
and power tables for the proposed e-value test, the temperature-scaled
softmax baseline, and optionally the bootstrap sign test.

Everything is deterministic given the master seed: each trial owns a child
generator derived from (seed, repeat, phase, trial), so aggregation is
independent of execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bootstrap as eqb
from .calibrate import CalibrationSet, TauSweepRow, calibrate_lambda
from .errors import ConfigError, DegenerateHypothesesError
from .etest import _level_key
from .operators import (
    AffineEstimator,
    CyclicShift2D,
    IdentityEstimator,
    LinearSphereEncoder,
    affine_mmse,
)
from .rng import child_rng
from .split import gaussian_split, poisson_split, tau_to_beta, beta_to_tau
from .tensorio import read_embeddings
from .types import (
    GAUSSIAN,
    SCALED_POISSON,
    CovModel,
    ForwardModel,
    HypothesisPair,
    ImageVec,
    MeasurementVec,
    tau_inflation,
)

SCHEMA = "scenario-v1"
DEFAULT_LEVELS = (0.02, 0.05, 0.1, 0.15, 0.2)

PROPOSED = "proposed"
SOFTMAX = "softmax_baseline"
BOOTSTRAP = "bootstrap_sign_test"

# Trial phases; part of each trial's child-seed path.
_PHASE_CALIBRATION = 0
_PHASE_NULL = 1
_PHASE_ALT = 2


def _require_keys(d: dict, allowed: set[str], context: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")


@dataclass(frozen=True)
class SynthSpec:
    n: int = 64
    d: int = 16
    nuisance_dim: int = 8
    nuisance_scale: float = 0.1
    class_separation: float = 0.6
    prototype_seed: int = 1
    encoder_seed: int = 2

    def __post_init__(self):
        if self.n < 2 or self.d < 2:
            raise ConfigError("synthetic scenario needs n >= 2 and d >= 2")
        if not 0 <= self.nuisance_dim <= self.n:
            raise ConfigError("nuisance_dim must lie in [0, n]")
        if self.nuisance_scale < 0:
            raise ConfigError("nuisance_scale must be >= 0")
        if not 0 < self.class_separation <= 1:
            raise ConfigError("class_separation must lie in (0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    noise_family: str = GAUSSIAN
    sigma: float = 0.5617
    gamma: float = 0.5
    tau: float = 1.0
    forward: dict = field(default_factory=lambda: {"kind": "identity"})
    estimator: dict = field(default_factory=lambda: {"kind": "affine_mmse"})
    hypotheses: dict = field(default_factory=lambda: {"mode": "synthetic"})
    synth: SynthSpec = field(default_factory=SynthSpec)
    lam: dict = field(default_factory=lambda: {"mode": "calibrate"})
    levels: tuple[float, ...] = DEFAULT_LEVELS
    trials_null: int = 2000
    trials_alt: int = 2000
    repeats: int = 1
    bootstrap: eqb.BootstrapConfig | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.noise_family not in (GAUSSIAN, SCALED_POISSON):
            raise ConfigError(f"unknown noise family {self.noise_family!r}")
        levels = tuple(float(a) for a in self.levels)
        if not levels or any(not 0 < a < 1 for a in levels):
            raise ConfigError("levels must lie in (0, 1)")
        if list(levels) != sorted(set(levels)):
            raise ConfigError("levels must be strictly increasing")
        object.__setattr__(self, "levels", levels)
        if self.trials_null < 1 or self.trials_alt < 0 or self.repeats < 1:
            raise ConfigError("trial and repeat counts must be positive")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")

    @property
    def beta(self) -> float:
        return tau_to_beta(self.tau)


def parse_scenario(doc: dict) -> ScenarioConfig:
    """Strict parser: unknown keys anywhere are errors."""
    _require_keys(
        doc,
        {
            "schema", "noise", "split", "forward", "estimator", "encoder",
            "hypotheses", "synth", "lambda", "levels", "trials_null",
            "trials_alt", "repeats", "bootstrap", "master_seed",
        },
        "scenario",
    )
    if doc.get("schema", SCHEMA) != SCHEMA:
        raise ConfigError(f"unsupported schema {doc.get('schema')!r}")
    noise = dict(doc.get("noise", {"family": GAUSSIAN, "sigma": 0.5617}))
    _require_keys(noise, {"family", "sigma", "gamma"}, "noise")
    family = noise.get("family", GAUSSIAN)

    split_spec = dict(doc.get("split", {"tau": 1.0}))
    _require_keys(split_spec, {"tau", "beta"}, "split")
    if "tau" in split_spec and "beta" in split_spec:
        raise ConfigError("give either tau or beta, not both")
    if "beta" in split_spec:
        tau = beta_to_tau(float(split_spec["beta"]))
    else:
        tau = float(split_spec.get("tau", 1.0))

    forward = dict(doc.get("forward", {"kind": "identity"}))
    _require_keys(forward, {"kind", "density", "seed", "matrix"}, "forward")
    estimator = dict(doc.get("estimator", {"kind": "affine_mmse"}))
    _require_keys(estimator, {"kind", "prior_scale", "command", "timeout"}, "estimator")
    encoder = dict(doc.get("encoder", {"kind": "synthetic"}))
    _require_keys(encoder, {"kind"}, "encoder")
    if encoder.get("kind", "synthetic") != "synthetic":
        raise ConfigError("only the synthetic linear encoder is supported in scenarios")
    hypotheses = dict(doc.get("hypotheses", {"mode": "synthetic"}))
    _require_keys(hypotheses, {"mode", "path", "q0_id", "q1_id"}, "hypotheses")

    synth_doc = dict(doc.get("synth", {}))
    _require_keys(
        synth_doc,
        {"n", "d", "nuisance_dim", "nuisance_scale", "class_separation",
         "prototype_seed", "encoder_seed"},
        "synth",
    )
    synth = SynthSpec(**synth_doc)

    lam = dict(doc.get("lambda", {"mode": "calibrate"}))
    _require_keys(lam, {"mode", "value", "target", "holdout_fraction", "lambda_max"}, "lambda")
    if lam.get("mode") not in ("fixed", "calibrate"):
        raise ConfigError("lambda mode must be 'fixed' or 'calibrate'")
    if lam["mode"] == "fixed" and "value" not in lam:
        raise ConfigError("fixed lambda needs a value")

    boot_doc = doc.get("bootstrap")
    boot = None
    if boot_doc is not None:
        boot_doc = dict(boot_doc)
        _require_keys(boot_doc, {"k", "kappa", "max_shift", "sim_floor"}, "bootstrap")
        boot = eqb.BootstrapConfig(
            k=int(boot_doc["k"]),
            kappa=float(boot_doc.get("kappa", 0.0)),
            max_shift=tuple(boot_doc.get("max_shift", (2, 2))),
            sim_floor=float(boot_doc.get("sim_floor", eqb.DEFAULT_SIM_FLOOR)),
        )

    return ScenarioConfig(
        noise_family=family,
        sigma=float(noise.get("sigma", 0.5617)),
        gamma=float(noise.get("gamma", 0.5)),
        tau=tau,
        forward=forward,
        estimator=estimator,
        hypotheses=hypotheses,
        synth=synth,
        lam=lam,
        levels=tuple(doc.get("levels", DEFAULT_LEVELS)),
        trials_null=int(doc.get("trials_null", 2000)),
        trials_alt=int(doc.get("trials_alt", 2000)),
        repeats=int(doc.get("repeats", 1)),
        bootstrap=boot,
        master_seed=int(doc.get("master_seed", 0)),
    )


def default_scenario(**overrides) -> ScenarioConfig:
    """The default synthetic Gaussian scenario used by docs and acceptance."""
    cfg = ScenarioConfig()
    if overrides:
        return _replace(cfg, **overrides)
    return cfg


def _replace(cfg: ScenarioConfig, **kw) -> ScenarioConfig:
    import dataclasses

    return dataclasses.replace(cfg, **kw)


@dataclass(frozen=True)
class Scenario:
    """A fully built scenario: operators plus ground-truth samplers."""

    config: ScenarioConfig
    forward: ForwardModel
    cov: CovModel | None              # Gaussian measurement covariance
    encoder: LinearSphereEncoder
    hyp: HypothesisPair
    estimator: object
    prototypes: tuple[np.ndarray, np.ndarray]
    nuisance_basis: np.ndarray

    def sample_x(self, class_index: int, rng: np.random.Generator) -> ImageVec:
        c = self.prototypes[class_index]
        x = c
        if self.nuisance_basis.shape[1] > 0 and self.config.synth.nuisance_scale > 0:
            w = self.config.synth.nuisance_scale * rng.standard_normal(
                self.nuisance_basis.shape[1]
            )
            x = c + self.nuisance_basis @ w
        if self.config.noise_family == SCALED_POISSON:
            x = np.maximum(x, 0.0)  # Poisson intensities must stay non-negative
        return ImageVec(x)

    def measure(self, x: ImageVec, rng: np.random.Generator) -> MeasurementVec:
        ax = self.forward.apply(x.data)
        if self.config.noise_family == GAUSSIAN:
            noise = self.cov.sqrt_apply(rng.standard_normal(self.cov.dim))
            return MeasurementVec(ax + noise, GAUSSIAN)
        gamma = self.config.gamma
        counts = rng.poisson(np.maximum(ax, 0.0) / gamma)
        return MeasurementVec(gamma * counts, SCALED_POISSON)

    def split(self, y: MeasurementVec, rng: np.random.Generator):
        if self.config.noise_family == GAUSSIAN:
            return gaussian_split(y, self.config.tau, self.cov, rng)
        return poisson_split(y, self.config.beta, self.config.gamma, rng)

    def trial_raw_score(self, class_index: int, rng: np.random.Generator) -> float:
        """One split -> estimate -> encode pass; returns phi_x . delta_q."""
        x = self.sample_x(class_index, rng)
        y = self.measure(x, rng)
        pair = self.split(y, rng)
        xhat = self.estimator.estimate(pair.y2)
        emb = self.encoder.encode(xhat)
        return float(emb.v @ self.hyp.delta_q)


def build_scenario(cfg: ScenarioConfig, tau: float | None = None) -> Scenario:
    """Construct operators and samplers; ``tau`` overrides the split scale."""
    if tau is not None:
        cfg = _replace(cfg, tau=float(tau))
    synth = cfg.synth
    n, d = synth.n, synth.d

    proto_rng = child_rng(synth.prototype_seed, 0)
    c0 = 0.2 + 0.6 * proto_rng.random(n)
    c1 = 0.2 + 0.6 * child_rng(synth.prototype_seed, 1).random(n)
    # Pull the class-1 prototype toward class 0 to control how semantically
    # close the two propositions are.
    c1 = c0 + synth.class_separation * (c1 - c0)
    if synth.nuisance_dim > 0:
        g = child_rng(synth.prototype_seed, 2).standard_normal((n, synth.nuisance_dim))
        basis, _ = np.linalg.qr(g)
    else:
        basis = np.zeros((n, 0))

    phi = child_rng(synth.encoder_seed, 0).standard_normal((d, n)) / math.sqrt(n)
    encoder = LinearSphereEncoder(phi)

    forward = _build_forward(cfg.forward, n)
    m = forward.m

    cov = None
    if cfg.noise_family == GAUSSIAN:
        cov = CovModel.scaled_identity(cfg.sigma**2, m)

    hyp = _build_hypotheses(cfg, encoder, c0, c1)
    estimator = _build_estimator(cfg, forward, cov, c0, c1)
    return Scenario(
        config=cfg,
        forward=forward,
        cov=cov,
        encoder=encoder,
        hyp=hyp,
        estimator=estimator,
        prototypes=(c0, c1),
        nuisance_basis=basis,
    )


def _build_forward(spec: dict, n: int) -> ForwardModel:
    kind = spec.get("kind", "identity")
    if kind == "identity":
        return ForwardModel.identity(n)
    if kind == "binary_mask":
        density = float(spec.get("density", 0.2))
        seed = int(spec.get("seed", 3))
        mask = child_rng(seed, 0).random(n) < density
        if not np.any(mask):
            raise ConfigError("binary mask kept no pixels; raise the density")
        return ForwardModel.binary_mask(mask)
    if kind == "dense":
        return ForwardModel.dense(np.asarray(spec["matrix"], dtype=np.float64))
    raise ConfigError(f"unknown forward model kind {kind!r}")


def _build_estimator(cfg, forward, cov, c0, c1):
    kind = cfg.estimator.get("kind", "affine_mmse")
    if kind == "identity":
        return IdentityEstimator()
    if kind == "affine_mmse":
        prior_scale = float(cfg.estimator.get("prior_scale", 0.5))
        n = forward.n
        prior_mean = ImageVec(0.5 * (c0 + c1))
        prior_cov = CovModel.scaled_identity(prior_scale**2, n)
        if cfg.noise_family == GAUSSIAN:
            noise_cov = cov.scaled(tau_inflation(cfg.tau))
        else:
            # Gaussian surrogate for the thinned Poisson noise on y2:
            # Var(Y2_i) ~ gamma * mean_intensity / beta, per coordinate.
            mean_intensity = float(np.mean(forward.apply(0.5 * (c0 + c1))))
            var = max(cfg.gamma * max(mean_intensity, 1e-6) / cfg.beta, 1e-12)
            noise_cov = CovModel.scaled_identity(var, forward.m)
        return affine_mmse(forward, noise_cov, prior_mean, prior_cov)
    raise ConfigError(f"unknown estimator kind {kind!r} for scenarios")


def _build_hypotheses(cfg, encoder, c0, c1) -> HypothesisPair:
    mode = cfg.hypotheses.get("mode", "synthetic")
    if mode == "synthetic":
        q0 = encoder.encode(c0)
        q1 = encoder.encode(c1)
        if np.linalg.norm(q0.v - q1.v) <= 1e-9:
            raise DegenerateHypothesesError("prototype embeddings coincide")
        return HypothesisPair(q0, q1, "class-0 prototype", "class-1 prototype")
    if mode == "from_embeddings":
        table = read_embeddings(cfg.hypotheses["path"])
        q0 = table[cfg.hypotheses["q0_id"]]
        q1 = table[cfg.hypotheses["q1_id"]]
        if np.linalg.norm(q0.v - q1.v) <= 1e-9:
            raise DegenerateHypothesesError("hypothesis embeddings coincide")
        return HypothesisPair(q0, q1, cfg.hypotheses["q0_id"], cfg.hypotheses["q1_id"])
    raise ConfigError(f"unknown hypotheses mode {mode!r}")


@dataclass(frozen=True)
class ReportTable:
    methods: dict          # method -> metric -> level key -> {"mean","std"}
    levels: tuple[float, ...]
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "methods": self.methods,
            "levels": list(self.levels),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReportTable":
        return cls(
            methods=doc["methods"],
            levels=tuple(doc["levels"]),
            metadata=doc["metadata"],
        )


def config_hash(cfg: ScenarioConfig) -> str:
    blob = json.dumps(_cfg_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _cfg_to_dict(cfg: ScenarioConfig) -> dict:
    import dataclasses

    doc = dataclasses.asdict(cfg)
    if cfg.bootstrap is not None:
        doc["bootstrap"]["max_shift"] = list(cfg.bootstrap.max_shift)
    doc["levels"] = list(cfg.levels)
    return doc


def resolve_lambda(
    scenario: Scenario, master_seed: int, repeat: int = 0
) -> float:
    """Fixed temperature, or calibration on a held-out null sample."""
    lam_spec = scenario.config.lam
    if lam_spec["mode"] == "fixed":
        return float(lam_spec["value"])
    target = float(lam_spec.get("target", 0.98))
    holdout_fraction = float(lam_spec.get("holdout_fraction", 0.2))
    lam_max = float(lam_spec.get("lambda_max", 100.0))
    n_cal = max(10, int(round(holdout_fraction * scenario.config.trials_null)))
    scores = np.array(
        [
            scenario.trial_raw_score(0, child_rng(master_seed, repeat, _PHASE_CALIBRATION, i))
            for i in range(n_cal)
        ]
    )
    return calibrate_lambda(CalibrationSet(scores, target=target), lam_max=lam_max)


def _rates(scores: np.ndarray, lam: float, levels, kind: str) -> dict[str, float]:
    """Rejection frequency per level from raw scores.

    Proposed: reject iff lam * s <= log(alpha).  Softmax: reject iff
    sigmoid(lam * s) <= alpha.
    """
    t = lam * scores
    out = {}
    for a in levels:
        if kind == PROPOSED:
            rej = t <= math.log(a)
        else:
            p0 = 1.0 / (1.0 + np.exp(-t))
            rej = p0 <= a
        out[_level_key(a)] = float(np.mean(rej)) if scores.size else 0.0
    return out


def _bootstrap_trial(
    scenario: Scenario, class_index: int, rng: np.random.Generator, lam: float
):
    """Full pipeline plus equivariant bootstrap; returns the sign-test result."""
    cfg = scenario.config
    boot = cfg.bootstrap
    x = scenario.sample_x(class_index, rng)
    y = scenario.measure(x, rng)
    pair = scenario.split(y, rng)
    n = scenario.forward.n
    side = int(round(math.sqrt(n)))
    if side * side != n:
        raise ConfigError("bootstrap scenarios need a square pixel grid")
    shape = (side, side, 1)
    group = CyclicShift2D(*boot.max_shift)
    cov_tau = scenario.cov.scaled(tau_inflation(cfg.tau))
    samples = eqb.equivariant_bootstrap(
        pair.y2, scenario.forward, cov_tau, scenario.estimator,
        group, boot.k, rng, shape,
    )
    t_tilde, _ = eqb.bootstrap_statistics(
        samples, scenario.encoder, scenario.hyp, lam, boot.sim_floor
    )
    return eqb.sign_test(t_tilde, boot.kappa, cfg.levels)


def run_experiment(cfg: ScenarioConfig, master_seed: int | None = None) -> ReportTable:
    """Full Type I / power experiment; deterministic given the master seed."""
    t_start = time.perf_counter()
    seed = cfg.master_seed if master_seed is None else int(master_seed)
    scenario = build_scenario(cfg)
    levels = cfg.levels
    per_repeat: dict[str, dict[str, list[dict]]] = {}
    lambdas = []
    boot_enabled = cfg.bootstrap is not None

    for r in range(cfg.repeats):
        lam = resolve_lambda(scenario, seed, repeat=r)
        lambdas.append(lam)
        null_scores = np.array(
            [
                scenario.trial_raw_score(0, child_rng(seed, r, _PHASE_NULL, i))
                for i in range(cfg.trials_null)
            ]
        )
        alt_scores = np.array(
            [
                scenario.trial_raw_score(1, child_rng(seed, r, _PHASE_ALT, i))
                for i in range(cfg.trials_alt)
            ]
        )
        repeat_rates = {
            PROPOSED: {
                "type_i": _rates(null_scores, lam, levels, PROPOSED),
                "power": _rates(alt_scores, lam, levels, PROPOSED),
            },
            SOFTMAX: {
                "type_i": _rates(null_scores, lam, levels, SOFTMAX),
                "power": _rates(alt_scores, lam, levels, SOFTMAX),
            },
        }
        if boot_enabled:
            repeat_rates[BOOTSTRAP] = {
                "type_i": _boot_rates(scenario, 0, cfg.trials_null, seed, r, lam),
                "power": _boot_rates(scenario, 1, cfg.trials_alt, seed, r, lam),
            }
        for method, metrics in repeat_rates.items():
            for metric, rates in metrics.items():
                per_repeat.setdefault(method, {}).setdefault(metric, []).append(rates)

    methods = {}
    for method, metrics in per_repeat.items():
        methods[method] = {}
        for metric, rate_dicts in metrics.items():
            cell = {}
            for a in levels:
                key = _level_key(a)
                vals = np.array([rd[key] for rd in rate_dicts])
                cell[key] = {
                    "mean": float(np.mean(vals)),
                    "std": float(np.std(vals, ddof=1)) if cfg.repeats > 1 else None,
                }
            methods[method][metric] = cell

    metadata = {
        "seed": seed,
        "config_hash": config_hash(cfg),
        "schema": SCHEMA,
        "repeats": cfg.repeats,
        "trials_null": cfg.trials_null,
        "trials_alt": cfg.trials_alt,
        "lambda": lambdas,
        "baseline_type_i": 0.0,  # exact synthetic encoder: no zero-noise error
        "runtime_seconds": round(time.perf_counter() - t_start, 3),
    }
    return ReportTable(methods=methods, levels=levels, metadata=metadata)


def _boot_rates(scenario, class_index, trials, seed, repeat, lam):
    phase = 3 + class_index
    counts = {_level_key(a): 0 for a in scenario.config.levels}
    for i in range(trials):
        res = _bootstrap_trial(
            scenario, class_index, child_rng(seed, repeat, phase, i), lam
        )
        for key, decision in res.decisions.items():
            if decision == "reject":
                counts[key] += 1
    return {k: (c / trials if trials else 0.0) for k, c in counts.items()}


def sweep_cell(
    cfg: ScenarioConfig,
    tau: float,
    trials: int,
    master_seed: int,
    cell_index: int,
    lam: float | None = None,
) -> TauSweepRow:
    """One tau value of the trade-off sweep: PSNR of y1 and power from y2."""
    if cfg.noise_family != GAUSSIAN:
        raise ConfigError("the tau sweep is defined for Gaussian scenarios")
    scenario = build_scenario(cfg, tau=tau)
    if lam is None:
        lam = resolve_lambda(build_scenario(cfg), master_seed)
    psnrs = np.empty(trials)
    scores = np.empty(trials)
    for i in range(trials):
        rng = child_rng(master_seed, 100 + cell_index, i)
        x = scenario.sample_x(1, rng)
        y = scenario.measure(x, rng)
        pair = scenario.split(y, rng)
        ref = scenario.forward.apply(x.data)
        mse = float(np.mean((pair.y1.data - ref) ** 2))
        psnrs[i] = 10.0 * math.log10(1.0 / max(mse, 1e-300))
        xhat = scenario.estimator.estimate(pair.y2)
        scores[i] = float(scenario.encoder.encode(xhat).v @ scenario.hyp.delta_q)
    power = _rates(scores, lam, cfg.levels, PROPOSED)
    stderr = {
        k: math.sqrt(max(p * (1 - p), 1e-12) / trials) for k, p in power.items()
    }
    return TauSweepRow(
        tau=float(tau),
        psnr_y1=float(np.mean(psnrs)),
        psnr_stderr=float(np.std(psnrs, ddof=1) / math.sqrt(trials)),
        power=power,
        power_stderr=stderr,
    )


def emit_report(
    table: ReportTable, json_path=None, csv_path=None
) -> None:
    """Write the report as deterministic JSON and/or delimited CSV.

    CSV columns: method, metric, level, mean, std (std empty when a single
    repeat makes it undefined).  The wall-clock field is dropped from the
    JSON so reports are byte-identical across reruns with the same seed.
    """
    if json_path is not None:
        doc = table.to_dict()
        doc["metadata"] = {
            k: v for k, v in doc["metadata"].items() if k != "runtime_seconds"
        }
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if csv_path is not None:
        lines = ["method,metric,level,mean,std"]
        for method in sorted(table.methods):
            for metric in ("type_i", "power"):
                for a in table.levels:
                    key = _level_key(a)
                    cell = table.methods[method][metric][key]
                    std = "" if cell["std"] is None else format(cell["std"], ".17g")
                    lines.append(
                        f"{method},{metric},{key},{format(cell['mean'], '.17g')},{std}"
                    )
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
