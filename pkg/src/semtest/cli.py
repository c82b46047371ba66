"""Command-line interface.

Subcommands: split, test, calibrate, power, bootstrap, run, tau-sweep.
The master seed defaults to the ETEST_SEED environment variable where a
--seed flag is omitted.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import bootstrap as eqb
from .calibrate import CalibrationSet, calibrate_lambda, tau_sweep
from .errors import ConfigError, SemTestError, UnknownIdError
from .etest import evaluate, softmax_baseline
from .harness import emit_report, parse_scenario, run_experiment
from .operators import AffineEstimator, CyclicShift2D, IdentityEstimator, LinearSphereEncoder
from .plots import render_report_figure, render_tau_tradeoff
from .power import PowerSpec, closed_form_power, mc_power
from .rng import master_rng
from .split import gaussian_split, poisson_split
from .tensorio import read_embeddings, read_tensor, write_tensor
from .types import (
    GAUSSIAN,
    SCALED_POISSON,
    CovModel,
    ForwardModel,
    HypothesisPair,
    ImageVec,
    MeasurementVec,
    UnitEmbedding,
)

SEED_ENV = "ETEST_SEED"


def _default_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        raise ConfigError(f"no --seed given and {SEED_ENV} is unset")
    return int(env)


def _load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _parse_cov(doc: dict, dim: int | None = None) -> CovModel:
    kind = doc.get("kind")
    if kind == "scaled_identity":
        d = int(doc.get("dim", dim if dim is not None else 0))
        if d <= 0:
            raise ConfigError("scaled_identity covariance needs a dim")
        return CovModel.scaled_identity(float(doc["variance"]), d)
    if kind == "diagonal":
        return CovModel.diagonal(np.asarray(doc["variances"], dtype=np.float64))
    if kind == "dense_spd":
        return CovModel.dense(np.asarray(doc["sigma"], dtype=np.float64))
    raise ConfigError(f"unknown covariance kind {kind!r}")


def _parse_forward(doc: dict, n: int | None = None) -> ForwardModel:
    kind = doc.get("kind", "identity")
    if kind == "identity":
        d = int(doc.get("n", n if n is not None else 0))
        if d <= 0:
            raise ConfigError("identity forward model needs n")
        return ForwardModel.identity(d)
    if kind == "binary_mask":
        return ForwardModel.binary_mask(np.asarray(doc["mask"], dtype=bool))
    if kind == "dense":
        return ForwardModel.dense(np.asarray(doc["matrix"], dtype=np.float64))
    raise ConfigError(f"unknown forward model kind {kind!r}")


def _parse_estimator(doc: dict):
    kind = doc.get("kind", "affine")
    if kind == "identity":
        return IdentityEstimator()
    if kind == "affine":
        return AffineEstimator(
            b=np.asarray(doc["b"], dtype=np.float64),
            gain=np.asarray(doc["gain"], dtype=np.float64),
        )
    raise ConfigError(f"unknown estimator kind {kind!r}")


def _cmd_split(args) -> None:
    cfg = _load_json(args.config)
    data = read_tensor(args.infile).ravel()
    rng = master_rng(_default_seed(args))
    family = cfg.get("family")
    if family == "gaussian":
        y = MeasurementVec(data, GAUSSIAN)
        cov = _parse_cov(cfg["cov"], dim=y.m)
        pair = gaussian_split(y, float(cfg.get("tau", 1.0)), cov, rng)
    elif family == "scaled_poisson":
        y = MeasurementVec(data, SCALED_POISSON)
        pair = poisson_split(y, float(cfg["beta"]), float(cfg["gamma"]), rng)
    else:
        raise ConfigError(f"unknown split family {family!r}")
    write_tensor(args.out1, pair.y1.data)
    write_tensor(args.out2, pair.y2.data)


def _lookup(table: dict, key: str, path) -> UnitEmbedding:
    try:
        return table[key]
    except KeyError:
        raise UnknownIdError(f"{path}: no embedding with id {key!r}") from None


def _cmd_test(args) -> None:
    table = read_embeddings(args.emb)
    phi_x = _lookup(table, args.image_id, args.emb)
    hyp = HypothesisPair(
        _lookup(table, args.q0_id, args.emb),
        _lookup(table, args.q1_id, args.emb),
        args.q0_id,
        args.q1_id,
    )
    levels = [float(a) for a in args.levels.split(",")]
    outcome = evaluate(phi_x, hyp, args.lam, levels)
    baseline = softmax_baseline(phi_x, hyp, args.lam, levels)
    doc = {
        "image_id": args.image_id,
        "q0_id": args.q0_id,
        "q1_id": args.q1_id,
        "lambda": args.lam,
        "raw_score": outcome.raw_score,
        "t": outcome.t,
        "e_value": outcome.e_value,
        "p_value": outcome.p_value,
        "decisions": outcome.decisions,
        "softmax": {"p0": baseline.p0, "decisions": baseline.decisions},
    }
    _write_json(args.out, doc)


def _cmd_calibrate(args) -> None:
    with open(args.scores, encoding="utf-8") as fh:
        scores = np.array([float(line) for line in fh if line.strip()])
    lam = calibrate_lambda(
        CalibrationSet(scores, target=args.target), lam_max=args.lambda_max
    )
    _write_json(args.out, {"lambda": lam, "target": args.target, "n_scores": scores.size})


def _cmd_power(args) -> None:
    doc = _load_json(args.spec)
    phi = np.asarray(doc["phi"], dtype=np.float64)
    x_star = ImageVec(np.asarray(doc["x_star"], dtype=np.float64))
    forward = _parse_forward(doc.get("forward", {"kind": "identity"}), n=x_star.n)
    cov = _parse_cov(doc["cov"], dim=forward.m)
    spec = PowerSpec(
        phi=phi,
        forward=forward,
        cov=cov,
        tau=float(doc.get("tau", 1.0)),
        x_star=x_star,
        estimator=_parse_estimator(doc["estimator"]),
        delta_q=np.asarray(doc["delta_q"], dtype=np.float64),
        lam=float(doc["lambda"]),
        alpha=float(doc["alpha"]),
        mode=doc.get("mode", "exact_affine"),
    )
    if args.mode == "closed":
        result = {"power": closed_form_power(spec), "mode": "closed"}
    else:
        fidelity = {
            "linearized": "linearized",
            "exact": "exact_statistic",
            "full": "full_pipeline",
        }[args.fidelity]
        p, se = mc_power(spec, args.trials, fidelity, master_rng(_default_seed(args)))
        result = {"power": p, "stderr": se, "mode": "mc", "fidelity": args.fidelity}
    _write_json(args.out, result)


def _cmd_bootstrap(args) -> None:
    cfg = _load_json(args.config)
    y2 = MeasurementVec(read_tensor(args.infile).ravel(), GAUSSIAN)
    forward = _parse_forward(cfg.get("forward", {"kind": "identity"}), n=y2.m)
    cov = _parse_cov(cfg["cov"], dim=forward.m)
    tau = float(cfg.get("tau", 1.0))
    cov_tau = cov.scaled((1 + tau * tau) / (tau * tau))
    estimator = _parse_estimator(cfg.get("estimator", {"kind": "identity"}))
    encoder = LinearSphereEncoder(np.asarray(cfg["encoder"]["phi"], dtype=np.float64))
    hyp_doc = cfg["hypotheses"]
    if "emb_path" in hyp_doc:
        table = read_embeddings(hyp_doc["emb_path"])
        hyp = HypothesisPair(
            _lookup(table, hyp_doc["q0_id"], hyp_doc["emb_path"]),
            _lookup(table, hyp_doc["q1_id"], hyp_doc["emb_path"]),
        )
    else:
        hyp = HypothesisPair(
            UnitEmbedding.normalized(hyp_doc["q0"]),
            UnitEmbedding.normalized(hyp_doc["q1"]),
        )
    shape = tuple(int(v) for v in cfg["shape"])
    max_shift = cfg.get("max_shift", [2, 2])
    group = CyclicShift2D(int(max_shift[0]), int(max_shift[1]))
    rng = master_rng(_default_seed(args))
    samples = eqb.equivariant_bootstrap(
        y2, forward, cov_tau, estimator, group, args.k, rng, shape
    )
    t_tilde, clamped = eqb.bootstrap_statistics(
        samples, encoder, hyp, float(cfg.get("lambda", 1.0)),
        float(cfg.get("sim_floor", eqb.DEFAULT_SIM_FLOOR)),
    )
    levels = cfg.get("levels", [0.02, 0.05, 0.1, 0.15, 0.2])
    result = eqb.sign_test(t_tilde, args.kappa, levels)
    _write_json(
        args.out,
        {
            "k": args.k,
            "kappa": args.kappa,
            "s_count": result.s_count,
            "p_value": result.p_value,
            "decisions": result.decisions,
            "clamped": clamped,
            "t_tilde": [float(t) for t in result.t_tilde],
        },
    )


def _cmd_run(args) -> None:
    cfg = parse_scenario(_load_json(args.scenario))
    table = run_experiment(cfg, master_seed=_default_seed(args))
    emit_report(table, json_path=args.out, csv_path=args.csv)
    if args.figure:
        render_report_figure(table, args.figure)


def _cmd_tau_sweep(args) -> None:
    cfg = parse_scenario(_load_json(args.scenario))
    taus = [float(t) for t in args.taus.split(",")]
    rows = tau_sweep(cfg, taus, args.trials, _default_seed(args))
    lines = ["tau,psnr_y1,psnr_stderr," + ",".join(f"power_{k}" for k in rows[0].power)]
    for row in rows:
        power = ",".join(format(v, ".17g") for v in row.power.values())
        lines.append(f"{row.tau:g},{row.psnr_y1:.6f},{row.psnr_stderr:.6f},{power}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    if args.figure:
        render_tau_tradeoff(rows, args.figure)


def _write_json(path, doc) -> None:
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semtest",
        description="Semantic hypothesis testing for imaging inverse problems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="split a measurement into two pseudo-measurements")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out1", required=True)
    p.add_argument("--out2", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("test", help="e-value test on stored embeddings")
    p.add_argument("--emb", required=True)
    p.add_argument("--image-id", required=True)
    p.add_argument("--q0-id", required=True)
    p.add_argument("--q1-id", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--levels", default="0.02,0.05,0.1,0.15,0.2")
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("calibrate", help="calibrate the temperature on null scores")
    p.add_argument("--scores", required=True, help="one raw score per line")
    p.add_argument("--target", type=float, default=0.98)
    p.add_argument("--lambda-max", type=float, default=100.0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("power", help="closed-form or Monte Carlo power")
    p.add_argument("--spec", required=True)
    p.add_argument("--mode", choices=["closed", "mc"], default="closed")
    p.add_argument("--fidelity", choices=["linearized", "exact", "full"], default="linearized")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_power)

    p = sub.add_parser("bootstrap", help="equivariant bootstrap + sign test")
    p.add_argument("--config", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--k", type=int, default=200)
    p.add_argument("--kappa", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="-")
    p.set_defaults(func=_cmd_bootstrap)

    p = sub.add_parser("run", help="run a Monte Carlo scenario and emit a report")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.add_argument("--figure")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("tau-sweep", help="reconstruction/power trade-off over tau")
    p.add_argument("--scenario", required=True)
    p.add_argument("--taus", default="0.125,0.25,0.5,1,2,4,8")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--out", required=True)
    p.add_argument("--figure")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_tau_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except SemTestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
