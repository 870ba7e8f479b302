"""Command-line entry point: ``bma-identify EXAMPLE ARTIFACT [options]``.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures such as multiple sensitivity roots in Example 4.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, ex1_missing, ex2_stratified, ex3_outcome, ex4_exposure, kernels, report
from .core import McConfig, ModelWeights
from .errors import ConfigError, NumericError

ARTIFACTS = {
    "ex1": ("table", "figure"),
    "ex2": ("table", "validate"),
    "ex3": ("table", "figure", "ensembles"),
    "ex4": ("table", "figure", "ensembles", "calibrate"),
    "all": ("table",),
}

# default draws per prior, by (example, artifact)
DEFAULT_DRAWS = {
    ("ex1", "table"): ex1_missing.REFERENCE_DRAWS,
    ("ex1", "figure"): 100_000,
    ("ex2", "validate"): 100_000,
    ("ex3", "table"): ex3_outcome.REFERENCE_DRAWS,
    ("ex3", "figure"): ex3_outcome.ENSEMBLE_DRAWS,
    ("ex3", "ensembles"): ex3_outcome.ENSEMBLE_DRAWS,
    ("ex4", "table"): ex4_exposure.REFERENCE_DRAWS,
    ("ex4", "figure"): ex4_exposure.ENSEMBLE_DRAWS,
    ("ex4", "ensembles"): ex4_exposure.ENSEMBLE_DRAWS,
    ("ex4", "calibrate"): ex4_exposure.CALIB_DRAWS,
}

HYPER_KEYS = {
    "ex1": ("w",),
    "ex2": ("lambda_tilde", "beta_a", "beta_b", "k", "w"),
    "ex3": ("a0", "a1", "w"),
    "ex4": ("b", "w"),
}


def build_parser():
    p = argparse.ArgumentParser(prog="bma-identify", description="Reproduce model-averaging risk tables and figure data.")
    p.add_argument("example", choices=sorted(ARTIFACTS))
    p.add_argument("artifact", choices=sorted({a for v in ARTIFACTS.values() for a in v}))
    p.add_argument("--seed", type=int, default=McConfig.seed)
    p.add_argument("--draws", type=int, default=None, help="draws per prior (default: the reference count for the artifact)")
    p.add_argument("--quad-nodes", type=int, default=McConfig.quad_nodes)
    p.add_argument("--root-tol", type=float, default=McConfig.root_tol)
    p.add_argument("--root-scan-points", type=int, default=McConfig.root_scan_points)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--calib-draws", type=int, default=ex4_exposure.CALIB_DRAWS, help="Example 4 calibration draws")
    p.add_argument("--calibration", type=Path, default=None, help="Example 4 calibration JSON to reuse")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--a0", type=float)
    p.add_argument("--a1", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--lambda-tilde", type=float)
    p.add_argument("--weights", type=str, help="prior model weights, e.g. 0.5,0.5")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="hyperparameter override")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def _parse_weights(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError(f"weights must be comma-separated numbers, got {text!r}") from None
    try:
        return ModelWeights(vals)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def collect_overrides(args):
    """Hyperparameter overrides from dedicated flags and ``--set``."""
    out = {}
    for key, val in (("a0", args.a0), ("a1", args.a1), ("b", args.b), ("lambda_tilde", args.lambda_tilde)):
        if val is not None:
            out[key] = val
    if args.weights is not None:
        out["w"] = args.weights
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def make_hyper(example, overrides):
    valid = HYPER_KEYS[example]
    bad = sorted(k for k in overrides if k not in valid)
    if bad:
        raise ConfigError(f"unknown override(s) {', '.join(bad)} for {example}; valid keys: {', '.join(valid)}")
    kw = {}
    for k, v in overrides.items():
        if k == "w":
            kw[k] = v if isinstance(v, ModelWeights) else _parse_weights(str(v))
        else:
            try:
                kw[k] = float(v)
            except ValueError:
                raise ConfigError(f"override {k} must be a number, got {v!r}") from None
    if example == "ex1":
        return kw.get("w", ModelWeights([0.5, 0.5]))
    cls = {"ex2": ex2_stratified.Ex2Hyper, "ex3": ex3_outcome.Ex3Hyper, "ex4": ex4_exposure.Ex4Hyper}[example]
    try:
        return cls(**kw)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def make_config(args, example, artifact):
    draws = args.draws if args.draws is not None else DEFAULT_DRAWS.get((example, artifact), 10_000)
    try:
        return McConfig(
            seed=args.seed,
            draws_per_prior=draws,
            quad_nodes=args.quad_nodes,
            root_tol=args.root_tol,
            root_scan_points=args.root_scan_points,
            threads=args.threads,
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from None


def _hyper_meta(hyper):
    if isinstance(hyper, ModelWeights):
        return {"w": list(hyper)}
    d = {}
    for k, v in vars(hyper).items():
        if isinstance(v, ModelWeights):
            d[k] = list(v)
        elif isinstance(v, ex4_exposure.Calibration):
            d[k] = v.to_dict()
        else:
            d[k] = v
    return d


def _cfg_meta(cfg):
    return {
        "seed": cfg.seed,
        "draws_per_prior": cfg.draws_per_prior,
        "quad_nodes": cfg.quad_nodes,
        "root_tol": cfg.root_tol,
        "root_scan_points": cfg.root_scan_points,
    }


def _ex4_hyper(hyper, cfg, args, out, written):
    if hyper.calib is not None:
        return hyper
    if args.calibration is not None:
        try:
            calib = ex4_exposure.Calibration.from_dict(json.loads(args.calibration.read_text()))
        except (OSError, ValueError, TypeError) as err:
            raise ConfigError(f"cannot read calibration {args.calibration}: {err}") from None
        hyper = hyper.with_calibration(calib)
        hyper.require_calibration()
        return hyper
    calib = ex4_exposure.calibrate(hyper, cfg, args.calib_draws)
    written.append(report.write_json(out / "ex4_calibration.json", calib.to_dict()))
    return hyper.with_calibration(calib)


def run_one(example, artifact, args, out, overrides=None, echo=print):
    """Compute one artifact and write its files; returns the list of paths."""
    if artifact not in ARTIFACTS[example]:
        raise ConfigError(f"{example} has no {artifact!r} artifact; choose from {', '.join(ARTIFACTS[example])}")
    hyper = make_hyper(example, collect_overrides(args) if overrides is None else overrides)
    cfg = make_config(args, example, artifact)
    stem = out / f"{example}_{artifact}"
    written = []
    meta = {"seed": cfg.seed, "draws_per_prior": cfg.draws_per_prior}
    table = None

    if example == "ex1":
        if artifact == "table":
            table = ex1_missing.ramse_table_ex1(cfg, hyper)
        else:
            post, (grid, dn, dm, db) = ex1_missing.figure_curves(cfg, w=hyper)
            written.append(report.write_columns(
                stem.with_name("ex1_figure1_density.csv"),
                ("psi_grid", "density_nim", "density_mar", "density_bma"), (grid, dn, dm, db)))
            n = len(post.draws_nim)
            written.append(report.write_columns(
                stem.with_name("ex1_figure1_samples.csv"), ("model", "psi"),
                (np.repeat(["nim", "mar"], n), np.concatenate([post.draws_nim, post.draws_mar]))))
            written.append(report.write_json(stem.with_name("ex1_figure1_summary.json"), {
                "bayes_factor": ex1_missing.bayes_factor(ex1_missing.STUDY_COUNTS),
                "posterior_weights": list(post.weights),
                "mean_nim": post.mean_nim, "mean_mar": post.mean_mar, "mean_bma": post.mean_bma,
                **meta,
            }))
            echo(f"posterior weights (NIM, MAR) = ({post.weights[0]:.3f}, {post.weights[1]:.3f})")

    elif example == "ex2":
        if artifact == "table":
            table = ex2_stratified.amse_table(hyper)
            meta = {}
        else:
            table = ex2_stratified.mc_validate_ex2(hyper, cfg)

    elif example == "ex3":
        if artifact == "table":
            table = ex3_outcome.ramse_table_ex3(hyper, cfg)
        else:
            w0, w1 = ex3_outcome.ensembles_wstar(hyper, cfg, cfg.draws_per_prior)
            written.append(report.write_columns(
                stem.with_name("ex3_figure2_w1star.csv"), ("model", "w1star"),
                (np.repeat([0, 1], [len(w0), len(w1)]), np.concatenate([w0, w1]))))
            lo = ex3_outcome.min_wstar1(hyper)
            rows = []
            for j, vals in enumerate((w0, w1)):
                edges, counts = ex3_outcome.histogram(vals, bins=40, lo=min(lo, float(vals.min())))
                rows.append((np.full(len(counts), j), edges[:-1], edges[1:], counts))
            written.append(report.write_columns(
                stem.with_name("ex3_figure2_hist.csv"), ("model", "bin_lo", "bin_hi", "count"),
                [np.concatenate(c) for c in zip(*rows)]))
            echo(f"min w1* = {min(w0.min(), w1.min()):.4f} (bound {lo:.4f})")

    else:
        if artifact == "calibrate":
            calib = ex4_exposure.calibrate(hyper, cfg, cfg.draws_per_prior)
            written.append(report.write_json(stem.with_name("ex4_calibration.json"), calib.to_dict()))
            hyper = hyper.with_calibration(calib)
            echo(f"Pr*(phi in H) = {calib.prob_H:.4f} (se {calib.prob_H_se:.4f}); "
                 f"E*[max(b, t)] = {calib.expected_max_bt:.5f} (se {calib.expected_max_bt_se:.5f})")
        else:
            hyper = _ex4_hyper(hyper, cfg, args, out, written)
            meta["prob_H"] = hyper.calib.prob_H
            meta["expected_max_bt"] = hyper.calib.expected_max_bt
            if artifact == "table":
                table = ex4_exposure.ramse_table_ex4(hyper, cfg)
            else:
                ens = ex4_exposure.ensembles_wstar(hyper, cfg, cfg.draws_per_prior)
                src = np.repeat([0, 1, 2], [len(e) for e in ens])
                allw = np.concatenate(ens)
                written.append(report.write_columns(
                    stem.with_name("ex4_figure3_triplets.csv"), ("source_model", "w0", "w1", "w2"),
                    (src, allw[:, 0], allw[:, 1], allw[:, 2])))

    if table is not None:
        written.append(report.write_table(stem, table, args.format, meta))
        echo(report.format_table(table))
    return written, cfg, hyper


def run(argv=None, echo=print):
    args = build_parser().parse_args(argv)
    out = args.out
    t0 = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise ConfigError(f"cannot create output directory {out}: {err}") from None

    if args.example == "all":
        if collect_overrides(args):
            raise ConfigError("all runs the default settings and takes no overrides")
        if args.draws is not None:
            raise ConfigError("all runs the reference draw counts; --draws is not accepted")
        runs = [(ex, "table") for ex in ("ex1", "ex2", "ex3", "ex4")]
        overrides = {}
    else:
        runs = [(args.example, args.artifact)]
        overrides = None

    written, parts = [], []
    for ex, art in runs:
        paths, cfg, hyper = run_one(ex, art, args, out, overrides, echo)
        written.extend(paths)
        parts.append({"example": ex, "artifact": art, "config": _cfg_meta(cfg), "hyper": _hyper_meta(hyper)})

    manifest = {
        "tool": "bma-identify",
        "version": __version__,
        "backend": kernels.BACKEND,
        "argv": list(sys.argv[1:] if argv is None else argv),
        "runs": parts,
        "files": {Path(p).name: report.sha256(p) for p in written},
        "wall_time_s": time.perf_counter() - t0,
    }
    report.write_json(out / f"{args.example}_{args.artifact}_manifest.json", manifest)
    return 0


def main(argv=None):
    try:
        return run(argv)
    except NumericError as err:
        print(f"bma-identify: numerical error: {err}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError) as err:
        print(f"bma-identify: configuration error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
