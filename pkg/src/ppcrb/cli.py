"""Command line front end: bound evaluation, experiment runs, audits.

Exit codes
    0  success
    1  bad input (malformed config, unknown field, I/O failure)
    2  the requested system is not identifiable under its budget
    3  an assertion the caller asked for failed (dominance or admissibility)
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bounds import identifiable_under_privacy, ppcr_bound
from .errors import (
    CalibrationError,
    NotIdentifiableError,
    ScenarioError,
    UnsupportedFamilyError,
)
from .experiments import ExperimentSpec, parse_matrix, run_experiment
from .fisher import (
    CauchyIID,
    Cos2Bounded,
    Gaussian,
    LaplaceIID,
    TwinUniform,
    admissibility_cross_term,
    empirical_score_mean,
    fisher_of_noise,
)
from .linalg import as_psd
from .mechanisms import MeasurementModel, make_mechanism


def _load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioError(f"config {path} must hold a JSON object")
    return raw


def _noise_from_config(cfg, m):
    """Noise family from the exclusive fields sigma_w / Sigma_w / noise."""
    given = [k for k in ("sigma_w", "Sigma_w", "noise") if k in cfg]
    if len(given) != 1:
        raise ScenarioError("exactly one of 'sigma_w', 'Sigma_w', 'noise' is required")
    try:
        return _build_noise(cfg, m)
    except ScenarioError:
        raise
    except KeyError as exc:
        raise ScenarioError(f"field '{given[0]}' is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field '{given[0]}' is invalid: {exc}") from None


def _build_noise(cfg, m):
    if "sigma_w" in cfg:
        sig = float(cfg["sigma_w"])
        if sig <= 0:
            raise ScenarioError("field 'sigma_w' must be > 0")
        return Gaussian(np.zeros(m), sig**2 * np.eye(m))
    if "Sigma_w" in cfg:
        return Gaussian(np.zeros(m), parse_matrix(cfg["Sigma_w"], "Sigma_w"))
    desc = cfg["noise"]
    if not isinstance(desc, dict) or "family" not in desc:
        raise ScenarioError("field 'noise' must be an object with a 'family'")
    fam = desc["family"]
    if fam == "gaussian":
        if "cov" in desc:
            cov = parse_matrix(desc["cov"], "noise.cov")
        else:
            cov = float(desc.get("sigma", 1.0)) ** 2 * np.eye(m)
        mean = np.asarray(desc.get("mean", np.zeros(m)), float)
        return Gaussian(mean, cov)
    if fam == "laplace":
        return LaplaceIID(float(desc["scale"]), m)
    if fam == "cauchy":
        return CauchyIID(float(desc["scale"]), m)
    if fam == "cos2":
        if "width" in desc:
            half = 0.5 * float(desc["width"])
            return Cos2Bounded(-half, half, m)
        return Cos2Bounded(float(desc["lower"]), float(desc["upper"]), m)
    if fam == "twin-uniform":
        return TwinUniform(
            float(desc.get("center", 1.0)), np.asarray(desc["half_width"], float), m
        )
    raise ScenarioError(f"unknown noise family {fam!r}")


def cmd_bound(args):
    cfg = _load_config(args.config)
    if "H" not in cfg or "S" not in cfg:
        raise ScenarioError("bound config needs fields 'H' and 'S'")
    h = parse_matrix(cfg["H"], "H")
    s_val = cfg["S"]
    try:
        if not np.isscalar(s_val):
            arr = np.asarray(s_val, dtype=float)
            # a 1-D S holds per-channel budget levels, i.e. diag(S)
            s_val = np.diag(arr) if arr.ndim == 1 else arr
        s = as_psd(s_val, dim=h.shape[0], name="S").entries
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"field 'S' is invalid: {exc}") from None
    noise = _noise_from_config(cfg, h.shape[0])
    try:
        fisher_y = fisher_of_noise(noise)
    except UnsupportedFamilyError as exc:
        raise ScenarioError(str(exc)) from None
    result = ppcr_bound(h, s, fisher_y, attainable=isinstance(noise, Gaussian))
    out = {
        "identifiable": result.identifiable,
        "attainable": result.attainable,
        "pp_fisher": result.pp_fisher.tolist(),
        "sigma_ppcr": None if result.sigma is None else result.sigma.tolist(),
        "trace": None if result.sigma is None else result.trace,
    }
    print(json.dumps(out, indent=2))
    return 0 if result.identifiable else 2


def _parse_grid_arg(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise ScenarioError("--grid must look like start:step:stop")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError:
        raise ScenarioError("--grid must contain three numbers") from None
    return {"start": start, "step": step, "stop": stop}


def cmd_run(args):
    spec = ExperimentSpec.from_file(args.config)
    grid = _parse_grid_arg(args.grid) if args.grid else None
    if grid is not None and spec.scenario != "mech_sweep":
        raise ScenarioError("--grid only applies to the mech_sweep scenario")
    spec = spec.with_overrides(reps=args.reps, seed=args.seed, grid=grid)
    threads = args.threads
    if threads is None:
        threads = int(os.environ.get("PPCR_THREADS", "1"))
    if threads < 1:
        raise ScenarioError("--threads must be >= 1")

    result = run_experiment(spec, threads=threads)
    paths = result.write_csv(args.out)
    print(result.summary_text())
    print(f"result_hash: {result.result_hash()}")
    for path in paths:
        print(f"wrote {path}")
    if args.svg:
        from .svgplot import plot_table

        for name in result.tables:
            svg_path = os.path.join(args.out, f"{name}.svg")
            try:
                plot_table(result, name, svg_path)
            except ValueError as exc:
                print(f"skipped {svg_path}: {exc}")
                continue
            print(f"wrote {svg_path}")
    if args.assert_dominance and result.dominance_violations():
        print("dominance assertion failed", file=sys.stderr)
        return 3
    return 0


def cmd_check(args):
    cfg = _load_config(args.config)
    if "H" not in cfg:
        raise ScenarioError("check config needs field 'H'")
    h = parse_matrix(cfg["H"], "H")
    noise = _noise_from_config(cfg, h.shape[0])
    model = MeasurementModel(h, noise)
    mechs = cfg.get("mechanisms")
    if not isinstance(mechs, list) or not mechs:
        raise ScenarioError("check config needs a non-empty 'mechanisms' list")
    region = None
    if "y_region" in cfg:
        region = (
            np.asarray(cfg["y_region"][0], float),
            np.asarray(cfg["y_region"][1], float),
        )

    ident_ok = True
    audit_ok = True
    for desc in mechs:
        if not isinstance(desc, dict):
            raise ScenarioError("each entry of 'mechanisms' must be an object")
        label = desc.get("kind", "?")
        if "budget_s" in desc:
            try:
                s_mat = float(desc["budget_s"]) * np.eye(model.m)
            except (TypeError, ValueError):
                raise ScenarioError(
                    f"mechanism {label!r}: 'budget_s' must be a number"
                ) from None
            ident = identifiable_under_privacy(model.H, s_mat)
            print(f"{label}: identifiable={ident}")
            ident_ok &= ident
        try:
            mech = make_mechanism(model, desc, y_region=region)
        except ScenarioError:
            raise
        except CalibrationError as exc:
            print(f"{label}: SKIP (cannot calibrate: {exc})")
            continue
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"mechanism {label!r} is invalid: {exc}") from None
        score_pass = None
        try:
            score = empirical_score_mean(mech, model, args.samples, args.seed)
            score_pass = bool(np.all(np.abs(score.value) <= 5.0 * np.maximum(score.stderr, 1e-12)))
        except UnsupportedFamilyError:
            pass  # no channel score in closed form; the cross term may still decide
        try:
            cross = admissibility_cross_term(mech, model, args.samples, args.seed + 1)
        except UnsupportedFamilyError:
            print(f"{label}: SKIP (conditional density not auditable in closed form)")
            continue
        cross_pass = bool(np.all(np.abs(cross.value) <= 5.0 * np.maximum(cross.stderr, 1e-12)))
        ok = cross_pass and score_pass is not False
        audit_ok &= ok
        worst = float(np.max(np.abs(cross.value) / np.maximum(cross.stderr, 1e-12)))
        print(
            f"{label}: admissibility {'PASS' if ok else 'FAIL'} "
            f"(score-mean zero: {score_pass}, cross-term zero: {cross_pass}, "
            f"worst cross z-score {worst:.2f})"
        )
    if not ident_ok:
        return 2
    if not audit_ok:
        return 3
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ppcrb",
        description="Privacy-constrained estimation bounds, mechanisms, and simulations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bound = sub.add_parser("bound", help="evaluate the error lower bound for one system")
    p_bound.add_argument("--config", required=True, help="JSON file with H, S and the noise")
    p_bound.set_defaults(func=cmd_bound)

    p_run = sub.add_parser("run", help="run a simulation scenario and write CSV tables")
    p_run.add_argument("--config", required=True, help="JSON scenario file")
    p_run.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p_run.add_argument("--reps", type=int, default=None, help="override the replication count")
    p_run.add_argument("--grid", default=None, help="budget grid start:step:stop (mech_sweep)")
    p_run.add_argument("--out", default="results", help="output directory for CSV tables")
    p_run.add_argument("--svg", action="store_true", help="also write SVG plots")
    p_run.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker processes (default: PPCR_THREADS or 1); results do not depend on it",
    )
    p_run.add_argument(
        "--assert-dominance",
        action="store_true",
        help="exit 3 if any estimator beats its bound by more than 3 standard errors",
    )
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="audit identifiability and mechanism admissibility")
    p_check.add_argument("--config", required=True, help="JSON file with H, noise, mechanisms")
    p_check.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample count")
    p_check.add_argument("--seed", type=int, default=0, help="audit seed")
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, NotIdentifiableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, NotIdentifiableError) else 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
