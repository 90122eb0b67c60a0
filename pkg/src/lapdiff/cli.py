"""Command line interface wiring the library together.

Subcommands
-----------
gen             write a synthetic two-regime scenario (five matrix CSVs plus a manifest)
estimate        estimate the sparse difference from sample or covariance CSVs
experiment      run a sweep variant: synth, power, or plugin-compare
parse-matpower  convert a power case file into Laplacian CSVs

Exit codes are a stable scripting contract: 0 success, 2 invalid input,
3 numerical failure, 4 I/O failure, 130 interrupted. An interrupted sweep
flushes its completed rows before exiting.

Experiment settings can come from a flat `key = value` config file
(`#` comments allowed); any setting can also be given as a flag, and flags
win over file values. Matrices travel as headerless CSV, samples with a
`# n=<n> p=<p>` header line, both at 9 significant digits.
"""

import argparse
import math
import os
import signal
import sys
from contextlib import contextmanager

import numpy as np

from .errors import (
    CaseFileError,
    InvalidInputError,
    NumericalError,
    PluginUndefinedError,
)
from .estimator import SolverConfig, estimate_delta, plugin_delta
from .experiments import (
    ExperimentConfig,
    GridDeltaSpec,
    MatpowerBaseSpec,
    RandomBaseSpec,
    SigmaSpec,
    SweepInterrupted,
    make_sigma,
    run_sweep,
    write_sweep_csv,
)
from .matio import (
    parse_bool,
    parse_float,
    parse_float_list,
    parse_int,
    parse_int_list,
    read_keyvalue,
    read_matrix_csv,
    read_samples_csv,
    require_readable,
    write_keyvalue,
    write_matrix_csv,
)
from .matpower import case_laplacian, load_case118, parse_case
from .network import assemble_scenario, grid_delta, random_base_matrix, reduce_ground_node
from .sampling import precision_factor, precision_factor_from_covariance

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
EXIT_INTERRUPTED = 130


def _parse_value(text, key, kind):
    if kind == "int":
        return parse_int(text, key)
    if kind == "float":
        return parse_float(text, key)
    if kind == "bool":
        return parse_bool(text, key)
    if kind == "float_list":
        return tuple(parse_float_list(text, key))
    if kind == "int_list":
        return tuple(parse_int_list(text, key))
    if kind == "str_list":
        return tuple(tok for tok in text.replace(",", " ").split() if tok)
    return text.strip()


class _Settings:
    """Merged view of config-file values and flags; flags win."""

    def __init__(self, args, allowed):
        self.args = args
        self.allowed = allowed
        self.file = {}
        if getattr(args, "config", None) is not None:
            require_readable(args.config, "config file")
            self.file = read_keyvalue(args.config)
            for key in self.file:
                if key not in allowed:
                    raise InvalidInputError(
                        f"config key {key!r} is not valid for this experiment variant"
                    )

    def get(self, key, default=None):
        kind = self.allowed[key]
        flag = getattr(self.args, key, None)
        if flag is not None:
            if isinstance(flag, str):
                return _parse_value(flag, key, kind)
            return flag
        if key in self.file:
            return _parse_value(self.file[key], key, kind)
        return default

    def given(self, key):
        return getattr(self.args, key, None) is not None or key in self.file


_COMMON_EXPERIMENT_KEYS = {
    "instances": "int",
    "lambda_scale": "float",
    "support_epsilon": "float",
    "seed": "int",
    "estimators": "str_list",
    "sample_sizes": "int_list",
    "rho": "float",
    "max_iter": "int",
    "tol_consensus": "float",
    "weight_min": "float",
    "weight_max": "float",
    "sign_mode": "str",
    "sigma": "str",
    "sigma_min": "float",
    "sigma_max": "float",
    "sigma_condition": "float",
}

_SYNTH_KEYS = dict(
    _COMMON_EXPERIMENT_KEYS,
    ratios="float_list",
    dims="int_list",
    density="float",
    margin="float",
    base_scale="float",
)

_POWER_KEYS = dict(
    _COMMON_EXPERIMENT_KEYS,
    ratios="float_list",
    case="str",
    weight_mode="str",
    base_scale="float",
)

_PLUGIN_COMPARE_KEYS = dict(
    _COMMON_EXPERIMENT_KEYS,
    p="int",
    densities="float_list",
    margin="float",
    base_scale="float",
)


@contextmanager
def _termination_as_interrupt():
    """Route SIGTERM through the KeyboardInterrupt path so sweeps flush rows."""

    def handler(signum, frame):
        raise KeyboardInterrupt

    previous = None
    try:
        previous = signal.signal(signal.SIGTERM, handler)
    except ValueError:
        pass
    try:
        yield
    finally:
        if previous is not None:
            signal.signal(signal.SIGTERM, previous)


def cmd_gen(args):
    if args.p < 4:
        raise InvalidInputError(f"p must be at least 4 for a grid scenario, got {args.p}")
    delta = grid_delta(
        args.p,
        weight_range=(args.weight_min, args.weight_max),
        sign_mode=args.sign_mode,
        seed=[args.seed, 0],
    )
    b1 = random_base_matrix(
        args.p, args.density, margin=args.margin, scale=args.scale, seed=[args.seed, 1]
    )
    sigma_spec = SigmaSpec(
        kind=args.sigma,
        value_range=(args.sigma_min, args.sigma_max),
        condition=args.sigma_condition,
    )
    sigma1 = make_sigma(sigma_spec, args.p, np.random.default_rng([args.seed, 2]))
    sigma2 = make_sigma(sigma_spec, args.p, np.random.default_rng([args.seed, 3]))
    scenario = assemble_scenario(b1, delta, sigma1, sigma2, seed=args.seed)

    os.makedirs(args.out, exist_ok=True)
    write_matrix_csv(os.path.join(args.out, "b1.csv"), scenario.b1)
    write_matrix_csv(os.path.join(args.out, "b2.csv"), scenario.b2)
    write_matrix_csv(os.path.join(args.out, "delta_true.csv"), scenario.delta_true)
    write_matrix_csv(os.path.join(args.out, "sigma_x1.csv"), scenario.sigma_x1)
    write_matrix_csv(os.path.join(args.out, "sigma_x2.csv"), scenario.sigma_x2)
    write_keyvalue(
        os.path.join(args.out, "manifest.txt"),
        {
            "command": "gen",
            "p": args.p,
            "delta": args.delta,
            "seed": args.seed,
            "density": args.density,
            "margin": args.margin,
            "scale": args.scale,
            "weight_min": args.weight_min,
            "weight_max": args.weight_max,
            "sign_mode": args.sign_mode,
            "sigma": args.sigma,
            "sigma_min": args.sigma_min,
            "sigma_max": args.sigma_max,
            "sigma_condition": args.sigma_condition,
        },
    )
    print(f"wrote scenario p={args.p} to {args.out}")
    return EXIT_OK


def _load_estimate_inputs(args):
    """Resolve the sample-vs-covariance input mode and load everything."""
    use_samples = args.samples1 is not None or args.samples2 is not None
    use_cov = args.cov1 is not None or args.cov2 is not None
    if use_samples and use_cov:
        raise InvalidInputError("give sample CSVs or covariance CSVs, not both")
    if not use_samples and not use_cov:
        raise InvalidInputError("inputs required: --samples1/--samples2 or --cov1/--cov2")
    if use_samples and (args.samples1 is None or args.samples2 is None):
        raise InvalidInputError("both --samples1 and --samples2 are required")
    if use_cov and (args.cov1 is None or args.cov2 is None):
        raise InvalidInputError("both --cov1 and --cov2 are required")
    if args.unknown_sigma and (args.sigma_x1 is not None or args.sigma_x2 is not None):
        raise InvalidInputError("--unknown-sigma conflicts with --sigma-x1/--sigma-x2")
    if not args.unknown_sigma and (args.sigma_x1 is None or args.sigma_x2 is None):
        raise InvalidInputError(
            "--sigma-x1 and --sigma-x2 are required unless --unknown-sigma is set"
        )

    paths = [args.samples1, args.samples2] if use_samples else [args.cov1, args.cov2]
    for path in paths + [args.sigma_x1, args.sigma_x2]:
        if path is not None:
            require_readable(path, "input file")

    if use_samples:
        y1 = read_samples_csv(args.samples1)
        y2 = read_samples_csv(args.samples2)
        if y1.shape[1] != y2.shape[1]:
            raise InvalidInputError(
                f"sample files disagree on dimension: {y1.shape[1]} vs {y2.shape[1]}"
            )
        p = y1.shape[1]
        n1, n2 = y1.shape[0], y2.shape[0]
        first, second = y1, y2
    else:
        c1 = read_matrix_csv(args.cov1)
        c2 = read_matrix_csv(args.cov2)
        if c1.shape != c2.shape or c1.shape[0] != c1.shape[1]:
            raise InvalidInputError(
                f"covariance files must be square and same-shaped, got {c1.shape} and {c2.shape}"
            )
        p = c1.shape[0]
        n1, n2 = args.n1, args.n2
        first, second = c1, c2

    if args.unknown_sigma:
        sigma1 = sigma2 = np.eye(p)
    else:
        sigma1 = read_matrix_csv(args.sigma_x1)
        sigma2 = read_matrix_csv(args.sigma_x2)
        if sigma1.shape != (p, p) or sigma2.shape != (p, p):
            raise InvalidInputError(
                f"injection covariances must be {p} x {p}, got "
                f"{sigma1.shape} and {sigma2.shape}"
            )
    return use_samples, first, second, sigma1, sigma2, p, n1, n2


def cmd_estimate(args):
    use_samples, first, second, sigma1, sigma2, p, n1, n2 = _load_estimate_inputs(args)

    if args.lam is not None:
        lam = args.lam
    else:
        if n1 is None or n2 is None:
            raise InvalidInputError(
                "--lambda is required with covariance inputs unless --n1 and --n2 are given"
            )
        lam = args.lambda_scale * math.sqrt(math.log(p) / min(n1, n2))

    report = {
        "estimator": args.estimator,
        "unknown_sigma": args.unknown_sigma,
        "p": p,
        "lambda": lam,
    }
    if n1 is not None:
        report["n1"] = n1
    if n2 is not None:
        report["n2"] = n2

    if args.estimator == "plugin":
        if not use_samples:
            raise InvalidInputError("the plugin estimator needs sample CSVs, not covariances")
        if args.unknown_sigma:
            raise InvalidInputError("the plugin estimator needs known injection covariances")
        try:
            delta_hat = plugin_delta(first, second, sigma1, sigma2)
        except PluginUndefinedError as exc:
            raise PluginUndefinedError(f"plugin undefined for n <= p ({exc})") from exc
        iterations, converged = 0, True
        report.update(iterations=iterations, converged=converged)
    else:
        config = SolverConfig(
            lam=lam, rho=args.rho, max_iter=args.max_iter, tol_consensus=args.tol_consensus
        )
        if use_samples:
            psi1 = precision_factor(first, sigma1)
            psi2 = precision_factor(second, sigma2)
        else:
            psi1 = precision_factor_from_covariance(first, sigma1, n_used=n1 or 0)
            psi2 = precision_factor_from_covariance(second, sigma2, n_used=n2 or 0)
        est = estimate_delta(psi1, psi2, config)
        delta_hat, iterations, converged = est.delta, est.iterations, est.converged
        report.update(
            rho=args.rho,
            max_iter=args.max_iter,
            tol_consensus=args.tol_consensus,
            iterations=iterations,
            converged=converged,
            objective=est.objective,
        )

    os.makedirs(args.out, exist_ok=True)
    write_matrix_csv(os.path.join(args.out, "delta_hat.csv"), delta_hat)
    write_keyvalue(os.path.join(args.out, "report.txt"), report)
    if not converged:
        print(
            f"error: solver did not converge within {args.max_iter} iterations",
            file=sys.stderr,
        )
        return EXIT_NUMERICAL
    print(f"wrote delta_hat.csv and report.txt to {args.out}")
    return EXIT_OK


def _sweep_axes(settings, default_ratios):
    """Resolve the ratios-vs-explicit-sample-sizes axis, rejecting conflicts."""
    has_ratios = settings.given("ratios") if "ratios" in settings.allowed else False
    has_sizes = settings.given("sample_sizes")
    if has_ratios and has_sizes:
        raise InvalidInputError("give ratios or sample_sizes, not both")
    if has_sizes:
        return (), settings.get("sample_sizes")
    if has_ratios:
        return settings.get("ratios"), None
    return default_ratios, None


def _common_config_kwargs(settings, full_scale, default_instances):
    desk, full = default_instances
    return dict(
        instances=settings.get("instances", full if full_scale else desk),
        lambda_scale=settings.get("lambda_scale", 0.5),
        delta_spec=GridDeltaSpec(
            weight_range=(settings.get("weight_min", 0.4), settings.get("weight_max", 1.0)),
            sign_mode=settings.get("sign_mode", "mixed"),
        ),
        sigma_spec=SigmaSpec(
            kind=settings.get("sigma", "identity"),
            value_range=(settings.get("sigma_min", 0.5), settings.get("sigma_max", 2.0)),
            condition=settings.get("sigma_condition", 10.0),
        ),
        support_epsilon=settings.get("support_epsilon"),
        seed=settings.get("seed", 0),
        estimators=settings.get("estimators", ("dtrace",)),
        rho=settings.get("rho", 0.001),
        max_iter=settings.get("max_iter", 20000),
        tol_consensus=settings.get("tol_consensus", 1e-6),
    )


def _synth_jobs(args):
    settings = _Settings(args, _SYNTH_KEYS)
    full = args.full_scale
    ratios, sample_sizes = _sweep_axes(settings, (0.5, 1.0, 2.0, 3.0, 5.0))
    cfg = ExperimentConfig(
        dims=settings.get("dims", (16, 64, 256) if full else (16, 64)),
        ratios=ratios,
        sample_sizes=sample_sizes,
        base_spec=RandomBaseSpec(
            density=settings.get("density", 1.0),
            margin=settings.get("margin", 0.5),
            scale=settings.get("base_scale", 1.0),
        ),
        **_common_config_kwargs(settings, full, (20, 100)),
    )
    return [(cfg, args.out)]


def _power_jobs(args):
    settings = _Settings(args, _POWER_KEYS)
    full = args.full_scale
    case_path = settings.get("case")
    weight_mode = settings.get("weight_mode", "dc")
    if case_path is None:
        case = load_case118()
    else:
        require_readable(case_path, "case file")
        with open(case_path) as fh:
            case = parse_case(fh)
    lap, _ = case_laplacian(case, weight_mode)
    p = lap.shape[0] - 1
    ratios, sample_sizes = _sweep_axes(
        settings, (0.5, 1.0, 2.0, 3.0, 5.0) if full else (1.0, 3.0, 5.0)
    )
    cfg = ExperimentConfig(
        dims=(p,),
        ratios=ratios,
        sample_sizes=sample_sizes,
        base_spec=MatpowerBaseSpec(
            path=case_path,
            weight_mode=weight_mode,
            scale=settings.get("base_scale", 1.0),
        ),
        **_common_config_kwargs(settings, full, (10, 100)),
    )
    return [(cfg, args.out)]


def _plugin_compare_jobs(args):
    settings = _Settings(args, _PLUGIN_COMPARE_KEYS)
    full = args.full_scale
    p = settings.get("p", 60)
    densities = settings.get("densities", (0.2, 0.5, 0.8))
    sample_sizes = settings.get("sample_sizes", (2 * p, 4 * p))
    common = _common_config_kwargs(settings, full, (20, 100))
    if not settings.given("estimators"):
        common["estimators"] = ("dtrace", "plugin")
    jobs = []
    for s in densities:
        cfg = ExperimentConfig(
            dims=(p,),
            ratios=(),
            sample_sizes=sample_sizes,
            base_spec=RandomBaseSpec(
                density=s,
                margin=settings.get("margin", 0.5),
                scale=settings.get("base_scale", 1.0),
            ),
            **common,
        )
        jobs.append((cfg, f"{args.out}_s{s:g}.csv"))
    return jobs


def cmd_experiment(args):
    builders = {
        "synth": _synth_jobs,
        "power": _power_jobs,
        "plugin-compare": _plugin_compare_jobs,
    }
    jobs = builders[args.variant](args)
    with _termination_as_interrupt():
        for cfg, out_path in jobs:
            try:
                result = run_sweep(cfg)
            except SweepInterrupted as exc:
                write_sweep_csv(out_path, exc.rows)
                print(
                    f"interrupted: flushed {len(exc.rows)} completed rows to {out_path}",
                    file=sys.stderr,
                )
                return EXIT_INTERRUPTED
            write_sweep_csv(out_path, result.rows)
            print(f"wrote {len(result.rows)} rows to {out_path}")
    return EXIT_OK


def cmd_parse_matpower(args):
    require_readable(args.case, "case file")
    with open(args.case) as fh:
        case = parse_case(fh)
    lap, ground_index = case_laplacian(case, args.weight_mode, ground_bus=args.ground)
    reduced = reduce_ground_node(lap, ground_index)

    os.makedirs(args.out, exist_ok=True)
    write_matrix_csv(os.path.join(args.out, "laplacian.csv"), lap)
    write_matrix_csv(os.path.join(args.out, "reduced.csv"), reduced)
    summary = {
        "case_name": case.name,
        "bus_count": len(case.buses),
        "branch_count": len(case.branches),
        "in_service_branches": sum(1 for b in case.branches if b.status == 1),
        "ground_bus": case.bus_ids[ground_index],
        "weight_mode": args.weight_mode,
        "p_full": lap.shape[0],
        "p_reduced": reduced.shape[0],
        "connected": True,
    }
    write_keyvalue(os.path.join(args.out, "summary.txt"), summary)
    print(
        f"parsed {case.name}: {len(case.buses)} buses, {len(case.branches)} branches, "
        f"reduced to {reduced.shape[0]} x {reduced.shape[0]}"
    )
    return EXIT_OK


def _add_common_experiment_flags(sp):
    sp.add_argument("--config", help="key = value settings file; flags override it")
    sp.add_argument("--out", required=True, help="output CSV path (prefix for plugin-compare)")
    sp.add_argument("--instances", type=int)
    sp.add_argument("--lambda-scale", type=float, dest="lambda_scale")
    sp.add_argument("--support-epsilon", type=float, dest="support_epsilon")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--estimators", help="comma list from: dtrace, plugin, sqrt")
    sp.add_argument("--sample-sizes", dest="sample_sizes", help="comma list of explicit n values")
    sp.add_argument("--rho", type=float)
    sp.add_argument("--max-iter", type=int, dest="max_iter")
    sp.add_argument("--tol-consensus", type=float, dest="tol_consensus")
    sp.add_argument("--weight-min", type=float, dest="weight_min")
    sp.add_argument("--weight-max", type=float, dest="weight_max")
    sp.add_argument("--sign-mode", choices=("mixed", "positive"), dest="sign_mode")
    sp.add_argument("--sigma", choices=("identity", "diagonal", "dense"))
    sp.add_argument("--sigma-min", type=float, dest="sigma_min")
    sp.add_argument("--sigma-max", type=float, dest="sigma_max")
    sp.add_argument("--sigma-condition", type=float, dest="sigma_condition")
    sp.add_argument(
        "--full-scale",
        action="store_true",
        dest="full_scale",
        help="publication-scale defaults (more instances and dimensions); slow",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lapdiff",
        description="Estimate sparse differences between network Laplacians "
        "from node-potential observations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a synthetic two-regime scenario")
    gen.add_argument("--p", type=int, required=True)
    gen.add_argument("--delta", choices=("grid",), default="grid")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default=".")
    gen.add_argument("--density", type=float, default=1.0)
    gen.add_argument("--margin", type=float, default=0.5)
    gen.add_argument("--scale", type=float, default=1.0)
    gen.add_argument("--weight-min", type=float, default=0.4, dest="weight_min")
    gen.add_argument("--weight-max", type=float, default=1.0, dest="weight_max")
    gen.add_argument("--sign-mode", choices=("mixed", "positive"), default="mixed", dest="sign_mode")
    gen.add_argument("--sigma", choices=("identity", "diagonal", "dense"), default="identity")
    gen.add_argument("--sigma-min", type=float, default=0.5, dest="sigma_min")
    gen.add_argument("--sigma-max", type=float, default=2.0, dest="sigma_max")
    gen.add_argument("--sigma-condition", type=float, default=10.0, dest="sigma_condition")
    gen.set_defaults(entry=cmd_gen)

    est = sub.add_parser("estimate", help="estimate the difference from CSV inputs")
    est.add_argument("--samples1")
    est.add_argument("--samples2")
    est.add_argument("--cov1")
    est.add_argument("--cov2")
    est.add_argument("--sigma-x1", dest="sigma_x1")
    est.add_argument("--sigma-x2", dest="sigma_x2")
    est.add_argument(
        "--unknown-sigma",
        action="store_true",
        dest="unknown_sigma",
        help="injection covariances unknown: whiten with the identity and "
        "estimate the difference of inverse-covariance square roots",
    )
    est.add_argument("--estimator", choices=("dtrace", "plugin"), default="dtrace")
    est.add_argument("--lambda", type=float, dest="lam")
    est.add_argument("--lambda-scale", type=float, default=0.5, dest="lambda_scale")
    est.add_argument("--n1", type=int)
    est.add_argument("--n2", type=int)
    est.add_argument("--rho", type=float, default=0.001)
    est.add_argument("--max-iter", type=int, default=20000, dest="max_iter")
    est.add_argument("--tol-consensus", type=float, default=1e-6, dest="tol_consensus")
    est.add_argument("--out", default=".")
    est.set_defaults(entry=cmd_estimate)

    exp = sub.add_parser("experiment", help="run a sweep and write its rows as CSV")
    variants = exp.add_subparsers(dest="variant", required=True)

    synth = variants.add_parser("synth", help="random base matrices, lattice differences")
    _add_common_experiment_flags(synth)
    synth.add_argument("--dims", help="comma list of matrix dimensions")
    synth.add_argument("--ratios", help="comma list of rescaled sample sizes")
    synth.add_argument("--density", type=float)
    synth.add_argument("--margin", type=float)
    synth.add_argument("--base-scale", type=float, dest="base_scale")
    synth.set_defaults(entry=cmd_experiment)

    power = variants.add_parser("power", help="base matrix from a power case file")
    _add_common_experiment_flags(power)
    power.add_argument("--ratios", help="comma list of rescaled sample sizes")
    power.add_argument("--case", help="case file path (default: bundled 118-bus case)")
    power.add_argument("--weight-mode", choices=("dc", "magnitude_y"), dest="weight_mode")
    power.add_argument("--base-scale", type=float, dest="base_scale")
    power.set_defaults(entry=cmd_experiment)

    compare = variants.add_parser(
        "plugin-compare", help="paired sweep against the plug-in baseline, one CSV per density"
    )
    _add_common_experiment_flags(compare)
    compare.add_argument("--p", type=int)
    compare.add_argument("--densities", help="comma list of base matrix densities")
    compare.add_argument("--margin", type=float)
    compare.add_argument("--base-scale", type=float, dest="base_scale")
    compare.set_defaults(entry=cmd_experiment)

    pm = sub.add_parser("parse-matpower", help="convert a power case to Laplacian CSVs")
    pm.add_argument("--case", required=True)
    pm.add_argument("--weight-mode", choices=("dc", "magnitude_y"), default="dc", dest="weight_mode")
    pm.add_argument("--ground", type=int, help="bus id to ground (default: the slack bus)")
    pm.add_argument("--out", default=".")
    pm.set_defaults(entry=cmd_parse_matpower)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.entry(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERRUPTED
    except (InvalidInputError, CaseFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
