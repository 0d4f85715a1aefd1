"""
Command-line front end: design, simulate, estimate, montecarlo and
demo-itb-gap subcommands writing CSV / JSON result files.

Exit codes: 0 success, 2 configuration or validation failure, 3 numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from config import (build_adapter, build_model, build_prior, build_problem, config_digest, load_config,
                    load_environment)
from design_optimizer import dominant_frequency, optimize_signal, reference_signal
from errors import ConfigurationError, InfoDesignError, NumericalError
from estimation import compare_signals, map_estimate, trial_seeds
from info_bounds import itb_bcrb_gap_demo, itb_bcrb_gap_gaussian, kt_lower_bound
from kalman_engine import neg_log_posterior
from model_core import InputSignal, sample_prior, simulate
from result_writer import (format_float, read_observations, read_signal, write_csv, write_json,
                           write_observations, write_signal)

logger = logging.getLogger(__name__)


def build_parser(env):
    parser = argparse.ArgumentParser(prog="infodesign", description="Information-optimal input design")
    parser.add_argument("--config", type=Path, help="Experiment TOML file")
    parser.add_argument("--seed", type=int, help="Master seed (overrides the config)")
    parser.add_argument("--threads", type=int, help=f"Worker cap (default {env['threads']})")
    parser.add_argument("--out", type=Path, help=f"Output directory (default {env['output_dir']})")
    parser.add_argument("--log-level", type=str.upper, default=env["log_level"].upper(),
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("design", help="Maximize the design criterion and report the bound at the optimum")

    simulate_cmd = sub.add_parser("simulate", help="Simulate observations under a signal")
    simulate_cmd.add_argument("--signal", type=Path, help="Signal CSV (default: zero signal)")
    simulate_cmd.add_argument("--theta", type=float, nargs="+", help="True parameter (default: drawn from the prior)")

    estimate_cmd = sub.add_parser("estimate", help="MAP estimate from one observation record")
    estimate_cmd.add_argument("--signal", type=Path, help="Signal CSV (default: zero signal)")
    estimate_cmd.add_argument("--observations", type=Path, required=True, help="Observation CSV")

    mc_cmd = sub.add_parser("montecarlo", help="Monte Carlo MAP error for the configured signals")
    mc_cmd.add_argument("--signal", action="append", default=[], metavar="NAME=PATH",
                        help="Additional signal file, repeatable")
    mc_cmd.add_argument("--trials", type=int, help="Override montecarlo.trials")

    gap_cmd = sub.add_parser("demo-itb-gap", help="ITB versus BCRB on the scalar location model")
    gap_cmd.add_argument("--alpha", type=float, nargs="+", help="Prior smoothing parameters")
    gap_cmd.add_argument("--grid", type=int, help="Simpson points per segment")
    gap_cmd.add_argument("--gaussian-variance", type=float, help="Also tabulate the Gaussian-prior variant")
    return parser


class RunContext:
    """Resolved settings shared by every subcommand: flags over config over environment."""

    def __init__(self, args, env):
        self.config = load_config(args.config) if args.config else None
        cfg = self.config
        self.seed = args.seed if args.seed is not None else (cfg.seed if cfg and cfg.seed is not None else 0)
        if args.threads is not None:
            self.threads, source = args.threads, "--threads"
        elif cfg and cfg.threads is not None:
            self.threads, source = cfg.threads, "config threads"
        else:
            self.threads, source = env["threads"], "INFODESIGN_THREADS"
        if self.threads < 1:
            raise ConfigurationError(f"{source} must be >= 1, got {self.threads}")
        out = args.out or (cfg.output_dir if cfg and cfg.output_dir else env["output_dir"])
        self.out = Path(out)
        self.digest = config_digest(cfg) if cfg else "none"

    @property
    def provenance(self):
        return {"config_digest": self.digest, "seed": self.seed}

    def require_config(self, command):
        if self.config is None:
            raise ConfigurationError(f"'{command}' needs --config")
        return self.config


def _signal_or_zero(path, model, horizon):
    if path is None:
        return InputSignal(np.zeros((horizon, model.input_dim)))
    return read_signal(path, model.input_dim, horizon)


# --- Subcommands ---
def cmd_design(ctx, args):
    config = ctx.require_config("design")
    model = build_model(config)
    problem = build_problem(config, model)
    options = config.design.model_copy(update={"seed": ctx.seed})
    adapter = build_adapter(config, model) if options.objective == "avg_d_optimal" else None
    result = optimize_signal(problem, options, adapter, ctx.threads)
    bound = kt_lower_bound(problem, result.u_star, ctx.threads)

    payload = {"bound": bound.model_dump(), "design": result.summary(options.objective).model_dump()}
    if model.time_step is not None and model.input_dim == 1:
        payload["dominant_frequency"] = dominant_frequency(result.u_star, model.time_step)
    write_signal(ctx.out / "signal.csv", result.u_star, ctx.provenance)
    write_json(ctx.out / "bound.json", payload, ctx.provenance)
    write_csv(ctx.out / "trace.csv", ["iter", "objective", "grad_norm", "step"],
              ([t.iteration, t.objective, t.grad_norm, t.step] for t in result.trace), ctx.provenance)
    logger.info("I_l = %.6g nats (%.6g bits), H_theta = %.6g nats", bound.I_l, bound.I_l_bits, bound.H_theta)
    return 0


def cmd_simulate(ctx, args):
    config = ctx.require_config("simulate")
    model = build_model(config)
    U = _signal_or_zero(args.signal, model, config.horizon)
    theta_seed, sim_seed = trial_seeds(ctx.seed, 0)
    if args.theta is not None:
        theta = model.check_theta(np.asarray(args.theta, dtype=float))
    else:
        theta = np.asarray(sample_prior(build_prior(config, model), theta_seed), dtype=float).reshape(-1)
    trajectory = simulate(model, theta, U, sim_seed)
    provenance = {**ctx.provenance, "theta": ";".join(format_float(t) for t in theta)}
    write_observations(ctx.out / "observations.csv", trajectory.outputs, provenance)
    return 0


def cmd_estimate(ctx, args):
    config = ctx.require_config("estimate")
    model = build_model(config)
    prior = build_prior(config, model)
    U = _signal_or_zero(args.signal, model, config.horizon)
    Y = read_observations(args.observations, model.output_dim, U.horizon)
    theta_hat = map_estimate(model, prior, Y, U, config.estimation)
    payload = {
        "theta_hat": theta_hat.tolist(),
        "neg_log_posterior": neg_log_posterior(model, prior, theta_hat, Y, U),
    }
    if model.display_scale is not None:
        payload["theta_hat_display"] = model.to_display_units(theta_hat).tolist()
    write_json(ctx.out / "estimate.json", payload, ctx.provenance)
    return 0


def _config_signals(ctx, config, model, problem):
    signals = {}
    prior_mean = np.sum(problem.dprior.weights[:, None] * problem.dprior.nodes, axis=0)
    for index, spec in enumerate(config.montecarlo.signals):
        if spec.name in signals:
            raise ConfigurationError(f"duplicate signal name '{spec.name}'")
        if spec.kind == "file":
            if not spec.path:
                raise ConfigurationError(f"signal '{spec.name}' of kind 'file' needs a path")
            signals[spec.name] = read_signal(spec.path, model.input_dim, config.horizon)
        elif spec.kind == "design":
            objective = spec.objective or config.design.objective
            options = config.design.model_copy(update={"seed": ctx.seed, "objective": objective})
            adapter = build_adapter(config, model) if objective == "avg_d_optimal" else None
            signals[spec.name] = optimize_signal(problem, options, adapter, ctx.threads).u_star
        else:
            rng = np.random.default_rng(np.random.SeedSequence([ctx.seed, index]))
            stacked = reference_signal(spec.kind, problem.constraint, model, config.horizon, prior_mean, rng)
            signals[spec.name] = InputSignal.from_stacked(stacked, model.input_dim)
    return signals


def cmd_montecarlo(ctx, args):
    config = ctx.require_config("montecarlo")
    model = build_model(config)
    prior = build_prior(config, model)
    problem = build_problem(config, model, prior)
    signals = _config_signals(ctx, config, model, problem)
    for item in args.signal:
        name, sep, path = item.partition("=")
        if not sep or not name or not path:
            raise ConfigurationError(f"--signal expects NAME=PATH, got '{item}'")
        if name in signals:
            raise ConfigurationError(f"duplicate signal name '{name}'")
        signals[name] = read_signal(path, model.input_dim, config.horizon)
    trials = args.trials or config.montecarlo.trials

    reports = compare_signals(model, prior, signals, trials, ctx.seed, config.estimation, ctx.threads)
    rows, summary = [], []
    n = model.param_dim
    for report in reports:
        bound = kt_lower_bound(problem, signals[report.signal], ctx.threads)
        rows.append([report.signal, report.trials, report.mse, report.stderr,
                     "" if report.rmse_display is None else report.rmse_display,
                     bound.I_l, bound.itb_floor, report.theta_digest])
        summary.append({"signal": report.signal, "trials": report.trials, "mse": report.mse,
                        "stderr": report.stderr, "seed": report.seed, "rmse_display": report.rmse_display,
                        "I_l": bound.I_l, "itb_floor": bound.itb_floor})
        trial_rows = ([t, *report.theta_true[t], *report.theta_hat[t], report.squared_errors[t]]
                      for t in range(report.trials))
        header = (["trial"] + [f"theta_true[{i}]" for i in range(n)] + [f"theta_hat[{i}]" for i in range(n)]
                  + ["sq_error"])
        write_csv(ctx.out / f"trials_{report.signal}.csv", header, trial_rows, ctx.provenance)

    write_csv(ctx.out / "compare.csv",
              ["signal", "trials", "mse", "stderr", "rmse_display", "I_l", "itb_floor", "theta_digest"],
              rows, ctx.provenance)
    write_json(ctx.out / "summary.json", {"signals": summary}, ctx.provenance)
    return 0


def cmd_demo_itb_gap(ctx, args):
    demo = ctx.config.demo if ctx.config else None
    alphas = args.alpha or (demo.alphas if demo else [0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0])
    grid = args.grid or (demo.grid if demo else 4001)
    if any(not a > 0 for a in alphas):
        raise ConfigurationError(f"alpha values must be positive, got {alphas}")
    header = ["alpha", "J_P", "J_D", "bcrb_floor", "itb_floor", "H_theta", "information", "jp_bound_holds"]
    reports = [itb_bcrb_gap_demo(alpha, grid) for alpha in alphas]
    write_csv(ctx.out / "gap.csv", header,
              ([r.alpha, r.J_P, r.J_D, r.bcrb_floor, r.itb_floor, r.H_theta, r.information, r.jp_bound_holds]
               for r in reports), ctx.provenance)
    if args.gaussian_variance is not None:
        r = itb_bcrb_gap_gaussian(args.gaussian_variance)
        write_csv(ctx.out / "gap_gaussian.csv", ["variance", *header[1:]],
                  [[args.gaussian_variance, r.J_P, r.J_D, r.bcrb_floor, r.itb_floor, r.H_theta, r.information,
                    r.jp_bound_holds]], ctx.provenance)
    return 0


HANDLERS = {
    "design": cmd_design,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "montecarlo": cmd_montecarlo,
    "demo-itb-gap": cmd_demo_itb_gap,
}


def main(argv=None):
    env = load_environment()
    args = build_parser(env).parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(args.log_level)
    try:
        ctx = RunContext(args, env)
        return HANDLERS[args.command](ctx, args)
    except ValidationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return ConfigurationError.exit_code
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except InfoDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code if exc.exit_code in (2, 3) else ConfigurationError.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        logger.debug("unhandled numerical failure", exc_info=True)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NumericalError.exit_code
    except OSError as exc:
        print(f"cannot read or write {exc.filename or 'a file'}: {exc.strerror or exc}", file=sys.stderr)
        return ConfigurationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
