import os
import sys
import json
import logging
import math
from typing import Any, Dict, List, Optional

import click
import numpy as np
from pydantic import ValidationError
from rich.console import Console
from rich.progress import BarColumn, Progress, TaskProgressColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

from ..config.settings import ExperimentConfig, Settings, settings
from ..core import estimates_lab
from ..core.exceptions import ConfigError, CurvFlowError, InvariantFailure
from ..core.flow_engine import FAMILIES, blowup_rescale, build_family, integrate, sweep
from ..core.functionals import evaluate, pinching_verdicts
from ..core.geometry_catalog import PI2, build_model, yamabe_bracket
from ..core.jet_chart import verify_first_variations, verify_identities
from ..core.symbol_analyzer import classify, flow_coefficient, symbol, threshold, verdict_table
from ..monitoring.flow_monitors import monitors
from ..monitoring.status_reporter import StatusReporter
from ..monitoring.telemetry import Telemetry

# stdout carries artifacts; everything for humans goes to stderr
console = Console(stderr=True)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

logging.basicConfig(
    level=getattr(logging, settings.monitoring.log_level.upper(), logging.INFO),
    format=LOG_FORMAT,
    handlers=[logging.StreamHandler(sys.stderr)],
)

logger = logging.getLogger("curvflow")

MODELS = ("s3", "s4", "t3", "t4", "s2xs2", "milnor")


def setup_logging(log_file: Optional[str] = None) -> None:
    """Set up logging to file"""
    if not log_file:
        return
    log_dir = os.path.dirname(log_file)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)
    file_handler = logging.FileHandler(log_file)
    file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(file_handler)
    logger.info(f"Logging to: {log_file}")


def load_settings(config_file: Optional[str] = None) -> Settings:
    """Load settings from a config file and install them as the process-wide defaults"""
    if not config_file:
        return settings
    logger.info(f"Loading settings from: {config_file}")
    try:
        loaded = Settings.load_from_file(config_file)
    except OSError as e:
        raise ConfigError(f"Cannot read {config_file}: {e}") from e
    for name in Settings.model_fields:
        setattr(settings, name, getattr(loaded, name))
    return settings


def _json_safe(value: Any) -> Any:
    """Plain JSON values; non-finite floats become null"""
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    return value


def dump_json(data: Dict[str, Any]) -> str:
    return json.dumps(_json_safe(data), indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def emit(data: Dict[str, Any], output: Optional[str], filename: str) -> None:
    """Write a JSON artifact into the output directory, or to stdout without one"""
    text = dump_json(data)
    if output:
        os.makedirs(output, exist_ok=True)
        path = os.path.join(output, filename)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"wrote {path}")
    else:
        click.echo(text, nl=False)


def _open_artifact(output: str, filename: str):
    os.makedirs(output, exist_ok=True)
    return open(os.path.join(output, filename), "w", encoding="utf-8", newline="")


def _require_invariants(failures: List[str], context: str) -> None:
    if failures:
        raise InvariantFailure(f"{context}: {', '.join(failures)}")


def run_identities(cfg: ExperimentConfig, telemetry: Telemetry) -> None:
    tol = settings.jet.identity_tol
    reports = []
    for seed in cfg.seeds:
        reports.extend(verify_identities(seed, cfg.n, cfg.degree))
        reports.extend(verify_first_variations(seed, cfg.n, cfg.degree))
    for r in reports:
        telemetry.record_identity_check(r.passed(tol), r.residual)

    table = Table(title=f"Identity residuals (n={cfg.n}, degree={cfg.degree})")
    table.add_column("Identity")
    table.add_column("Kind")
    table.add_column("Worst residual", justify="right")
    worst: Dict[str, Any] = {}
    for r in reports:
        if r.name not in worst or r.residual > worst[r.name].residual:
            worst[r.name] = r
    for name in sorted(worst):
        r = worst[name]
        color = "green" if r.passed(tol) else "red"
        table.add_row(name, r.kind, f"[{color}]{r.residual:.3e}[/{color}]")
    console.print(table)

    failures = sorted({f"{r.name}(seed={r.seed})" for r in reports if not r.passed(tol)})
    emit({
        "n": cfg.n,
        "degree": cfg.degree,
        "seeds": cfg.seeds,
        "tolerance": tol,
        "passed": not failures,
        "reports": [r.to_dict() for r in reports],
    }, cfg.output, "identities.json")
    _require_invariants(failures, "identity residuals above tolerance")


def run_symbol(cfg: ExperimentConfig, telemetry: Telemetry) -> None:
    atol = settings.symbol.threshold_atol if cfg.atol is None else cfg.atol
    if cfg.a is None:
        a = flow_coefficient({"alpha": cfg.alpha, "dim": cfg.n})
    else:
        a = cfg.a
    verdict = classify(cfg.n, a, atol)
    xi = np.eye(cfg.n)[0] if cfg.xi is None else np.asarray(cfg.xi, dtype=float)
    op = symbol(cfg.n, a, xi)
    eigenvalues = op.eigenvalues()
    closed = op.closed_form_eigenvalues()
    residual = float(np.max(np.abs(eigenvalues - closed)))
    scale = 1e-12 * (1.0 + op.xi_norm2 ** 2 * (1.0 + abs(a) * cfg.n))

    rows = verdict_table([cfg.n], [threshold(cfg.n) - 0.05, threshold(cfg.n), threshold(cfg.n) + 0.05], atol)
    table = Table(title=f"Ellipticity around a = 1/(2(n-1)) for n={cfg.n}")
    table.add_column("a", justify="right")
    table.add_column("Class")
    for row in rows + [verdict]:
        table.add_row(f"{row.a:.6g}", row.classification)
    console.print(table)

    emit({
        "verdict": verdict.to_dict(),
        "atol": atol,
        "xi": xi,
        "eigenvalues": eigenvalues,
        "closed_form_eigenvalues": closed,
        "eigenvalue_residual": residual,
        "table": [r.to_dict() for r in rows],
    }, cfg.output, "symbol.json")
    telemetry.record_invariant(residual <= scale)
    _require_invariants(["eigenvalue_residual"] if residual > scale else [], "symbol spectrum")


def run_functionals(cfg: ExperimentConfig, telemetry: Telemetry) -> None:
    if not cfg.model:
        raise click.UsageError("functionals needs --model")
    model = build_model(cfg.model, cfg.params)
    report = evaluate(model, cfg.alpha)
    pi2 = settings.output.emit_pi2_units
    out: Dict[str, Any] = {"model": model.to_dict(), "functionals": report.to_dict(pi2)}
    lower, upper = yamabe_bracket(model, max(cfg.alpha, 0.0))
    out["yamabe_bracket"] = {"lower": lower, "upper": upper}
    if model.n == 4 and model.euler_char is not None:
        out["pinching"] = pinching_verdicts(model, cfg.alpha).to_dict(pi2)

    table = Table(title=f"Quadratic functionals of {model}")
    table.add_column("Functional")
    table.add_column("Value", justify="right")
    table.add_column("/ π²", justify="right")
    for name, value in sorted(report.values.items()):
        table.add_row(name, f"{value:.10g}", f"{value / PI2:.10g}")
    console.print(table)

    failures = []
    if report.gb_residual is not None and abs(report.gb_residual) > report.gb_tolerance():
        failures.append("gauss_bonnet")
    if report.decomposition_residual() > 1e-10:
        failures.append("decomposition")
    telemetry.record_invariant(not failures)
    emit(out, cfg.output, "functionals.json")
    _require_invariants(failures, f"functional identities on {model}")


def _flow_summary(traj, monitor_report) -> Dict[str, Any]:
    summary = traj.to_dict()
    summary["monitors"] = monitor_report.to_dict()
    if settings.output.emit_pi2_units:
        summary["F_pi2"] = {"initial": traj.states[0].F / PI2, "final": traj.final.F / PI2}
    return summary


def _sphere_oracle(traj) -> Optional[Dict[str, Any]]:
    """c(t)² = 1 + 12αt on the round S³ family started at c = 1"""
    family = traj.family
    if family.name != "s3-round" or family.alpha <= 0 or traj.states[0].theta[0] != 1.0:
        return None
    worst = 0.0
    for s in traj.states:
        exact = math.sqrt(1.0 + 12.0 * family.alpha * s.t)
        worst = max(worst, abs(s.theta[0] - exact) / exact)
    return {"max_relative_error": worst, "tolerance": 1e-6, "passed": worst <= 1e-6}


def run_flow(cfg: ExperimentConfig, telemetry: Telemetry) -> None:
    if not cfg.family:
        raise click.UsageError("flow needs --family")
    family = build_family(cfg.family, cfg.alpha)
    traj = integrate(family, cfg.theta0, cfg.controls, telemetry)
    report = monitors(traj)
    summary = _flow_summary(traj, report)
    oracle = _sphere_oracle(traj)
    if oracle is not None:
        summary["closed_form"] = oracle

    table = Table(title=f"Flow of {family}")
    table.add_column("Quantity")
    table.add_column("Initial", justify="right")
    table.add_column("Final", justify="right")
    first, last = traj.states[0], traj.final
    table.add_row("t", f"{first.t:.6g}", f"{last.t:.6g}")
    table.add_row("theta", ", ".join(f"{x:.8g}" for x in first.theta), ", ".join(f"{x:.8g}" for x in last.theta))
    table.add_row("F", f"{first.F:.10g}", f"{last.F:.10g}")
    table.add_row("|Rm|_inf", f"{first.rm_sup:.6g}", f"{last.rm_sup:.6g}")
    console.print(table)
    console.print(f"event: [bold]{traj.event}[/bold]")

    if cfg.output:
        with _open_artifact(cfg.output, "trajectory.csv") as f:
            traj.write_csv(f)
    emit(summary, cfg.output, "flow.json")

    failures = report.failures()
    if oracle is not None and not oracle["passed"]:
        failures.append("closed_form")
    telemetry.record_invariant(not failures)
    _require_invariants(failures, f"flow monitors on {family}")


def run_blowup(cfg: ExperimentConfig, telemetry: Telemetry) -> None:
    family = build_family(cfg.family or "s3-round", cfg.alpha)
    traj = integrate(family, cfg.theta0, cfg.controls, telemetry)
    sequence = blowup_rescale(traj, cfg.count)
    models = []
    failures = []
    for t_i, rescaled in sequence:
        original = family.model(next(s.theta for s in traj.states if s.t == t_i))
        before = yamabe_bracket(original)
        after = yamabe_bracket(rescaled)
        upper_drift = abs(after[1] - before[1]) / (1.0 + abs(before[1]))
        entry = {
            "t": t_i,
            "scale": original.rm_sup,
            "rm_sup": rescaled.rm_sup,
            "volume": rescaled.volume,
            "original_volume": original.volume,
            "rm_l2": rescaled.rm_l2,
            "original_rm_l2": original.rm_l2,
            "yamabe_before": list(before),
            "yamabe_after": list(after),
        }
        models.append(entry)
        if abs(rescaled.rm_sup - 1.0) > 1e-12:
            failures.append(f"rm_sup(t={t_i:.6g})")
        if upper_drift > 1e-10:
            failures.append(f"yamabe(t={t_i:.6g})")

    table = Table(title=f"Blow-up sequence of {family}")
    table.add_column("t_i", justify="right")
    table.add_column("scale", justify="right")
    table.add_column("rescaled |Rm|_inf", justify="right")
    for m in models:
        table.add_row(f"{m['t']:.10g}", f"{m['scale']:.6g}", f"{m['rm_sup']:.15g}")
    console.print(table)

    emit({
        "family": family.name,
        "alpha": family.alpha,
        "event": traj.event,
        "t_end": traj.final.t,
        "singular_time": -1.0 / (12.0 * family.alpha) if family.name == "s3-round" and family.alpha < 0 else None,
        "sequence": models,
    }, cfg.output, "blowup.json")
    telemetry.record_invariant(not failures)
    _require_invariants(failures, "blow-up rescaling")


def run_sweep(cfg: ExperimentConfig, telemetry: Telemetry) -> None:
    if not cfg.family:
        raise click.UsageError("sweep needs --family")
    alphas = cfg.alphas or [cfg.alpha]
    theta0s = cfg.theta0s or [cfg.theta0]
    reporter = StatusReporter(unit="trajectories")
    total = len(alphas) * len(theta0s)
    reporter.start_task(f"sweep {cfg.family}", total)
    progress = Progress(
        TextColumn("[bold blue]{task.description}"),
        BarColumn(),
        TaskProgressColumn(),
        TextColumn("•"),
        TimeElapsedColumn(),
        console=console,
    )
    try:
        with progress:
            task_id = progress.add_task(f"Sweeping {cfg.family}", total=total)

            def advance(event: str) -> None:
                reporter.increment_progress(outcome=event)
                progress.advance(task_id)

            outcomes = sweep(cfg.family, alphas, theta0s, cfg.controls, cfg.workers, advance)
    except CurvFlowError as e:
        reporter.fail_task(str(e))
        raise
    reporter.complete_task()
    logger.info(f"sweep events: {reporter.get_status()['outcomes']}")

    table = Table(title=f"Sweep outcomes for {cfg.family}")
    table.add_column("Configuration")
    table.add_column("Event")
    table.add_column("t_end", justify="right")
    for key, outcome in outcomes.items():
        table.add_row(key, outcome["event"], f"{outcome['t_end']:.6g}")
    console.print(table)
    emit({"family": cfg.family, "controls": cfg.controls.model_dump(), "outcomes": outcomes},
         cfg.output, "sweep.json")


def run_estimates(cfg: ExperimentConfig, telemetry: Telemetry) -> None:
    inequality = cfg.inequality or "interpolation"
    seed = cfg.seeds[0] if cfg.seeds else settings.estimates.seed
    count = cfg.count
    failures = []

    if inequality == "hamilton":
        corpus = estimates_lab.hamilton_corpus(count, seed)
        failed = [s for s, _, ok in corpus if not ok]
        if cfg.output:
            with _open_artifact(cfg.output, "hamilton.csv") as f:
                f.write("seed,C,holds\r\n")
                for s, c, ok in corpus:
                    f.write(f"{s},{c!r},{str(ok).lower()}\r\n")
        emit({"inequality": inequality, "count": count, "seed": seed, "failures": failed},
             cfg.output, "estimates.json")
        _require_invariants([f"seed={s}" for s in failed], "Hamilton sequence conclusion")
        return

    if inequality not in estimates_lab.INEQUALITIES:
        raise click.UsageError(f"unknown inequality {inequality!r}")
    if cfg.n not in (1, 2):
        raise click.UsageError(f"estimates run on the 1- or 2-torus, got n={cfg.n}")
    grids = cfg.grids or list(settings.estimates.grids)
    reporter = StatusReporter(unit="fields")
    reporter.start_task(f"{inequality} corpus", count * len(grids))
    try:
        study = estimates_lab.refinement_study(
            inequality, grids, count=count, seed=seed, n=cfg.n, band_limit=cfg.band_limit,
            max_workers=cfg.workers, progress=reporter.increment_progress, **cfg.estimate_params)
    except (CurvFlowError, ValueError) as e:
        reporter.fail_task(str(e))
        raise
    reporter.complete_task()

    results = study.pop("results")
    for r in results:
        telemetry.record_estimate_samples(len(r.samples), r.max_ratio)
    if cfg.output:
        for r in results:
            with _open_artifact(cfg.output, f"{inequality}_{r.grid}.csv") as f:
                r.write_csv(f)

    table = Table(title=f"{inequality} corpus maxima")
    table.add_column("Grid", justify="right")
    table.add_column("Max ratio", justify="right")
    for r in results:
        table.add_row(str(r.grid), f"{r.max_ratio:.10g}")
    console.print(table)

    if not all(math.isfinite(m) for m in study["maxima"]):
        failures.append("finite_maxima")
    if not study["stable"]:
        failures.append("refinement_stability")
    if inequality == "interpolation" and max(study["maxima"]) > 10.0:
        failures.append("interpolation_bound")
    study["corpora"] = [r.to_dict() for r in results]
    study["passed"] = not failures
    emit(study, cfg.output, "estimates.json")
    _require_invariants(failures, f"{inequality} corpus")


RUNNERS = {
    "identities": run_identities,
    "symbol": run_symbol,
    "functionals": run_functionals,
    "flow": run_flow,
    "blowup": run_blowup,
    "sweep": run_sweep,
    "estimates": run_estimates,
}


def execute(cfg: ExperimentConfig, telemetry: Optional[Telemetry] = None) -> None:
    """Run one validated experiment"""
    telemetry = telemetry or Telemetry()
    logger.info(f"running {cfg.subcommand}")
    try:
        RUNNERS[cfg.subcommand](cfg, telemetry)
    except InvariantFailure:
        telemetry.record_run(cfg.subcommand, 2)
        raise
    except (CurvFlowError, click.ClickException):
        telemetry.record_run(cfg.subcommand, 1)
        raise
    else:
        telemetry.record_run(cfg.subcommand, 0)
    finally:
        telemetry.save_metrics()


def _config(subcommand: str, **fields: Any) -> ExperimentConfig:
    data = {k: v for k, v in fields.items() if v is not None}
    try:
        return ExperimentConfig.model_validate({"subcommand": subcommand, **data})
    except ValidationError as e:
        raise ConfigError(f"Invalid {subcommand} configuration: {e}") from e


def _controls_from_flags(**overrides: Any) -> Dict[str, Any]:
    base = settings.flow.model_dump()
    base.update({k: v for k, v in overrides.items() if v is not None})
    return base


def _floats(text: Optional[str]) -> Optional[List[float]]:
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from e


def _params(pairs) -> Dict[str, float]:
    out = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise click.BadParameter(f"expected key=value, got {pair!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError as e:
            raise click.BadParameter(f"{key}: {value!r} is not a number") from e
    return out


class CurvFlowGroup(click.Group):
    """Click group mapping failures to exit codes: 1 for usage and config errors, 2 for failed invariants"""

    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            code = super().main(args=args, prog_name=prog_name, complete_var=complete_var,
                                standalone_mode=False, **extra)
        except click.ClickException as e:
            e.show()
            code = 1
        except click.Abort:
            click.echo("Aborted!", err=True)
            code = 1
        except InvariantFailure as e:
            logger.error(f"Invariant failure: {e}")
            code = 2
        except CurvFlowError as e:
            click.echo(f"Error: {e}", err=True)
            code = 1
        code = code if isinstance(code, int) else 0
        if standalone_mode:
            sys.exit(code)
        return code


_flow_options = [
    click.option('--horizon', type=float, help='Integration horizon T'),
    click.option('--rtol', type=float, help='Relative tolerance'),
    click.option('--atol', 'atol_', type=float, help='Absolute tolerance'),
    click.option('--blowup-threshold', type=float, help='Curvature level classified as blow-up'),
    click.option('--collapse-threshold', type=float, help='Collapse measure classified as collapse'),
    click.option('--curvature-bound', type=float, help='Curvature bound for collapse'),
    click.option('--conv-tol', type=float, help='Gradient norm classified as converged'),
    click.option('--stop-on-converged/--no-stop-on-converged', default=None,
                 help='Stop when the gradient norm falls below the tolerance'),
]


def flow_options(fn):
    for option in reversed(_flow_options):
        fn = option(fn)
    return fn


def _flow_controls(horizon, rtol, atol_, blowup_threshold, collapse_threshold, curvature_bound,
                   conv_tol, stop_on_converged) -> Dict[str, Any]:
    return _controls_from_flags(
        horizon=horizon, rtol=rtol, atol=atol_, blowup_threshold=blowup_threshold,
        collapse_threshold=collapse_threshold, curvature_bound=curvature_bound,
        conv_tol=conv_tol, stop_on_converged=stop_on_converged)


@click.group(cls=CurvFlowGroup)
@click.option('--config', '-c', help='Path to a settings file (YAML or JSON)')
@click.option('--log-file', '-l', help='Log file path')
@click.option('--metrics', help='Write run telemetry to this JSON file')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose output')
@click.pass_context
def cli(ctx, config, log_file, metrics, verbose):
    """curvflow - quadratic curvature functionals, their flows and estimates"""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    setup_logging(log_file)
    config_settings = load_settings(config)
    ctx.obj = {
        'settings': config_settings,
        'telemetry': Telemetry(metrics),
    }


@cli.command()
@click.option('--n', type=int, default=4, show_default=True, help='Dimension')
@click.option('--seed', 'seeds', type=int, multiple=True, help='Seed (repeatable)')
@click.option('--degree', type=int, help='Jet truncation degree')
@click.option('--output', '-o', help='Output directory')
@click.pass_context
def identities(ctx, n, seeds, degree, output):
    """Verify double-form identities and first variations on random jets"""
    cfg = _config("identities", n=n, seeds=list(seeds) or None,
                  degree=degree or settings.jet.default_degree, output=output)
    execute(cfg, ctx.obj['telemetry'])


@cli.command(name="symbol")
@click.option('--n', type=int, default=4, show_default=True, help='Dimension')
@click.option('--a', type=float, help='Coefficient of ΔR·g')
@click.option('--alpha', type=float, help='Flow parameter, used when --a is absent')
@click.option('--atol', type=float, help='Band around the threshold classified as not elliptic')
@click.option('--xi', help='Covector, comma-separated')
@click.option('--output', '-o', help='Output directory')
@click.pass_context
def symbol_command(ctx, n, a, alpha, atol, xi, output):
    """Classify the principal symbol of the flow operator"""
    if a is None and alpha is None:
        raise click.UsageError("symbol needs --a or --alpha")
    cfg = _config("symbol", n=n, a=a, alpha=alpha, atol=atol, xi=_floats(xi), output=output)
    execute(cfg, ctx.obj['telemetry'])


@cli.command()
@click.option('--model', '-m', type=click.Choice(MODELS), required=True, help='Catalog model')
@click.option('--radius', '-r', type=float, help='Radius of a round sphere')
@click.option('--param', '-p', multiple=True, help='Model parameter key=value (repeatable)')
@click.option('--alpha', type=float, default=0.5, show_default=True, help='Weight in F^α and G^α')
@click.option('--output', '-o', help='Output directory')
@click.pass_context
def functionals(ctx, model, radius, param, alpha, output):
    """Evaluate quadratic curvature functionals and pinching predicates"""
    params = _params(param)
    if radius is not None:
        params["r"] = radius
    cfg = _config("functionals", model=model, params=params, alpha=alpha, output=output)
    execute(cfg, ctx.obj['telemetry'])


@cli.command()
@click.option('--family', '-f', type=click.Choice(FAMILIES), required=True, help='Reduced family')
@click.option('--alpha', type=float, default=0.5, show_default=True, help='Flow parameter')
@click.option('--theta0', help='Initial parameters, comma-separated')
@flow_options
@click.option('--output', '-o', help='Output directory for trajectory.csv and flow.json')
@click.pass_context
def flow(ctx, family, alpha, theta0, output, **control_flags):
    """Integrate a reduced gradient flow"""
    cfg = _config("flow", family=family, alpha=alpha, theta0=_floats(theta0),
                  controls=_flow_controls(**control_flags), output=output)
    execute(cfg, ctx.obj['telemetry'])


@cli.command()
@click.option('--family', '-f', type=click.Choice(FAMILIES), default="s3-round", show_default=True)
@click.option('--alpha', type=float, default=-0.1, show_default=True, help='Flow parameter')
@click.option('--theta0', help='Initial parameters, comma-separated')
@click.option('--count', type=int, default=5, show_default=True, help='Number of rescaled models')
@flow_options
@click.option('--output', '-o', help='Output directory')
@click.pass_context
def blowup(ctx, family, alpha, theta0, count, output, **control_flags):
    """Integrate to a curvature blow-up and rescale"""
    if control_flags.get("blowup_threshold") is None:
        control_flags["blowup_threshold"] = 1e3
    if control_flags.get("curvature_bound") is None:
        control_flags["curvature_bound"] = control_flags["blowup_threshold"]
    cfg = _config("blowup", family=family, alpha=alpha, theta0=_floats(theta0), count=count,
                  controls=_flow_controls(**control_flags), output=output)
    execute(cfg, ctx.obj['telemetry'])


@cli.command(name="sweep")
@click.option('--family', '-f', type=click.Choice(FAMILIES), required=True, help='Reduced family')
@click.option('--alphas', required=True, help='Flow parameters, comma-separated')
@click.option('--theta0', 'theta0s', multiple=True, help='Initial parameters, comma-separated (repeatable)')
@click.option('--workers', type=int, default=4, show_default=True, help='Concurrent trajectories')
@flow_options
@click.option('--output', '-o', help='Output directory')
@click.pass_context
def sweep_command(ctx, family, alphas, theta0s, workers, output, **control_flags):
    """Run a grid of flows and merge the outcomes by configuration"""
    cfg = _config("sweep", family=family, alphas=_floats(alphas),
                  theta0s=[_floats(t) for t in theta0s], workers=workers,
                  controls=_flow_controls(**control_flags), output=output)
    execute(cfg, ctx.obj['telemetry'])


@cli.command()
@click.option('--inequality', type=click.Choice(estimates_lab.INEQUALITIES + ("hamilton",)),
              default="interpolation", show_default=True)
@click.option('--grid', 'grids', type=int, multiple=True, help='Grid size (repeatable)')
@click.option('--count', type=int, default=None, help='Corpus size')
@click.option('--seed', type=int, help='First seed')
@click.option('--n', type=click.IntRange(1, 2), default=1, show_default=True, help='Torus dimension')
@click.option('--band-limit', type=int, help='Largest frequency of the random fields')
@click.option('--param', '-p', multiple=True, help='Inequality parameter key=value (repeatable)')
@click.option('--workers', type=int, default=4, show_default=True)
@click.option('--output', '-o', help='Output directory')
@click.pass_context
def estimates(ctx, inequality, grids, count, seed, n, band_limit, param, workers, output):
    """Evaluate an inequality over a seeded corpus of periodic fields"""
    params: Dict[str, Any] = _params(param)
    for key in ("k", "m"):
        if key in params:
            params[key] = int(params[key])
    cfg = _config("estimates", inequality=inequality, grids=list(grids) or None,
                  count=count if count is not None else settings.estimates.corpus_size,
                  seeds=[seed] if seed is not None else None, n=n, band_limit=band_limit,
                  estimate_params=params, workers=workers, output=output)
    execute(cfg, ctx.obj['telemetry'])


@cli.command()
def schema():
    """Print the JSON schema of experiment configuration files"""
    click.echo(dump_json(ExperimentConfig.model_json_schema()), nl=False)


@cli.command(name="run")
@click.argument('config_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--alpha', type=float, help='Override the flow parameter')
@click.option('--output', '-o', help='Override the output directory')
@click.pass_context
def run_command(ctx, config_file, alpha, output):
    """Run an experiment described by a YAML or JSON file; flags override the file"""
    cfg = ExperimentConfig.load_from_file(config_file)
    overrides = {k: v for k, v in (("alpha", alpha), ("output", output)) if v is not None}
    if overrides:
        cfg = cfg.model_copy(update=overrides)
    execute(cfg, ctx.obj['telemetry'])


def main() -> None:
    cli(obj={})


if __name__ == '__main__':
    main()
