import argparse
import json
import logging
import math
import sys
from dataclasses import replace

from rich import print as rprint
from rich.console import Console
from rich.markup import escape
from rich.table import Table

from energy_sched.analysis.optimizer import (
    ObjectiveWeights,
    best_by_workflow,
    modal_reduction,
    read_sweep,
    simulate_grid,
    sweep,
    sweet_spot,
    tradeoff_report,
    write_sweep,
    write_sweet_spots,
    write_tradeoff,
)
from energy_sched.analysis.report import render_report, thermal_comparison, write_report, write_thermal_summary
from energy_sched.analysis.uq import bootstrap_diff_means, paired_samples
from energy_sched.config import load_config
from energy_sched.errors import CalibrationError, EmptyDatasetError, EnergySchedError, MissingArtifactError
from energy_sched.scheduler.calibration import CalibrationResult, calibrate
from energy_sched.scheduler.tables import load_table, load_table4, write_traces
from energy_sched.scheduler.workflows import WORKFLOW_IDS
from energy_sched.synth.artifact import load_model, save_model
from energy_sched.synth.pivae import generate, train, write_loss_history
from energy_sched.synth.preprocessing import assemble, read_records, write_records
from energy_sched.synth.validation import validate_batch
from energy_sched.utils import REDUCTION_LEVELS, SCHEDULERS, SchedulerKind, check_reduction, derive_seed, setup_logging

logger = logging.getLogger(__name__)

CALIBRATION_FILE = "calibration.json"
RESIDUALS_FILE = "residuals.csv"
TRACES_FILE = "traces.csv"
SWEEP_FILE = "sweep.csv"
LOSS_HISTORY_FILE = "loss_history.csv"
SYNTHETIC_FILE = "synthetic.csv"
VALIDATION_FILE = "validation.json"
BOOTSTRAP_FILE = "bootstrap.json"
SWEET_SPOT_FILE = "sweet_spot.json"
TRADEOFF_FILE = "tradeoff.csv"
TRADEOFF_BY_SCHEDULER_FILE = "tradeoff_by_scheduler.csv"
THERMAL_SUMMARY_FILE = "thermal_summary.csv"
THERMAL_DIR = "thermal"
REPORT_FILE = "report.md"

console = Console()


def _out_dir(cfg):
    cfg.paths.out_dir.mkdir(parents=True, exist_ok=True)
    return cfg.paths.out_dir


def _load_calibration(cfg):
    return CalibrationResult.load(cfg.paths.artifact(CALIBRATION_FILE))


def _read_json(path, hint):
    if not path.exists():
        raise MissingArtifactError(path, hint)
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# ─── Commands ─────────────────────────────────────────────────────────────────


def cmd_calibrate(cfg, options):
    base = load_table(cfg.paths.table3)
    reduced = load_table4(cfg.paths.table4, cfg.calibration.energy_scale)
    out = _out_dir(cfg)
    settings = cfg.calibration
    try:
        result = calibrate(
            base,
            reduced,
            seed=cfg.seed,
            hardware=cfg.hardware,
            base_tolerance=settings.base_tolerance,
            reduced_tolerance=settings.reduced_tolerance,
            energy_scale=settings.energy_scale,
            jitter_sigma=settings.jitter_sigma,
            level_targets=settings.level_targets or None,
            progress=True,
        )
    except CalibrationError as e:
        if e.result is not None:
            e.result.write_residuals(out / RESIDUALS_FILE)
        raise
    result.write_residuals(out / RESIDUALS_FILE)
    result.save(out / CALIBRATION_FILE)

    worst = result.worst()
    rprint(
        f"[green]calibrated[/green] {len(result.params)} pairs; "
        f"worst residual {worst.scheduler}/{worst.workflow} {worst.metric} {worst.rel_error:.3%}"
    )
    return result


def cmd_simulate(cfg, options):
    calibration = _load_calibration(cfg)
    schedulers = [SchedulerKind.parse(options.scheduler)] if getattr(options, "scheduler", None) else SCHEDULERS
    workflows = [options.workflow] if getattr(options, "workflow", None) else WORKFLOW_IDS
    reductions = REDUCTION_LEVELS
    if getattr(options, "reduction", None) is not None:
        reductions = (check_reduction(options.reduction / 100.0),)
    traces = simulate_grid(calibration, workflows, schedulers, reductions, progress=True)
    write_traces(_out_dir(cfg) / TRACES_FILE, traces, with_reduction=True)
    rprint(f"[green]simulated[/green] {len(traces)} runs -> {cfg.paths.artifact(TRACES_FILE)}")
    return traces


def cmd_sweep(cfg, options):
    source = getattr(options, "source", None) or "simulated"
    calibration = _load_calibration(cfg)
    if source == "synthetic":
        records = read_records(cfg.paths.artifact(SYNTHETIC_FILE), accepted_only=True)
        cells = sweep(source="synthetic", records=records, baseline=list(calibration.base_traces.values()))
    else:
        cells = sweep(calibration, progress=True)
    write_sweep(_out_dir(cfg) / SWEEP_FILE, cells)
    rprint(f"[green]swept[/green] {len(cells)} cells ({source}) -> {cfg.paths.artifact(SWEEP_FILE)}")
    return cells


def cmd_train(cfg, options):
    calibration = _load_calibration(cfg)
    hyper = cfg.hyper
    if getattr(options, "epochs", None) is not None:
        hyper = replace(hyper, epochs=options.epochs)
    traces = simulate_grid(calibration)
    dataset = assemble(traces, seed=hyper.seed)
    params, history = train(dataset, hyper, energy_scale=calibration.energy_scale, progress=True)
    out = _out_dir(cfg)
    save_model(cfg.paths.model, params, hyper, dataset.schema, calibration.energy_scale)
    write_loss_history(out / LOSS_HISTORY_FILE, history)
    if history:
        rprint(
            f"[green]trained[/green] {hyper.epochs} epochs on {len(dataset.train_idx)} rows: "
            f"loss {history[0]['total']:.4f} -> {history[-1]['total']:.4f}"
        )
    return params, history


def cmd_generate(cfg, options):
    artifact = load_model(cfg.paths.model)
    settings = cfg.generate
    n = getattr(options, "samples", None) or settings.n_samples
    records = generate(
        artifact.params,
        artifact.schema,
        n,
        cfg.limits,
        cfg.node,
        seed=derive_seed(cfg.seed, "generate"),
        chunk_size=settings.chunk_size,
        workers=settings.workers,
        budget_factor=settings.budget_factor,
        progress=True,
    )
    write_records(_out_dir(cfg) / SYNTHETIC_FILE, records)
    accepted = sum(r.accepted for r in records)
    rprint(f"[green]generated[/green] {accepted} accepted of {len(records)} draws -> {cfg.paths.artifact(SYNTHETIC_FILE)}")
    return records


def cmd_validate(cfg, options):
    records = read_records(cfg.paths.artifact(SYNTHETIC_FILE), accepted_only=True)
    if not records:
        raise EmptyDatasetError(f"{cfg.paths.artifact(SYNTHETIC_FILE)} has no accepted records")
    reference = simulate_grid(_load_calibration(cfg))
    report = validate_batch(
        records,
        reference,
        limits=cfg.limits,
        node=cfg.node,
        hull_tolerance=cfg.validation.hull_tolerance,
        z_threshold=cfg.validation.z_threshold,
    )
    report.save(_out_dir(cfg) / VALIDATION_FILE)
    summary = report.summary()
    rprint(f"[green]validated[/green] {summary['acceptable']}/{summary['records']} acceptable")
    return report


def cmd_bootstrap(cfg, options):
    source = getattr(options, "source", None) or cfg.bootstrap_source
    metric = cfg.bootstrap_metric
    boot_cfg = cfg.bootstrap
    if getattr(options, "b_samples", None):
        boot_cfg = replace(boot_cfg, b_samples=options.b_samples)

    base = load_table(cfg.paths.table3)
    if source == "synthetic":
        records = read_records(cfg.paths.artifact(SYNTHETIC_FILE), accepted_only=True)
        real = [getattr(t, metric) for t in base if not math.isnan(getattr(t, metric))]
        synth = [getattr(r, metric) for r in records]
        boot_cfg = replace(boot_cfg, paired=False)
    else:
        reduced = load_table4(cfg.paths.table4, cfg.calibration.energy_scale)
        real, synth = paired_samples(base, reduced, metric)
        boot_cfg = replace(boot_cfg, paired=True)

    result = bootstrap_diff_means(real, synth, boot_cfg, progress=True)
    result.save(_out_dir(cfg) / BOOTSTRAP_FILE, metric, source)
    rprint(
        f"[green]bootstrap[/green] {metric}: diff {result.observed_diff:.3f}, "
        f"CI [{result.ci_low:.3f}, {result.ci_high:.3f}], p={result.p_value:.4g}"
    )
    return result


def _weights(cfg, options):
    weights = cfg.weights
    alpha = getattr(options, "alpha", None)
    beta = getattr(options, "beta", None)
    if alpha is not None or beta is not None:
        weights = ObjectiveWeights(
            alpha_energy=weights.alpha_energy if alpha is None else alpha,
            beta_time=weights.beta_time if beta is None else beta,
        )
    cap = getattr(options, "max_tat_increase", None)
    return weights, cfg.max_tat_increase_pct if cap is None else cap


def cmd_optimize(cfg, options):
    grid = read_sweep(cfg.paths.artifact(SWEEP_FILE))
    weights, cap = _weights(cfg, options)
    results = sweet_spot(grid, weights, max_tat_increase_pct=cap)
    by_workflow = best_by_workflow(grid, weights)
    out = _out_dir(cfg)
    write_sweet_spots(out / SWEET_SPOT_FILE, results, weights, by_workflow, cap)
    tradeoff = tradeoff_report(grid)
    write_tradeoff(out / TRADEOFF_FILE, tradeoff)
    write_tradeoff(out / TRADEOFF_BY_SCHEDULER_FILE, tradeoff_report(grid, by_scheduler=True))

    table = Table(title="Trade-off by reduction level")
    for column in ("reduction %", "TAT increase %", "energy saving %"):
        table.add_column(column, justify="right")
    for row in tradeoff.itertuples(index=False):
        table.add_row(f"{row.reduction_pct:g}", f"{row.tat_increase_pct:.2f}", f"{row.energy_saving_pct:.2f}")
    console.print(table)
    modal = modal_reduction(results)
    if modal is not None:
        rprint(f"[green]sweet spot[/green]: {modal * 100:g}% is best for "
               f"{sum(r.best_reduction == modal for r in results)}/{len(results)} pairs")
    return results


def cmd_report(cfg, options):
    calibration_data = _read_json(cfg.paths.artifact(CALIBRATION_FILE), "run `calibrate` first")
    grid = read_sweep(cfg.paths.artifact(SWEEP_FILE))
    weights, cap = _weights(cfg, options)
    results = sweet_spot(grid, weights, max_tat_increase_pct=cap)
    out = _out_dir(cfg)

    thermal = thermal_comparison(
        results,
        grid,
        cfg.node,
        calibration_data.get("energy_scale", cfg.calibration.energy_scale),
        out_dir=out / THERMAL_DIR,
        horizon_s=cfg.report.horizon_s,
        step_s=cfg.report.sample_step_s,
    )
    write_thermal_summary(out / THERMAL_SUMMARY_FILE, thermal)

    bootstrap_path = out / BOOTSTRAP_FILE
    validation_path = out / VALIDATION_FILE
    bootstrap = _read_json(bootstrap_path, "") if bootstrap_path.exists() else None
    validation = _read_json(validation_path, "")["summary"] if validation_path.exists() else None
    calibration_summary = {
        "seed": calibration_data.get("seed"),
        "soft_targets": calibration_data.get("soft_targets", []),
        **calibration_data.get("residual_summary", {}),
    }
    text = render_report(
        calibration=calibration_summary,
        tradeoff=tradeoff_report(grid),
        sweet_spots=results,
        by_workflow=best_by_workflow(grid, weights),
        bootstrap=bootstrap,
        thermal=thermal,
        validation=validation,
        weights=weights,
    )
    write_report(out / REPORT_FILE, text)
    mean_drop = sum(r.temp_drop_pct for r in thermal) / len(thermal) if thermal else 0.0
    rprint(f"[green]report[/green] -> {out / REPORT_FILE} (mean temperature drop {mean_drop:.2f}%)")
    return thermal


def cmd_pipeline(cfg, options):
    for name, command in PIPELINE:
        logger.info("pipeline step: %s", name)
        command(cfg, options)


PIPELINE = (
    ("calibrate", cmd_calibrate),
    ("simulate", cmd_simulate),
    ("sweep", cmd_sweep),
    ("train", cmd_train),
    ("generate", cmd_generate),
    ("validate", cmd_validate),
    ("bootstrap", cmd_bootstrap),
    ("optimize", cmd_optimize),
    ("report", cmd_report),
)

COMMAND_DICT = dict(PIPELINE, pipeline=cmd_pipeline)


# ─── Argument Parsing ─────────────────────────────────────────────────────────


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        dest="config",
        type=str,
        help="JSON run configuration; flags override it",
    )
    common.add_argument(
        "--seed",
        dest="seed",
        type=int,
        help="global seed every random substream derives from",
    )
    common.add_argument(
        "--out-dir",
        dest="out_dir",
        type=str,
        help="directory for every artifact of the run",
    )
    common.add_argument(
        "--verbose",
        dest="verbose",
        action="store_true",
        help="debug logging",
    )

    parser = argparse.ArgumentParser(
        prog="energy-sched",
        description="Calibrate, simulate and optimize CPU frequency reduction for workflow schedulers",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    calibrate_p = sub.add_parser("calibrate", parents=[common], help="fit policies to the reference tables")
    calibrate_p.add_argument("--table3", dest="table3", type=str, help="base-frequency table CSV")
    calibrate_p.add_argument("--table4", dest="table4", type=str, help="reduced-frequency table CSV")

    simulate_p = sub.add_parser("simulate", parents=[common], help="write per-run traces")
    simulate_p.add_argument(
        "--scheduler",
        dest="scheduler",
        type=str,
        choices=[k.label for k in SCHEDULERS] + [k.value for k in SCHEDULERS if k.value != k.label],
        metavar="SCHEDULER",
        help="only this scheduler, available: {%(choices)s}",
    )
    simulate_p.add_argument(
        "--workflow",
        dest="workflow",
        type=str,
        choices=list(WORKFLOW_IDS),
        metavar="WORKFLOW",
        help="only this workflow, available: {%(choices)s}",
    )
    simulate_p.add_argument(
        "--reduction",
        dest="reduction",
        type=float,
        help="only this frequency reduction, in percent (0, 5, 10, 15 or 20)",
    )

    sweep_p = sub.add_parser("sweep", parents=[common], help="evaluate the full reduction grid")
    sweep_p.add_argument(
        "--source",
        dest="source",
        choices=["simulated", "synthetic"],
        default="simulated",
        help="simulator or accepted synthetic records",
    )

    train_p = sub.add_parser("train", parents=[common], help="train the autoencoder on the simulated sweep")
    train_p.add_argument("--epochs", dest="epochs", type=int, help="override the configured epoch count")

    generate_p = sub.add_parser("generate", parents=[common], help="draw gated synthetic records")
    generate_p.add_argument("-n", "--samples", dest="samples", type=int, help="accepted records to produce")

    sub.add_parser("validate", parents=[common], help="check accepted synthetic records")

    bootstrap_p = sub.add_parser("bootstrap", parents=[common], help="bootstrap the difference in means")
    bootstrap_p.add_argument(
        "--source",
        dest="source",
        choices=["table4", "synthetic"],
        help="compare against the reduced-frequency table or the synthetic records",
    )
    bootstrap_p.add_argument("--b-samples", dest="b_samples", type=int, help="number of resamples")

    for name, help_text in (
        ("optimize", "pick the sweet spot per scheduler and workflow"),
        ("report", "thermal comparison and markdown report"),
        ("pipeline", "run every step in order"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--alpha", dest="alpha", type=float, help="energy weight")
        p.add_argument("--beta", dest="beta", type=float, help="turnaround-time weight")
        p.add_argument(
            "--max-tat-increase",
            dest="max_tat_increase",
            type=float,
            help="exclude levels whose TAT increase exceeds this percentage",
        )
        if name == "pipeline":
            p.add_argument("--epochs", dest="epochs", type=int, help="override the configured epoch count")
            p.add_argument("-n", "--samples", dest="samples", type=int, help="accepted records to produce")
            p.add_argument("--b-samples", dest="b_samples", type=int, help="number of resamples")
    return parser


def _overrides(options):
    paths = {}
    if options.out_dir:
        paths["out_dir"] = options.out_dir
    for name in ("table3", "table4"):
        if getattr(options, name, None):
            paths[name] = getattr(options, name)
    overrides = {}
    if options.seed is not None:
        overrides["seed"] = options.seed
    if paths:
        overrides["paths"] = paths
    return overrides


def main(argv=None):
    parser = build_parser()
    options = parser.parse_args(argv)
    setup_logging(options.verbose)

    try:
        cfg = load_config(options.config, _overrides(options))
        COMMAND_DICT[options.command](cfg, options)
    except EnergySchedError as e:
        logger.debug("command %s failed", options.command, exc_info=True)
        rprint(f"[red]error:[/red] {escape(str(e))}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
