"""Command-line entry point: ``asyncplnc run | trace | counters | presets``."""
from __future__ import annotations

import csv
import logging
import sys
from importlib import resources
from pathlib import Path

import click

from . import harness, ldpc
from .errors import ConfigurationError

log = logging.getLogger("asyncplnc")

TRACE_FIELDS = ["block", "iteration", "terminal", "eps_hat", "eps_true", "channel_mse", "loglik",
                "symbol_changes"]


def experiment_presets() -> dict[str, Path]:
    root = resources.files("asyncplnc") / "data" / "experiments"
    return {Path(p.name).stem: Path(str(p)) for p in root.iterdir() if p.name.endswith(".yaml")}


def _load(config, preset, **overrides) -> harness.SimConfig:
    if config and preset:
        raise click.UsageError("give either --config or --preset, not both")
    try:
        if preset:
            presets = experiment_presets()
            if preset not in presets:
                raise click.UsageError(f"unknown preset {preset!r}; see `asyncplnc presets`")
            return harness.load_config(presets[preset], **overrides)
        if config:
            return harness.load_config(config, **overrides)
        return harness.SimConfig(**{k: v for k, v in overrides.items() if v is not None})
    except (ConfigurationError, TypeError) as exc:
        raise click.BadParameter(str(exc)) from exc


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.txt")


config_opt = click.option("--config", type=click.Path(exists=True, dir_okay=False), help="flat YAML config")
preset_opt = click.option("--preset", help="bundled experiment preset (see `presets`)")
seed_opt = click.option("--seed", type=int, default=None, help="master seed (overrides the config)")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
def main(verbose):
    """Asynchronous two-way OFDM relay simulator."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)


@main.command()
@config_opt
@preset_opt
@seed_opt
@click.option("--workers", type=int, default=1, show_default=True, help="frame-level worker processes")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=Path("results.csv"),
              show_default=True, help="CSV path; the manifest goes next to it")
def run(config, preset, seed, workers, out):
    """Run a BER sweep and write CSV plus a run manifest."""
    cfg = _load(config, preset, seed=seed)
    if workers < 1:
        raise click.BadParameter("--workers must be >= 1")

    def progress(rows):
        for r in rows:
            log.info("%s snr=%s xi=%s eps2=%s M=%s frames=%d errors=%d ber=%.3e", r.receiver,
                     r.point["snr_db"], r.point["xi"], r.point["eps2"], r.point["M"], r.frames,
                     r.bit_errors, r.ber)

    results = harness.run_sweep(cfg, workers=workers, progress=progress)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        harness.to_csv(results, fh)
    _manifest_path(out).write_text(harness.manifest(cfg, workers))
    click.echo(f"wrote {out} ({len(results)} rows) and {_manifest_path(out)}")


@main.command()
@config_opt
@preset_opt
@seed_opt
@click.option("--frame", type=int, default=0, show_default=True, help="frame index to trace")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=Path("trace.csv"),
              show_default=True)
def trace(config, preset, seed, frame, out):
    """Dump the per-iteration SAGE trace of one frame (first sweep point)."""
    cfg = _load(config, preset, seed=seed)
    point = cfg.points()[0]
    res = harness.run_frame(cfg, point, frame, receiver_names=["proposed"], keep_traces=True)
    sched = cfg.schedule(point)
    rows = []
    for b, tr in enumerate(res.traces):
        eps_true = sched.at(b + 1)
        for rec in tr.records():
            for i in range(2):
                rows.append({
                    "block": b, "iteration": rec["iteration"], "terminal": i + 1,
                    "eps_hat": rec[f"eps{i + 1}"], "eps_true": eps_true[i],
                    "channel_mse": rec[f"mse{i + 1}"], "loglik": rec["loglik"],
                    "symbol_changes": rec["symbol_changes"],
                })
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRACE_FIELDS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    _manifest_path(out).write_text(harness.manifest(cfg, 1) + f"frame {frame}\n")
    click.echo(f"wrote {out}: {len(res.traces)} blocks, {res.bit_errors['proposed']} XOR bit errors")


@main.command()
@click.option("--sizes", default="64,128,256", show_default=True, help="comma-separated block sizes")
@click.option("--iterations", type=int, default=2, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="write the report here instead of stdout")
def counters(sizes, iterations, out):
    """Measured SAGE operation counts against the closed-form estimates."""
    try:
        ns = tuple(int(s) for s in sizes.split(","))
        rows = harness.op_counters(ns, iterations=iterations)
    except (ValueError, ConfigurationError) as exc:
        raise click.BadParameter(str(exc)) from exc
    report = harness.complexity_report(rows)
    if out is None:
        click.echo(report, nl=False)
    else:
        out.write_text(report)
        click.echo(f"wrote {out}")


@main.command()
def presets():
    """List the bundled LDPC codes and experiment configs."""
    click.echo("codes:")
    for name in sorted(ldpc.PRESETS):
        code = ldpc.preset(name)
        click.echo(f"  {name:12s} n={code.n} k={code.k} rate={code.rate:.3f}")
    click.echo("experiments:")
    for name, path in sorted(experiment_presets().items()):
        first = path.read_text().splitlines()[0].lstrip("# ").strip()
        click.echo(f"  {name:18s} {first}")


if __name__ == "__main__":  # pragma: no cover
    main()
