"""Command-line entry points: train, finetune, export, synth."""

import sys

import click

from .export import emit_golden, export_pmdl
from .net import build_model, import_records
from .pmdl import read_model
from .synth import make_synthetic_corpus
from .train import TrainConfig, train, write_report


@click.group()
def main():
    """Train the ad classifier and export engine-loadable artifacts."""


def _train_options(fn):
    for option in reversed([
        click.option("--train-manifest", required=True,
                     type=click.Path(exists=True, dir_okay=False)),
        click.option("--test-manifest", required=True,
                     type=click.Path(exists=True, dir_okay=False)),
        click.option("--corpus-root", required=True,
                     type=click.Path(exists=True, file_okay=False)),
        click.option("--epochs", type=int, default=10, show_default=True),
        click.option("--batch-size", type=int, default=16, show_default=True),
        click.option("--learning-rate", type=float, default=1e-3,
                     show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--out", "out_path", required=True,
                     type=click.Path(dir_okay=False),
                     help="where the trained weight file goes"),
        click.option("--report", "report_path", type=click.Path(dir_okay=False)),
        click.option("--checkpoint-dir", type=click.Path(file_okay=False)),
        click.option("--golden", "golden_path", type=click.Path(dir_okay=False),
                     help="also emit a golden fixture for engine parity"),
    ]):
        fn = option(fn)
    return fn


def _run_training(init_weights, **kw):
    golden_path = kw.pop("golden_path")
    report_path = kw.pop("report_path")
    out_path = kw.pop("out_path")
    config = TrainConfig(init_weights=init_weights, **kw)
    result = train(config)
    export_pmdl(result.model, out_path)
    if golden_path:
        emit_golden(result.model, n_inputs=3, path=golden_path)
    if report_path:
        write_report(result, report_path)
    held_out = result.report["held_out"]
    click.echo(
        f"epochs={config.epochs} "
        f"final_train_accuracy={result.train_accuracy[-1]:.3f} "
        f"held_out_accuracy={held_out['accuracy']:.3f} "
        f"exported={out_path}")


@main.command("train")
@_train_options
def train_cmd(**kw):
    """Train from random initialization."""
    _run_training(init_weights=None, **kw)


@main.command("finetune")
@click.option("--weights", "weights_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="weight file to continue from")
@_train_options
def finetune_cmd(weights_path, **kw):
    """Continue training from an existing weight file."""
    _run_training(init_weights=weights_path, **kw)


@main.command("export")
@click.option("--weights", "weights_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="rewrite the weight file (round-trip check)")
@click.option("--golden", "golden_path", type=click.Path(dir_okay=False))
@click.option("--n-inputs", type=int, default=3, show_default=True)
@click.option("--golden-seed", type=int, default=7, show_default=True)
def export_cmd(weights_path, out_path, golden_path, n_inputs, golden_seed):
    """Re-export an existing weight file and/or emit golden fixtures."""
    if not out_path and not golden_path:
        raise click.UsageError("nothing to do: pass --out and/or --golden")
    model = import_records(build_model(), read_model(weights_path))
    if out_path:
        export_pmdl(model, out_path)
        click.echo(f"exported={out_path}")
    if golden_path:
        emit_golden(model, n_inputs=n_inputs, path=golden_path,
                    seed=golden_seed)
        click.echo(f"golden={golden_path} inputs={n_inputs}")


@main.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--n", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--side", type=int, default=128, show_default=True)
@click.option("--test-fraction", type=float, default=0.25, show_default=True)
@click.option("--style", type=click.Choice(["light", "dark"]), default="light",
              show_default=True, help="banner palette; train on one, "
              "finetune against the other")
def synth_cmd(out_dir, n, seed, side, test_fraction, style):
    """Generate a labeled synthetic corpus (banner ads vs plain noise)."""
    train_path, test_path = make_synthetic_corpus(
        out_dir, n=n, seed=seed, side=side, test_fraction=test_fraction,
        style=style)
    click.echo(f"train_manifest={train_path} test_manifest={test_path}")


if __name__ == "__main__":
    sys.exit(main())
