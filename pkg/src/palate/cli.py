"""Command line entry points: serve, simulate, ingest, bench."""

from __future__ import annotations

import csv
import json
import os
import statistics
import time

import click
import numpy as np

from .catalog import (
    DietType,
    KernelConfig,
    build_neighbor_index,
    estimate_kernel,
    load_catalog,
    load_embeddings,
)
from .elicitation import PHASE1_ITERATIONS, StrategyConfig
from .simulation import (
    ExperimentConfig,
    make_user,
    run_experiment,
    run_session,
)
from .synth import make_assets


@click.group()
def main():
    """Adaptive meal preference elicitation and recommendation."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def serve(config_path):
    """Run the HTTP service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.load(config_path)
    app = create_app(config)
    uvicorn.run(app, host=config.bind_host, port=config.bind_port)


def _load_simulation_assets(doc: dict):
    source = doc.get("source", {})
    kernel_cfg = KernelConfig(**doc.get("kernel", {}))
    if "synthetic" in source:
        synth = source["synthetic"]
        catalog, embeddings = make_assets(
            n=synth["n"],
            dim=synth.get("dim", 16),
            clusters=synth.get("clusters", 8),
            spread=synth.get("spread", 0.25),
            seed=synth.get("seed", 0),
            cap_radius=synth.get("cap_radius"),
        )
    else:
        catalog = load_catalog(source["catalog"], source.get("diet", "no_restrictions"))
        embeddings = load_embeddings(source["embeddings"], catalog)
    kernel = estimate_kernel(embeddings, kernel_cfg)
    index = build_neighbor_index(embeddings, kernel)
    return catalog, embeddings, index


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--csv-dir", type=click.Path(), default=None,
              help="Also emit per-user accuracy and entropy CSVs.")
def simulate(config_path, out_path, csv_dir):
    """Run the simulated-user experiment matrix and write a JSON report."""
    with open(config_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    exp = doc.get("experiment", {})
    config = ExperimentConfig(
        strategies=tuple(exp.get("strategies", ("LE+EE", "LE+RS", "OP+EE", "OP+RS"))),
        T_values=tuple(exp.get("T_values", (5, 10, 15))),
        users_per_cell=exp.get("users_per_cell", 50),
        test_pairs=exp.get("test_pairs", 10),
        fraction=exp.get("fraction", 0.01),
        temperature=exp.get("temperature", 0.1),
        beta=exp.get("beta"),
        seed=exp.get("seed", 0),
    )
    _, embeddings, index = _load_simulation_assets(doc)
    report = run_experiment(config, embeddings, index)
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    click.echo(f"report written to {out_path}")

    for (strategy, T), cell in report.cells.items():
        click.echo(
            f"  {strategy} T={T}: accuracy {cell.mean_accuracy:.3f} "
            f"± {cell.sem_accuracy:.3f} (n={len(cell.accuracies)})"
        )

    if csv_dir:
        os.makedirs(csv_dir, exist_ok=True)
        acc_path = os.path.join(csv_dir, "accuracies.csv")
        with open(acc_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strategy", "T", "user", "accuracy"])
            for (strategy, T), cell in report.cells.items():
                for u, acc in enumerate(cell.accuracies):
                    writer.writerow([strategy, T, u, acc])
        ent_path = os.path.join(csv_dir, "entropy.csv")
        with open(ent_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strategy", "T", "user", "iteration", "entropy"])
            for (strategy, T), cell in report.cells.items():
                for u, traj in enumerate(cell.entropy_trajectories):
                    for it, h in enumerate(traj):
                        writer.writerow([strategy, T, u, it, h])
        click.echo(f"CSV files written to {csv_dir}")


@main.command()
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--diet", default="no_restrictions")
@click.option("--check", is_flag=True, help="Validate kernel and index construction too.")
def ingest(catalog_path, embeddings_path, diet, check):
    """Load and validate catalog and embedding files."""
    catalog = load_catalog(catalog_path, DietType.parse(diet))
    click.echo(f"catalog: {len(catalog)} items for diet {catalog.diet.value} "
               f"({catalog.rejected} rejected at load)")
    embeddings = load_embeddings(embeddings_path, catalog)
    click.echo(f"embeddings: {len(embeddings)} rows, dim {embeddings.dim}")
    if check:
        kernel = estimate_kernel(embeddings)
        index = build_neighbor_index(embeddings, kernel)
        degrees = [len(ids) - 1 for ids in index.neighbor_ids]
        click.echo(
            f"kernel: alpha^2={kernel.alpha_sq:.6f} delta={kernel.delta:.6f}; "
            f"mean degree {statistics.mean(degrees):.1f}"
        )


@main.command()
@click.option("--catalog", "catalog_path", type=click.Path(exists=True), default=None)
@click.option("--embeddings", "embeddings_path", type=click.Path(exists=True), default=None)
@click.option("--synthetic", "synthetic_n", type=int, default=None,
              help="Benchmark against a synthetic catalog of this size.")
@click.option("--iterations", "T", type=int, default=15)
@click.option("--budget-ms", type=float, default=25.0)
def bench(catalog_path, embeddings_path, synthetic_n, T, budget_ms):
    """Measure per-iteration engine latency against the millisecond budget."""
    if synthetic_n:
        _, embeddings = make_assets(synthetic_n, seed=0)
    else:
        if not (catalog_path and embeddings_path):
            raise click.UsageError("provide --catalog/--embeddings or --synthetic N")
        catalog = load_catalog(catalog_path, DietType.NO_RESTRICTIONS)
        embeddings = load_embeddings(embeddings_path, catalog)

    t0 = time.perf_counter()
    kernel = estimate_kernel(embeddings)
    index = build_neighbor_index(embeddings, kernel)
    click.echo(f"index built in {time.perf_counter() - t0:.2f}s "
               f"({len(embeddings)} items)")

    rng = np.random.default_rng(0)
    user = make_user(embeddings, rng)
    result = run_session(user, StrategyConfig(), T, embeddings, index, session_seed=0)
    phase1 = result.timings_ms[:PHASE1_ITERATIONS]
    rest = result.timings_ms[PHASE1_ITERATIONS:]
    click.echo(f"phase I iterations: median {statistics.median(phase1):.1f} ms")
    median_rest = statistics.median(rest)
    verdict = "OK" if median_rest < budget_ms else "OVER BUDGET"
    click.echo(f"pairwise iterations: median {median_rest:.2f} ms "
               f"(budget {budget_ms} ms) [{verdict}]")


if __name__ == "__main__":
    main()
