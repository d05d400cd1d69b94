# External imports
import sys
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import typer
from loguru import logger

# Internal imports
from src import __version__
from src.analytics.published import (
    METADATA_FILE,
    RUNOFF_SUMMARY_FILE,
    TREATMENTS_FILE,
    reference_path,
)
from src.analytics.report import (
    analysis_report,
    render_text,
    report_tables,
    simulation_report,
)
from src.analytics.waterq import measured_event
from src.models import (
    ConfigError,
    Provenance,
    ReportBundle,
    RunoffEvent,
    SamplingPlan,
    SchemaError,
    SpotSprayError,
    TreatmentStats,
)
from src.models.config import RunConfig, load_run_config
from src.pipeline.extractors import (
    RunoffManifestExtractor,
    RunoffSampleExtractor,
    RunoffSummaryExtractor,
    TreatmentExtractor,
    TrialMetadataExtractor,
)
from src.pipeline.transformers import (
    detections_frame,
    emit_spray_map,
    field_frame,
    spray_events_frame,
    treatment_frame,
)
from src.simulation.experiments import degradation_sweep, density_sweep
from src.simulation.runner import FieldRun, run_field
from src.utils import (
    save_chart,
    spray_map_chart,
    usage_density_chart,
    write_csv,
    write_geojson,
    write_json,
    write_text,
)

EXIT_CONFIG_ERROR = 2
EXIT_IO_ERROR = 3
EXIT_SCHEMA_ERROR = 4

app = typer.Typer(
    help="Spot-spraying control loop simulator and field-trial analytics.",
    add_completion=False,
)


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


@app.callback()
def configure(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level."),
) -> None:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO")


def run_task(task: Callable[[], None]) -> None:
    """Run a command body, mapping library errors to exit codes."""
    try:
        task()
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        raise typer.Exit(code=EXIT_CONFIG_ERROR)
    except SchemaError as e:
        logger.error(f"Input schema error: {e}")
        raise typer.Exit(code=EXIT_SCHEMA_ERROR)
    except OSError as e:
        logger.error(f"I/O error: {e}")
        raise typer.Exit(code=EXIT_IO_ERROR)
    except SpotSprayError as e:
        logger.error(f"{type(e).__name__}: {e}")
        raise typer.Exit(code=1)


# Task 1: Load the run configuration
def load_config(config_path: Path, seed: Optional[int]) -> RunConfig:
    """
    Read the YAML run configuration, applying a command-line seed override.

    Args:
        config_path: Path to the YAML file
        seed: Replaces the configured seed when given

    Returns:
        The validated RunConfig
    """
    return load_run_config(config_path, seed_override=seed)


# Task 2: Simulate the trial
def simulate_trial(config: RunConfig) -> FieldRun:
    logger.info(
        f"Simulating {config.trial.n_strips} strips at {config.vehicle.speed_kmh} km/h "
        f"(seed {config.seed})"
    )
    return run_field(config)


# Task 3: Save the pass logs
def save_pass_logs(run: FieldRun, out_dir: Path) -> List[Path]:
    """
    Write the ground-truth field, per-strip results and, for every strip, its
    detection log and spray events.

    Args:
        run: Simulated trial
        out_dir: Output directory

    Returns:
        Paths of the written files
    """
    paths = [
        write_csv(field_frame(run.weeds), out_dir / "field.csv"),
        write_csv(treatment_frame(run.strip_stats), out_dir / "strips.csv"),
    ]
    for log in run.logs:
        stem = f"strip_{log.strip.index}_{log.treatment.value}"
        paths.append(
            write_csv(detections_frame(log.detections), out_dir / f"{stem}_detections.csv")
        )
        paths.append(
            write_csv(spray_events_frame(log.spray_events), out_dir / f"{stem}_spray_events.csv")
        )
    logger.info(f"Saved logs of {len(run.logs)} passes to {out_dir}")
    return paths


# Task 4: Save the report
def save_report(bundle: ReportBundle, out_dir: Path, output_format: OutputFormat) -> List[Path]:
    """
    Write the plain-text report plus its tables as CSV files or one JSON document.

    Args:
        bundle: Report to write
        out_dir: Output directory
        output_format: csv or json

    Returns:
        Paths of the written files
    """
    paths = [write_text(render_text(bundle), out_dir / "report.txt")]
    if output_format is OutputFormat.JSON:
        paths.append(write_json(bundle.model_dump(mode="json"), out_dir / "report.json"))
    else:
        for name, frame in report_tables(bundle).items():
            paths.append(write_csv(frame, out_dir / f"report_{name}.csv"))
    logger.info(f"Saved report ({len(paths)} files) to {out_dir}")
    return paths


# Task 5: Save the spray map
def save_spray_map(run: FieldRun, config: RunConfig, out_dir: Path) -> Path:
    collection = emit_spray_map(run.logs, config.geo, config.effective_grid())
    return write_geojson(collection, out_dir / "spray_map.geojson")


# Task 6: Ingest logged trial results
def ingest_treatments(
    treatment_paths: List[Path], metadata_path: Optional[Path]
) -> Tuple[List[TreatmentStats], Dict[str, Dict[str, str]]]:
    """
    Read treatment result CSVs and the optional trial metadata.

    Args:
        treatment_paths: Treatment CSV files
        metadata_path: Trial metadata CSV

    Returns:
        Treatment rows of every file, and metadata by trial id
    """
    treatments: List[TreatmentStats] = []
    for path in treatment_paths:
        treatments += TreatmentExtractor(path).extract()
    metadata = TrialMetadataExtractor(metadata_path).extract() if metadata_path else {}
    return treatments, metadata


# Task 7: Ingest runoff results
def ingest_runoff(
    summary_paths: List[Path], manifest_paths: List[Path], plan: SamplingPlan
) -> List[RunoffEvent]:
    """
    Read runoff results, either already summarised or as gauged sample series.

    Gauged events are reduced to a composite concentration and a load with
    the given sampling plan.
    """
    events: List[RunoffEvent] = []
    for path in summary_paths:
        events += RunoffSummaryExtractor(path).extract()
    for path in manifest_paths:
        for entry in RunoffManifestExtractor(path).extract():
            samples = RunoffSampleExtractor(entry.samples_file).extract()
            events.append(
                measured_event(
                    samples,
                    plan,
                    entry.area,
                    entry.active_ingredient,
                    entry.treatment,
                    entry.trial_id,
                )
            )
    return events


@app.command()
def simulate(
    config_path: Path = typer.Option(..., "--config", "-c", help="YAML run configuration."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the configured seed."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    output_format: OutputFormat = typer.Option(OutputFormat.CSV, "--format"),
    charts: bool = typer.Option(False, "--charts", help="Also write plotly HTML charts."),
) -> None:
    """Simulate a strip trial and write pass logs, the report and the spray map."""

    def task() -> None:
        config = load_config(config_path, seed)
        out_dir = out or config.output_dir
        run = simulate_trial(config)
        provenance = Provenance(
            version=__version__,
            config_hash=config.provenance_hash(),
            seed=config.seed,
            inputs=[str(config_path)],
        )
        bundle = simulation_report(run.strip_stats, config, provenance)
        save_pass_logs(run, out_dir)
        save_report(bundle, out_dir, output_format)
        if config.geo is not None:
            save_spray_map(run, config, out_dir)
        if charts:
            strips = treatment_frame(run.strip_stats)
            strips["weed_density"] = [s.weed_density for s in run.strip_stats]
            save_chart(usage_density_chart(strips), out_dir / "charts" / "usage_vs_density.html")
            save_chart(
                spray_map_chart(run.logs, config.effective_grid().tile_width),
                out_dir / "charts" / "spray_map.html",
            )
        logger.success(f"Simulation written to {out_dir}")

    run_task(task)


@app.command()
def analyze(
    treatments: Optional[List[Path]] = typer.Option(
        None, "--treatments", "-t", help="Treatment results CSV (repeatable)."
    ),
    metadata: Optional[Path] = typer.Option(None, "--metadata", help="Trial metadata CSV."),
    runoff: Optional[List[Path]] = typer.Option(
        None, "--runoff", help="Runoff summary CSV (repeatable)."
    ),
    runoff_manifest: Optional[List[Path]] = typer.Option(
        None, "--runoff-manifest", help="Manifest of gauged runoff sample files (repeatable)."
    ),
    trigger_volume: Optional[float] = typer.Option(
        None, "--trigger-volume", help="Litres between composite aliquots."
    ),
    paper_compare: bool = typer.Option(
        False, "--paper-compare", help="Append published values and per-cell deltas."
    ),
    out: Path = typer.Option(Path("data/output/analysis"), "--out", "-o"),
    output_format: OutputFormat = typer.Option(OutputFormat.CSV, "--format"),
) -> None:
    """Analyse logged trial results and runoff measurements."""
    treatment_paths = list(treatments or [])
    summary_paths = list(runoff or [])
    manifest_paths = list(runoff_manifest or [])
    if not (treatment_paths or summary_paths or manifest_paths):
        raise typer.BadParameter("Give at least one --treatments, --runoff or --runoff-manifest")

    def task() -> None:
        stats, trial_metadata = ingest_treatments(treatment_paths, metadata)
        plan = SamplingPlan(trigger_volume=trigger_volume)
        events = ingest_runoff(summary_paths, manifest_paths, plan)
        inputs = treatment_paths + ([metadata] if metadata else []) + summary_paths
        provenance = Provenance(
            version=__version__, inputs=[str(p) for p in inputs + manifest_paths]
        )
        bundle = analysis_report(stats, provenance, trial_metadata, events, paper_compare)
        save_report(bundle, out, output_format)
        logger.success(f"Analysis written to {out}")

    run_task(task)


@app.command("paper-compare")
def paper_compare(
    out: Path = typer.Option(Path("data/output/paper_compare"), "--out", "-o"),
    output_format: OutputFormat = typer.Option(OutputFormat.CSV, "--format"),
) -> None:
    """
    Analyse the bundled reference dataset (values transcribed from the
    published trials) and compare every cell with the published tables.
    """

    def task() -> None:
        stats, trial_metadata = ingest_treatments(
            [reference_path(TREATMENTS_FILE)], reference_path(METADATA_FILE)
        )
        events = ingest_runoff([reference_path(RUNOFF_SUMMARY_FILE)], [], SamplingPlan())
        provenance = Provenance(
            version=__version__,
            inputs=[
                f"reference/{name}"
                for name in (TREATMENTS_FILE, METADATA_FILE, RUNOFF_SUMMARY_FILE)
            ],
        )
        bundle = analysis_report(stats, provenance, trial_metadata, events, True)
        save_report(bundle, out, output_format)
        logger.success(f"Published comparison written to {out} ({len(bundle.notes)} notes)")

    run_task(task)


@app.command("spray-map")
def spray_map(
    config_path: Path = typer.Option(..., "--config", "-c", help="YAML run configuration."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the configured seed."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    charts: bool = typer.Option(False, "--charts", help="Also write an HTML spray map."),
) -> None:
    """Simulate a trial and write only its GeoJSON spray map."""

    def task() -> None:
        config = load_config(config_path, seed)
        if config.geo is None:
            raise ConfigError("A spray map needs a geo-reference origin", ["geo: section missing"])
        out_dir = out or config.output_dir
        run = simulate_trial(config)
        path = save_spray_map(run, config, out_dir)
        if charts:
            save_chart(
                spray_map_chart(run.logs, config.effective_grid().tile_width),
                out_dir / "charts" / "spray_map.html",
            )
        logger.success(f"Spray map written to {path}")

    run_task(task)


@app.command()
def sweep(
    config_path: Path = typer.Option(..., "--config", "-c", help="YAML run configuration."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Overrides the configured seed."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    densities: str = typer.Option(
        "0.02,0.05,0.1,0.15,0.2,0.3,0.45,0.6", help="Comma-separated weed densities (1/m²)."
    ),
    degradation: str = typer.Option(
        "", help="Comma-separated bad-exposure probabilities; empty to skip."
    ),
    seeds: int = typer.Option(20, min=1, help="Seeds per degradation probability."),
    charts: bool = typer.Option(False, "--charts", help="Also write plotly HTML charts."),
) -> None:
    """Density sweep (usage vs weed density) and optional exposure-degradation sweep."""

    def parse(values: str) -> List[float]:
        try:
            return [float(v) for v in values.split(",") if v.strip()]
        except ValueError as e:
            raise ConfigError("Sweep values must be comma-separated numbers", [str(e)]) from e

    def task() -> None:
        config = load_config(config_path, seed)
        out_dir = out or config.output_dir
        frame = density_sweep(config, parse(densities))
        write_csv(frame, out_dir / "density_sweep.csv")
        probabilities = parse(degradation)
        if probabilities:
            seed_list = [config.seed + i for i in range(seeds)]
            write_csv(
                degradation_sweep(config, probabilities, seed_list),
                out_dir / "degradation_sweep.csv",
            )
        if charts:
            save_chart(usage_density_chart(frame), out_dir / "charts" / "usage_vs_density.html")
        logger.success(f"Sweeps written to {out_dir}")

    run_task(task)


if __name__ == "__main__":
    app()
