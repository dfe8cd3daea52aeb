"""CLI entry point for puf-entropy."""

import functools
import sys
from pathlib import Path

import click

from . import __version__
from .bounds import (
    build_report,
    build_table,
    grouping_bound_total,
    grouping_table_block,
    make_partition,
    per_bit_traces,
)
from .bounds.grouping import MODES
from .bounds.report import theta_key
from .codes import CODE_NAMES
from .config import AnalysisConfig, load_config, parse_device_list
from .dataset import (
    DELIMITERS,
    REDUCTIONS,
    BiasVector,
    DeviceResponses,
    bias_to_csv,
    bias_to_dict,
    bit_alias,
    derive_responses,
    flip_mask_string,
    heatmap_grid,
    load_bias_csv,
    load_frequencies,
    normalize_bias,
    reduce_measurements,
    select_devices,
)
from .errors import ConfigError, DataError, Diagnostic, PufEntropyError
from .keyrank import METHODS, keyrank_experiment
from .output import (
    error_payload,
    format_human_diagnostics,
    format_human_error,
    format_human_keyrank,
    format_human_report,
    format_json,
    format_json_pretty,
    grid_to_csv,
    ranks_to_csv,
    table_to_csv,
)


def print_progress(label: str):
    """Return a progress callback writing "label: done/total" to stderr."""

    def progress(done: int, total: int):
        click.echo(f"\r{label}: {done}/{total}", nl=False, err=True)
        if done == total:
            click.echo(err=True)

    return progress


def _fail(error: PufEntropyError, json_output: bool):
    if json_output:
        click.echo(format_json(error_payload(error)))
    else:
        click.echo(format_human_error(error), err=True)
    sys.exit(error.exit_code)


def input_options(fn):
    """Dataset / bias input and config options shared by every subcommand."""
    options = [
        click.option("--config", "config_path", type=click.Path(), help="JSON analysis config"),
        click.option(
            "--dataset", "-d", "datasets", multiple=True, help="RO frequency file (repeatable)"
        ),
        click.option("--bias", "bias_path", help="Bit-Alias CSV instead of a dataset"),
        click.option("--delimiter", type=click.Choice(DELIMITERS), default=None),
        click.option(
            "--devices-in-rows/--devices-in-cols",
            "devices_in_rows",
            default=None,
            help="Orientation of the frequency matrix",
        ),
        click.option("--header/--no-header", default=None, help="Skip one header line"),
        click.option("--devices", "devices", help='Device subset, e.g. "0-191"'),
        click.option(
            "--reduce",
            type=click.Choice(REDUCTIONS),
            default=None,
            help="Combine repeated measurements",
        ),
        click.option("--output-dir", "-o", type=click.Path(), help="Write result files here"),
        click.option("--json", "json_output", is_flag=True, help="Output JSON"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def resolve_config(
    config_path=None,
    datasets=(),
    bias_path=None,
    devices=None,
    **overrides,
) -> AnalysisConfig:
    """Config file (or defaults), then command-line overrides, validated."""
    config = load_config(config_path) if config_path else AnalysisConfig()
    if datasets:
        overrides["datasets"] = list(datasets)
    if bias_path:
        overrides["bias"] = bias_path
    if devices:
        overrides["devices"] = parse_device_list(devices)
    return config.with_overrides(**overrides).validate()


def load_inputs(config: AnalysisConfig) -> tuple[BiasVector, DeviceResponses | None, list]:
    """Bias vector, responses (None for a bias file) and preprocessing diagnostics."""
    if config.bias:
        return load_bias_csv(config.bias), None, []
    paths = config.dataset_paths()
    if not paths:
        raise ConfigError("No dataset given (use --dataset, --bias or a config file)")
    reads = [
        derive_responses(
            select_devices(
                load_frequencies(
                    path,
                    delimiter=config.delimiter,
                    devices_in_rows=config.devices_in_rows,
                    header=config.header,
                ),
                config.devices,
            )
        )
        for path in paths
    ]
    responses = reduce_measurements(reads, config.reduce)
    return bit_alias(responses), responses, responses.tie_diagnostics()


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise DataError(f"Cannot write output: {e.strerror or e}", location=str(path)) from None
    return path


def _emit(output_dir: str | None, name: str, text: str) -> Path | None:
    if output_dir is None:
        return None
    return _write(Path(output_dir) / name, text)


def _warnings(diagnostics: list[Diagnostic]) -> dict:
    return {"warnings": [d.to_dict() for d in diagnostics]} if diagnostics else {}


def command(fn):
    """Turn PufEntropyError into the error output and its exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PufEntropyError as e:
            _fail(e, kwargs.get("json_output", False))

    return wrapper


@click.group()
@click.version_option(__version__, prog_name="puf-entropy")
def main():
    """Conditional min-entropy bounds and key-rank validation for PUF key storage."""
    pass


@main.command()
@input_options
@click.option("--grid-width", type=int, default=32, show_default=True, help="Heat-map row width")
@command
def bitalias(grid_width, json_output, output_dir, **options):
    """Estimate the Bit-Alias vector and write heat-map data."""
    config = resolve_config(output_dir=output_dir, **options)
    bias, responses, diagnostics = load_inputs(config)
    comments = config.echo_lines()
    _, mask = normalize_bias(bias)
    payload = {
        "ok": True,
        "config": config.provenance(),
        "bias": bias_to_dict(bias),
        "flip_mask": flip_mask_string(mask),
        **_warnings(diagnostics),
    }

    csv_text = bias_to_csv(bias, comments)
    written = [
        _emit(config.output_dir, "bitalias.csv", csv_text),
        _emit(config.output_dir, "bitalias.json", format_json_pretty(payload)),
        _emit(
            config.output_dir,
            "heatmap.csv",
            grid_to_csv(heatmap_grid(bias, grid_width), comments),
        ),
    ]

    if json_output:
        click.echo(format_json(payload))
    elif config.output_dir is None:
        click.echo(csv_text, nl=False)
    else:
        devices = responses.device_count if responses is not None else "?"
        click.echo(f"✓ Bit-Alias over {bias.n} positions from {devices} devices")
        for path in written:
            click.echo(f"  {path}")
        for line in format_human_diagnostics(diagnostics):
            click.echo(line)


@main.command()
@input_options
@click.option("--code", "codes", multiple=True, type=click.Choice(CODE_NAMES), help="Code rows")
@click.option("--theta-delta", "theta_deltas", multiple=True, type=float, help="Grouping columns")
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--L", "L", type=float, default=None, help="Hash entropy loss in bit")
@command
def table(codes, theta_deltas, mode, L, json_output, output_dir, **options):
    """Build the estimator table: one row per code."""
    config = resolve_config(
        output_dir=output_dir,
        codes=list(codes) or None,
        theta_deltas=list(theta_deltas) or None,
        mode=mode,
        L=L,
        **options,
    )
    bias, _, diagnostics = load_inputs(config)
    rows = build_table(
        config.resolved_codes(),
        bias,
        config.theta_deltas,
        config.mode,
        config.L,
        progress_callback=None if json_output else print_progress("codes"),
    )
    payload = {
        "ok": True,
        "config": config.provenance(),
        "rows": [row.to_dict() for row in rows],
        **_warnings(diagnostics),
    }
    csv_text = table_to_csv(rows, config.theta_deltas, config.echo_lines())
    _emit(config.output_dir, "table.csv", csv_text)
    _emit(config.output_dir, "table.json", format_json_pretty(payload))

    if json_output:
        click.echo(format_json(payload))
    else:
        click.echo(csv_text, nl=False)


@main.command()
@input_options
@click.option("--code", required=True, type=click.Choice(CODE_NAMES))
@click.option("--theta-delta", "theta_deltas", multiple=True, type=float, help="Grouping values")
@click.option("--L", "L", type=float, default=None, help="Hash entropy loss in bit")
@command
def entropy(code, theta_deltas, L, json_output, output_dir, **options):
    """All estimators for a single code, with per-block and per-bit traces."""
    config = resolve_config(
        output_dir=output_dir,
        codes=[code],
        theta_deltas=list(theta_deltas) or None,
        L=L,
        **options,
    )
    bias, _, diagnostics = load_inputs(config)
    report = build_report(
        config.resolved_codes()[0],
        bias,
        config.theta_deltas,
        config.mode,
        config.L,
        progress_callback=None if json_output else print_progress("blocks"),
    )
    iid, ind = per_bit_traces(bias)
    payload = {
        "ok": True,
        "config": config.provenance(),
        "report": report.to_dict(),
        "per_bit": {"iid": [float(v) for v in iid], "ind": [float(v) for v in ind]},
        **_warnings(diagnostics),
    }
    _emit(config.output_dir, f"entropy_{code}.json", format_json_pretty(payload))

    if json_output:
        click.echo(format_json(payload))
    else:
        click.echo(format_human_report(report))


@main.command()
@input_options
@click.option("--code", required=True, type=click.Choice(CODE_NAMES))
@click.option("--theta-delta", type=float, default=0.05, show_default=True)
@click.option("--mode", type=click.Choice(MODES), default=None)
@click.option("--bracket", is_flag=True, help="Also compute H^L and the quantization error")
@click.option("--emit-table", type=click.Path(), help="Write the (zeta, psi, sigma) prefix as CSV")
@command
def grouping(code, theta_delta, mode, bracket, emit_table, json_output, output_dir, **options):
    """Grouping bound for a single code."""
    config = resolve_config(
        output_dir=output_dir, codes=[code], theta_deltas=[theta_delta], mode=mode, **options
    )
    bias, _, diagnostics = load_inputs(config)
    block_code = config.resolved_codes()[0]
    part = make_partition(block_code, bias.n)
    progress = None if json_output else print_progress("blocks")
    bound = grouping_bound_total(
        block_code, bias, part, theta_delta, config.mode, progress_callback=progress
    )
    result = {
        "code": block_code.name,
        "theta_delta": theta_delta,
        "mode": config.mode,
        "total": bound.total,
        "per_block": bound.per_block,
    }
    if bracket:
        low = grouping_bound_total(block_code, bias, part, theta_delta, "lowest")
        high = (
            bound
            if config.mode == "highest"
            else grouping_bound_total(block_code, bias, part, theta_delta, "highest")
        )
        result["bracket"] = {
            "lowest": low.total,
            "highest": high.total,
            "error": max(0.0, low.total - high.total),
        }

    if emit_table:
        normalized, _ = normalize_bias(bias)
        chunks = []
        for i, block in enumerate(part.blocks(normalized)):
            text = grouping_table_block(
                block_code.n_b, block_code.k_b, block.p, theta_delta, config.mode
            ).to_csv(block=i)
            chunks.append(text if i == 0 else text.split("\n", 1)[1])
        comments = "".join(f"# {line}\n" for line in config.echo_lines())
        _write(Path(emit_table), comments + "".join(chunks))

    payload = {"ok": True, "config": config.provenance(), **result, **_warnings(diagnostics)}
    name = f"grouping_{code}_{theta_key(theta_delta)}.json"
    _emit(config.output_dir, name, format_json_pretty(payload))

    if json_output:
        click.echo(format_json(payload))
    else:
        click.echo(
            f"✓ {block_code.name}: grouping bound {bound.total:.4f} bit "
            f"(theta_delta={theta_delta:g}, mode={config.mode}, {part.block_count} blocks)"
        )
        if bracket:
            b = result["bracket"]
            click.echo(
                f"  H^L={b['lowest']:.4f}  H^H={b['highest']:.4f}  error <= {b['error']:.4f}"
            )


@main.command()
@input_options
@click.option("--code", required=True, type=click.Choice(CODE_NAMES))
@click.option("--keys", "key_count", type=int, default=None, help="Keys per device")
@click.option("--seed", type=int, default=None, help="Unsigned 64-bit key seed")
@click.option("--bins", type=int, default=None, help="Histogram bin count")
@click.option("--method", type=click.Choice(METHODS), default=None)
@click.option("--theta-delta", type=float, default=0.05, show_default=True)
@click.option("--skip-bound", is_flag=True, help="Do not compute the grouping-bound marker")
@command
def keyrank(
    code, key_count, seed, bins, method, theta_delta, skip_bound, json_output, output_dir, **options
):
    """Enroll seeded keys on every device and rank them."""
    config = resolve_config(
        output_dir=output_dir,
        codes=[code],
        theta_deltas=[theta_delta],
        key_count=key_count,
        seed=seed,
        bins=bins,
        method=method,
        **options,
    )
    bias, responses, diagnostics = load_inputs(config)
    if responses is None:
        raise ConfigError("Key rank needs device responses; a bias file is not enough")
    block_code = config.resolved_codes()[0]

    experiment = keyrank_experiment(
        responses,
        bias,
        block_code,
        key_count=config.key_count,
        seed=config.seed,
        bins=config.bins,
        method=config.method,
        progress_callback=None if json_output else print_progress("devices"),
    )
    bound = None
    if not skip_bound:
        part = make_partition(block_code, bias.n)
        bound = grouping_bound_total(block_code, bias, part, theta_delta, "highest").total
    summary = experiment.summary(grouping_bound=bound)
    payload = {
        "ok": True,
        "config": config.provenance(),
        "summary": summary,
        "method": experiment.method,
        "histogram": experiment.histogram(),
        "markers": {"k": experiment.k, "grouping_bound": bound},
        **_warnings(diagnostics + experiment.diagnostics),
    }
    csv_text = ranks_to_csv(experiment, config.echo_lines())
    _emit(config.output_dir, f"ranks_{code}.csv", csv_text)
    _emit(config.output_dir, f"keyrank_{code}.json", format_json_pretty(payload))

    if json_output:
        click.echo(format_json(payload))
    elif config.output_dir is None:
        click.echo(csv_text, nl=False)
        click.echo(format_human_keyrank(summary), err=True)
    else:
        click.echo(format_human_keyrank(summary))
        for line in format_human_diagnostics(experiment.diagnostics):
            click.echo(line)


if __name__ == "__main__":
    main()
