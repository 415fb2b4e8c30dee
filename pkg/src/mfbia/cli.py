"""Command-line surface: synthesize, posterior, riig, sweep, reproduce.

Every command is deterministic: identical configuration yields byte-identical
artifacts.  Posterior sidecars embed content hashes of the prior and of the
first-field observations; ``riig`` refuses to compare runs whose hashes
differ, since a relative gain between incompatible analyses is meaningless.

Exit codes: 0 success, 1 runtime or model error, 2 usage, configuration, or
provenance error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunConfig,
    default_config,
    high_noise_second_field_config,
    load_config,
)
from .inference import (
    cdf_spaced_grid,
    evaluate_posterior,
    information_gain,
    posterior_to_csv,
    posterior_to_json,
    riig,
)
from .models import build_model
from .probabilistic import (
    FieldObservations,
    log_likelihood,
    observations_from_csv,
    observations_to_csv,
    synthesize_observations,
    write_empty_observations_csv,
)
from .sweep import (
    export_coupling_sweep_csv,
    export_sweep_csv,
    run_coupling_sweep,
    run_riig_sweep,
    write_run_manifest,
)

#: Reference values the reproduction bundles compare against.
REFERENCE_RIIG = {
    "fig9_middle": 1.23,
    "fig9_right": 1.22,
    "fig10_point3": 3.65,
}


class ProvenanceError(ValueError):
    """Two runs are not comparable (different prior or first-field data)."""


def _hash_payload(payload) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()).hexdigest()


def _prior_hash(prior) -> str:
    return _hash_payload({
        "mean": prior.mean.tolist(),
        "variance": prior.variance.tolist(),
        "lower": prior.lower.tolist(),
        "upper": [str(v) for v in prior.upper.tolist()],
    })


def _observations_hash(obs: FieldObservations | None) -> str:
    if obs is None:
        return _hash_payload(None)
    return _hash_payload({
        "field_id": obs.field_id,
        "coordinates": obs.coordinates.tolist(),
        "values": obs.values.tolist(),
        "sigma2": obs.noise_variance,
    })


def _provenance(config: RunConfig, observations) -> dict:
    first = next((o for o in observations if o.field_id == 1), None)
    return {
        "prior_hash": _prior_hash(config.prior),
        "first_field_hash": _observations_hash(first),
        "model": config.model,
    }


def _field_coordinates(spec) -> np.ndarray:
    return np.linspace(spec.coord_range[0], spec.coord_range[1], spec.count)


def _synthesize_field(config: RunConfig, model, spec) -> FieldObservations:
    return synthesize_observations(model, np.array(config.truth),
                                   spec.field_id, _field_coordinates(spec),
                                   spec.snr)


def _posterior_bundle(config: RunConfig, observations, grid_shape,
                      out_dir: Path, tag: str):
    """Evaluate one posterior and write its CSV + JSON artifacts."""
    model = build_model(config.model, config.constants)
    axes = cdf_spaced_grid(config.prior, grid_shape)
    selected = [o for o in observations if len(o) > 0]
    grid = evaluate_posterior(
        config.prior,
        lambda nodes: log_likelihood(model, nodes, selected),
        axes, axis_names=model.param_names)
    gain = information_gain(grid, config.prior)
    if grid.boundary_warning:
        print(f"warning: {100 * grid.boundary_mass:.1f}% of posterior mass "
              f"in the outermost grid shell ({tag}); grid likely too small",
              file=sys.stderr)
    csv_path = out_dir / f"posterior_{tag}.csv"
    json_path = out_dir / f"posterior_{tag}.json"
    posterior_to_csv(grid, csv_path)
    posterior_to_json(
        grid, json_path, information_gain=gain,
        provenance=_provenance(config, selected),
        extra={"fields": sorted(o.field_id for o in selected),
               "grid_shape": list(grid_shape)})
    return grid, gain, json_path


def _load_run_json(path) -> dict:
    with open(path) as handle:
        data = json.load(handle)
    for key in ("information_gain", "provenance"):
        if key not in data:
            raise ProvenanceError(f"{path}: missing {key!r}; "
                                  f"not a posterior sidecar")
    return data


def cmd_synthesize(args) -> int:
    config = _resolve_config(args)
    model = build_model(config.model, config.constants)
    out_dir = Path(args.out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.seedless:
        print("note: observation noise is quasi-random and deterministic; "
              "there is no RNG seed", file=sys.stderr)
    for spec in config.fields:
        path = out_dir / f"observations_field{spec.field_id}.csv"
        if spec.count == 0:
            write_empty_observations_csv(path)
        else:
            observations_to_csv(_synthesize_field(config, model, spec), path)
        print(path)
    return 0


def cmd_posterior(args) -> int:
    config = _resolve_config(args)
    observations = []
    for path in args.obs or []:
        obs = observations_from_csv(path)
        if obs is not None:
            observations.append(obs)
    if args.fields is None:
        selection = sorted({o.field_id for o in observations})
    else:
        selection = sorted({int(f) for f in args.fields.split(",") if f.strip()})
    selected = [o for o in observations if o.field_id in selection]
    missing = set(selection) - {o.field_id for o in selected}
    if missing:
        raise ConfigError(f"--fields requests field(s) {sorted(missing)} "
                          f"but no observation file provides them")
    grid_shape = _parse_grid(args.grid) or config.grid_shape
    out_dir = Path(args.out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = "f" + ("-".join(str(f) for f in selection) if selection else "none")
    _, gain, json_path = _posterior_bundle(config, selected, grid_shape,
                                           out_dir, tag)
    print(f"information gain: {gain!r} nats")
    print(json_path)
    return 0


def cmd_riig(args) -> int:
    single = _load_run_json(args.single_run)
    multi = _load_run_json(args.multi_run)
    for key in ("prior_hash", "first_field_hash"):
        if single["provenance"].get(key) != multi["provenance"].get(key):
            raise ProvenanceError(
                f"{key} differs between {args.single_run} and "
                f"{args.multi_run}; the runs are not comparable")
    ig_single = float(single["information_gain"])
    ig_multi = float(multi["information_gain"])
    value = riig(ig_single, ig_multi)
    print(f"ig_single = {ig_single!r} nats")
    print(f"ig_multi  = {ig_multi!r} nats")
    print(f"riig      = {value!r}")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "riig.json"
        with open(path, "w") as handle:
            json.dump({"ig_single": ig_single, "ig_multi": ig_multi,
                       "riig": value,
                       "inputs": [str(args.single_run), str(args.multi_run)]},
                      handle, indent=2, sort_keys=True)
            handle.write("\n")
        print(path)
    return 0


def _progress_printer(label: str):
    def callback(done: int, total: int):
        print(f"\r{label}: {done}/{total} cells", end="", file=sys.stderr)
        if done == total:
            print(file=sys.stderr)
    return callback


def cmd_sweep(args) -> int:
    config = _resolve_config(args)
    if config.sweep is None:
        raise ConfigError("configuration has no sweep section")
    workers = args.workers or config.workers
    out_dir = Path(args.out or config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    if config.sweep.kind == "coupling":
        spec = config.coupling_sweep_spec()
        results = run_coupling_sweep(spec, workers=workers,
                                     progress=_progress_printer("sweep"))
        export_coupling_sweep_csv(results, out_dir / "sweep.csv")
    else:
        spec = config.riig_sweep_spec(full=args.full)
        results = run_riig_sweep(spec, workers=workers,
                                 progress=_progress_printer("sweep"))
        export_sweep_csv(results, out_dir / "sweep.csv")
    runtime = time.perf_counter() - started
    write_run_manifest(out_dir / "sweep_manifest.json", spec, results,
                       workers=workers, runtime_seconds=runtime)
    failed = [r for r in results if not r.ok]
    print(f"{len(results)} cells, {len(failed)} failed, "
          f"{runtime:.1f} s with {workers} worker(s)")
    print(out_dir / "sweep.csv")
    return 0


def _write_summary_csv(path, rows) -> None:
    import csv as _csv

    with open(path, "w", newline="") as handle:
        writer = _csv.writer(handle, lineterminator="\n")
        writer.writerow(["case", "n_obs2", "snr2", "ig_single", "ig_multi",
                         "riig", "reference_riig"])
        for row in rows:
            writer.writerow(row)


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out) / args.figure
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.figure == "fig9":
        return _reproduce_fig9(out_dir, workers=args.workers or 1)
    return _reproduce_fig10(out_dir, full=args.full,
                            workers=args.workers or 1)


def _reproduce_fig9(out_dir: Path, workers: int) -> int:
    config_middle = default_config()
    config_right = high_noise_second_field_config()
    model = build_model(config_middle.model, config_middle.constants)

    obs1 = _synthesize_field(config_middle, model, config_middle.field_spec(1))
    obs2_middle = _synthesize_field(config_middle, model,
                                    config_middle.field_spec(2))
    obs2_right = _synthesize_field(config_right, model,
                                   config_right.field_spec(2))
    observations_to_csv(obs1, out_dir / "observations_field1.csv")
    observations_to_csv(obs2_middle, out_dir / "observations_field2_middle.csv")
    observations_to_csv(obs2_right, out_dir / "observations_field2_right.csv")

    shape = config_middle.grid_shape
    _, ig_single, _ = _posterior_bundle(config_middle, [obs1], shape,
                                        out_dir, "single")
    _, ig_middle, _ = _posterior_bundle(config_middle, [obs1, obs2_middle],
                                        shape, out_dir, "multi_middle")
    _, ig_right, _ = _posterior_bundle(config_right, [obs1, obs2_right],
                                       shape, out_dir, "multi_right")

    riig_middle = riig(ig_single, ig_middle)
    riig_right = riig(ig_single, ig_right)
    rows = [
        ["middle", 2, 1.2e4, repr(ig_single), repr(ig_middle),
         repr(riig_middle), REFERENCE_RIIG["fig9_middle"]],
        ["right", 256, 80.0, repr(ig_single), repr(ig_right),
         repr(riig_right), REFERENCE_RIIG["fig9_right"]],
    ]
    _write_summary_csv(out_dir / "summary.csv", rows)
    print(f"single-field information gain: {ig_single:.4f} nats")
    print(f"middle: riig = {riig_middle:.4f} (reference "
          f"{REFERENCE_RIIG['fig9_middle']})")
    print(f"right:  riig = {riig_right:.4f} (reference "
          f"{REFERENCE_RIIG['fig9_right']})")
    print(out_dir / "summary.csv")
    return 0


def _reproduce_fig10(out_dir: Path, full: bool, workers: int) -> int:
    config = default_config()
    spec = config.riig_sweep_spec(full=full)
    started = time.perf_counter()
    results = run_riig_sweep(spec, workers=workers,
                             progress=_progress_printer("fig10"))
    runtime = time.perf_counter() - started
    export_sweep_csv(results, out_dir / "sweep.csv")
    write_run_manifest(out_dir / "sweep_manifest.json", spec, results,
                       workers=workers, runtime_seconds=runtime)

    by_cell = {(r.n_obs2, r.snr2): r for r in results}
    anchors = [
        ("point1", spec.n_obs2_axis[0], spec.snr2_axis[-1],
         REFERENCE_RIIG["fig9_middle"]),
        ("point2", spec.n_obs2_axis[-1], spec.snr2_axis[0],
         REFERENCE_RIIG["fig9_right"]),
        ("point3", spec.n_obs2_axis[-1], spec.snr2_axis[-1],
         REFERENCE_RIIG["fig10_point3"]),
    ]
    rows = []
    for name, n_obs2, snr2, reference in anchors:
        res = by_cell.get((n_obs2, snr2))
        if res is None or not res.ok:
            rows.append([name, n_obs2, repr(snr2), "", "", "", reference])
            continue
        rows.append([name, n_obs2, repr(snr2), repr(res.ig_single),
                     repr(res.ig_multi), repr(res.riig), reference])
        print(f"{name}: n_obs2={n_obs2} snr2={snr2:g} "
              f"riig={res.riig:.4f} (reference {reference})")
    _write_summary_csv(out_dir / "summary.csv", rows)
    print(out_dir / "sweep.csv")
    return 0


def _parse_grid(text) -> tuple[int, ...] | None:
    if not text:
        return None
    try:
        parts = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"--grid: expected N or N,N, got {text!r}") from None
    if not parts:
        return None
    return tuple(parts)


def _resolve_config(args) -> RunConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return default_config()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfbia",
        description="Multi-field Bayesian inverse analysis pipeline")
    parser.add_argument("--version", action="version",
                        version=f"mfbia {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthesize",
                       help="generate observation CSVs from the truth model")
    p.add_argument("--config", help="YAML run configuration "
                                    "(defaults to the built-in setup)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seedless", action="store_true",
                   help="acknowledge that synthesis has no RNG seed (no-op)")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("posterior",
                       help="evaluate a grid posterior from observation files")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--obs", action="append",
                   help="observation CSV (repeatable)")
    p.add_argument("--fields",
                   help="comma-separated field ids to include; empty for none")
    p.add_argument("--grid", help="grid resolution N or N,N")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("riig",
                       help="relative increase in information gain of two runs")
    p.add_argument("single_run", help="posterior JSON of the single-field run")
    p.add_argument("multi_run", help="posterior JSON of the multi-field run")
    p.add_argument("--out", help="directory for riig.json")
    p.set_defaults(func=cmd_riig)

    p = sub.add_parser("sweep", help="run the configured parameter sweep")
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--full", action="store_true",
                   help="use the full 50x12 sweep resolution")
    p.add_argument("--workers", type=int, help="parallel worker count")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce",
                       help="emit the full artifact bundle for a figure")
    p.add_argument("figure", choices=("fig9", "fig10"))
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--full", action="store_true",
                   help="fig10 at full 50x12 resolution")
    p.add_argument("--workers", type=int, help="parallel worker count")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ProvenanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
