"""Parameter studies over observation configurations.

The main study fixes the first-field observations and scans the second
field's observation count and SNR, computing one relative-increase-in-
information-gain value per cell.  Because the first field never changes,
its information gain is computed once per sweep and shared by all cells.

Cells are pure functions of the sweep specification, so they can run on any
number of workers without changing a single bit of the output; failures are
recorded per cell and never abort the sweep.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import __version__
from .inference import (
    cdf_spaced_grid,
    evaluate_posterior,
    information_gain,
    riig,
)
from .models import build_model
from .probabilistic import (
    TruncatedNormalPrior,
    log_likelihood,
    synthesize_observations,
)

SWEEP_CSV_HEADER = ("n_obs2", "snr2", "ig_single", "ig_multi", "riig",
                    "boundary_mass", "status")
COUPLING_SWEEP_CSV_HEADER = ("snr1", "snr2", "coupling", "ig_single",
                             "ig_multi", "riig", "boundary_mass", "status")


@dataclass(frozen=True)
class ObservationPlan:
    """Count, SNR, and coordinate range for one field's observations."""

    count: int
    snr: float
    coord_min: float
    coord_max: float

    def __post_init__(self):
        if self.count < 0:
            raise ValueError(f"count must be >= 0, got {self.count}")
        if not self.snr > 0:
            raise ValueError(f"snr must be > 0, got {self.snr}")
        if not self.coord_max >= self.coord_min:
            raise ValueError("coord_max must be >= coord_min")

    def coordinates(self) -> np.ndarray:
        return np.linspace(self.coord_min, self.coord_max, self.count)


def _strictly_increasing(axis) -> bool:
    arr = np.asarray(axis, dtype=float)
    return arr.size > 0 and bool(np.all(np.diff(arr) > 0))


@dataclass(frozen=True)
class SweepSpec:
    """Specification of one (observation count x SNR) study of field 2."""

    model_name: str
    truth: tuple[float, ...]
    prior: TruncatedNormalPrior
    first_field: ObservationPlan
    n_obs2_axis: tuple[int, ...]
    snr2_axis: tuple[float, ...]
    grid_shape: tuple[int, ...]
    second_field_range: tuple[float, float]
    model_constants: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "truth", tuple(float(v) for v in self.truth))
        object.__setattr__(self, "n_obs2_axis",
                           tuple(int(n) for n in self.n_obs2_axis))
        object.__setattr__(self, "snr2_axis",
                           tuple(float(s) for s in self.snr2_axis))
        object.__setattr__(self, "grid_shape",
                           tuple(int(n) for n in self.grid_shape))
        if not self.n_obs2_axis or not self.snr2_axis:
            raise ValueError("sweep axes must be non-empty")
        if any(n < 1 for n in self.n_obs2_axis):
            raise ValueError("observation counts must be >= 1")
        if not _strictly_increasing(self.n_obs2_axis):
            raise ValueError("n_obs2_axis must be strictly increasing")
        if not _strictly_increasing(self.snr2_axis):
            raise ValueError("snr2_axis must be strictly increasing")
        if self.first_field.count < 1:
            raise ValueError("the fixed first field needs >= 1 observation")


@dataclass(frozen=True)
class SweepResult:
    """One cell of the study; numeric fields are None when status != ok."""

    n_obs2: int
    snr2: float
    ig_single: float | None
    ig_multi: float | None
    riig: float | None
    boundary_mass: float | None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class _CellContext:
    """Everything a worker needs to evaluate one cell, all picklable."""

    model_name: str
    model_constants: dict
    truth: tuple[float, ...]
    prior: TruncatedNormalPrior
    axes: tuple[np.ndarray, ...]
    log_lik_first: np.ndarray
    ig_single: float
    second_field_range: tuple[float, float]


def _grid_nodes(axes) -> np.ndarray:
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _single_field_analysis(spec: SweepSpec):
    """Shared first-field work: observations, likelihood grid, IG."""
    model = build_model(spec.model_name, spec.model_constants)
    axes = cdf_spaced_grid(spec.prior, spec.grid_shape)
    obs1 = synthesize_observations(model, np.array(spec.truth), 1,
                                   spec.first_field.coordinates(),
                                   spec.first_field.snr)
    nodes = _grid_nodes(axes)
    ll1 = log_likelihood(model, nodes, [obs1])
    posterior1 = evaluate_posterior(spec.prior, lambda _: ll1, axes)
    ig1 = information_gain(posterior1, spec.prior)
    return _CellContext(model_name=spec.model_name,
                        model_constants=dict(spec.model_constants),
                        truth=spec.truth, prior=spec.prior, axes=axes,
                        log_lik_first=ll1, ig_single=ig1,
                        second_field_range=spec.second_field_range), obs1


def _evaluate_riig_cell(context: _CellContext,
                        cell: tuple[int, float]) -> SweepResult:
    n_obs2, snr2 = cell
    try:
        model = build_model(context.model_name, context.model_constants)
        coords2 = np.linspace(context.second_field_range[0],
                              context.second_field_range[1], n_obs2)
        obs2 = synthesize_observations(model, np.array(context.truth), 2,
                                       coords2, snr2)
        nodes = _grid_nodes(context.axes)
        ll2 = log_likelihood(model, nodes, [obs2])
        posterior = evaluate_posterior(
            context.prior, lambda _: context.log_lik_first + ll2, context.axes)
        ig_multi = information_gain(posterior, context.prior)
        return SweepResult(n_obs2=n_obs2, snr2=snr2,
                           ig_single=context.ig_single, ig_multi=ig_multi,
                           riig=riig(context.ig_single, ig_multi),
                           boundary_mass=posterior.boundary_mass)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return SweepResult(n_obs2=n_obs2, snr2=snr2, ig_single=None,
                           ig_multi=None, riig=None, boundary_mass=None,
                           status=f"failed:{exc}")


def _run_cells(worker, cells, workers: int, progress=None) -> list:
    results = []
    if workers <= 1:
        for index, cell in enumerate(cells):
            results.append(worker(cell))
            if progress is not None:
                progress(index + 1, len(cells))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, result in enumerate(pool.map(worker, cells)):
                results.append(result)
                if progress is not None:
                    progress(index + 1, len(cells))
    return results


def run_riig_sweep(spec: SweepSpec, workers: int = 1,
                   progress=None) -> list[SweepResult]:
    """Evaluate the relative information-gain increase on the cell grid.

    Results come back axis-major: the observation-count axis varies
    slowest.  Identical for any worker count.
    """
    context, _ = _single_field_analysis(spec)
    cells = [(n_obs2, snr2) for n_obs2 in spec.n_obs2_axis
             for snr2 in spec.snr2_axis]
    worker = partial(_evaluate_riig_cell, context)
    return _run_cells(worker, cells, workers, progress)


@dataclass(frozen=True)
class CouplingSweepSpec:
    """Three-axis study: first-field SNR x second-field SNR x coupling.

    Works for any registered model whose constructor accepts the named
    coupling constant; each cell rebuilds the model at its coupling value,
    so the single-field gain is recomputed per cell as well.
    """

    model_name: str
    truth: tuple[float, ...]
    prior: TruncatedNormalPrior
    n_obs1: int
    n_obs2: int
    first_field_range: tuple[float, float]
    second_field_range: tuple[float, float]
    snr1_axis: tuple[float, ...]
    snr2_axis: tuple[float, ...]
    coupling_axis: tuple[float, ...]
    grid_shape: tuple[int, ...]
    model_constants: dict = field(default_factory=dict)
    coupling_constant: str = "coupling"

    def __post_init__(self):
        for name in ("snr1_axis", "snr2_axis", "coupling_axis"):
            axis = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, axis)
            if not axis:
                raise ValueError(f"{name} must be non-empty")
        if self.n_obs1 < 1 or self.n_obs2 < 1:
            raise ValueError("observation counts must be >= 1")


@dataclass(frozen=True)
class CouplingSweepResult:
    snr1: float
    snr2: float
    coupling: float
    ig_single: float | None
    ig_multi: float | None
    riig: float | None
    boundary_mass: float | None
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _evaluate_coupling_cell(spec: CouplingSweepSpec,
                            cell: tuple[float, float, float]
                            ) -> CouplingSweepResult:
    snr1, snr2, coupling = cell
    try:
        constants = dict(spec.model_constants)
        constants[spec.coupling_constant] = coupling
        model = build_model(spec.model_name, constants)
        truth = np.array(spec.truth)
        axes = cdf_spaced_grid(spec.prior, spec.grid_shape)
        nodes = _grid_nodes(axes)
        coords1 = np.linspace(*spec.first_field_range, spec.n_obs1)
        coords2 = np.linspace(*spec.second_field_range, spec.n_obs2)
        obs1 = synthesize_observations(model, truth, 1, coords1, snr1)
        obs2 = synthesize_observations(model, truth, 2, coords2, snr2)
        ll1 = log_likelihood(model, nodes, [obs1])
        ll2 = log_likelihood(model, nodes, [obs2])
        posterior1 = evaluate_posterior(spec.prior, lambda _: ll1, axes)
        ig_single = information_gain(posterior1, spec.prior)
        posterior = evaluate_posterior(spec.prior, lambda _: ll1 + ll2, axes)
        ig_multi = information_gain(posterior, spec.prior)
        return CouplingSweepResult(snr1=snr1, snr2=snr2, coupling=coupling,
                                   ig_single=ig_single, ig_multi=ig_multi,
                                   riig=riig(ig_single, ig_multi),
                                   boundary_mass=posterior.boundary_mass)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        return CouplingSweepResult(snr1=snr1, snr2=snr2, coupling=coupling,
                                   ig_single=None, ig_multi=None, riig=None,
                                   boundary_mass=None, status=f"failed:{exc}")


def run_coupling_sweep(spec: CouplingSweepSpec, workers: int = 1,
                       progress=None) -> list[CouplingSweepResult]:
    """Evaluate the three-axis study, snr1 outermost, coupling innermost."""
    cells = [(snr1, snr2, coupling)
             for snr1 in spec.snr1_axis
             for snr2 in spec.snr2_axis
             for coupling in spec.coupling_axis]
    worker = partial(_evaluate_coupling_cell, spec)
    return _run_cells(worker, cells, workers, progress)


def _format(value) -> str:
    return "" if value is None else repr(float(value))


def export_sweep_csv(results, path) -> None:
    """Axis-major CSV of the cell results; byte-stable across runs."""
    results = list(results)
    if not results:
        raise ValueError("results must be non-empty")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        for res in results:
            writer.writerow([res.n_obs2, _format(res.snr2),
                             _format(res.ig_single), _format(res.ig_multi),
                             _format(res.riig), _format(res.boundary_mass),
                             res.status])


def export_coupling_sweep_csv(results, path) -> None:
    results = list(results)
    if not results:
        raise ValueError("results must be non-empty")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(COUPLING_SWEEP_CSV_HEADER)
        for res in results:
            writer.writerow([_format(res.snr1), _format(res.snr2),
                             _format(res.coupling), _format(res.ig_single),
                             _format(res.ig_multi), _format(res.riig),
                             _format(res.boundary_mass), res.status])


def _spec_payload(spec) -> dict:
    payload = {
        "model": spec.model_name,
        "model_constants": dict(spec.model_constants),
        "truth": list(spec.truth),
        "prior": {
            "mean": spec.prior.mean.tolist(),
            "variance": spec.prior.variance.tolist(),
            "lower": spec.prior.lower.tolist(),
            "upper": [v if np.isfinite(v) else None
                      for v in spec.prior.upper.tolist()],
        },
        "grid_shape": list(spec.grid_shape),
    }
    if isinstance(spec, SweepSpec):
        payload.update({
            "first_field": {
                "count": spec.first_field.count, "snr": spec.first_field.snr,
                "coord_min": spec.first_field.coord_min,
                "coord_max": spec.first_field.coord_max,
            },
            "n_obs2_axis": list(spec.n_obs2_axis),
            "snr2_axis": list(spec.snr2_axis),
            "second_field_range": list(spec.second_field_range),
        })
    else:
        payload.update({
            "n_obs1": spec.n_obs1, "n_obs2": spec.n_obs2,
            "first_field_range": list(spec.first_field_range),
            "second_field_range": list(spec.second_field_range),
            "snr1_axis": list(spec.snr1_axis),
            "snr2_axis": list(spec.snr2_axis),
            "coupling_axis": list(spec.coupling_axis),
        })
    return payload


def write_run_manifest(path, spec, results, *, workers: int,
                       runtime_seconds: float | None = None) -> None:
    """JSON record of what ran: spec echo, tool version, timing, outcome."""
    results = list(results)
    payload = {
        "tool": "mfbia",
        "version": __version__,
        "spec": _spec_payload(spec),
        "workers": workers,
        "cells": len(results),
        "failed_cells": sum(0 if r.ok else 1 for r in results),
        "runtime_seconds": runtime_seconds,
        "written_at_unix": time.time() if runtime_seconds is not None else None,
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
