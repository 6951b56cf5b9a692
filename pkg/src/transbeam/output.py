"""Bit-stable output formats: energy time series (CSV) and state snapshots (JSON)."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .discretization import DiscreteSpace, State
from .errors import ConfigurationError, OutputError
from .timestepper import BalanceRecord

TIMESERIES_HEADER = ("t", "E", "KE", "bending", "Q1", "Q2", "lyapunov", "phi",
                     "diss_kappa", "diss_gamma", "work", "balance_residual", "vel_norm_W")

SNAPSHOT_FORMAT = "transbeam-snapshot/1"


def _fmt(x) -> str:
    return "%.17g" % x


def write_timeseries(path, records) -> Path:
    """Write one row per record; 17 significant digits round-trip doubles."""
    records = list(records)
    if not records:
        raise ConfigurationError("EMPTY_TIMESERIES", "no records to write")
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TIMESERIES_HEADER)
            for r in records:
                w.writerow([_fmt(v) for v in r.as_row()])
    except OSError as exc:
        raise OutputError("IO_FAILURE", f"cannot write {path}: {exc}") from exc
    return path


def read_timeseries(path) -> list:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OutputError("IO_FAILURE", f"cannot read {path}: {exc}") from exc
    if not rows or tuple(rows[0]) != TIMESERIES_HEADER:
        raise OutputError("IO_FAILURE", f"{path}: unexpected header")
    return [BalanceRecord(*(float(v) for v in row)) for row in rows[1:]]


def snapshot_dict(state: State, space: DiscreteSpace) -> dict:
    return {"format": SNAPSHOT_FORMAT, "space_version": space.version, "t": float(state.t),
            "z": [float(v) for v in state.z], "v": [float(v) for v in state.v]}


def write_snapshot(path, state: State, space: DiscreteSpace) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(snapshot_dict(state, space), fh)
    except OSError as exc:
        raise OutputError("IO_FAILURE", f"cannot write {path}: {exc}") from exc
    return path


def read_snapshot(path, space: DiscreteSpace) -> State:
    """Reload a snapshot as initial data; the DOF layout must match ``space``."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise OutputError("IO_FAILURE", f"cannot read {path}: {exc}") from exc
    if data.get("space_version") != space.version:
        raise ConfigurationError("SNAPSHOT_MISMATCH",
                                 f"{path} was written for a different mesh or DOF layout")
    return State(np.array(data["z"], dtype=float), np.array(data["v"], dtype=float),
                 float(data["t"]))


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OutputError("IO_FAILURE", f"cannot write {path}: {exc}") from exc
    return path


class SnapshotSink:
    """Timestepper sink writing ``snapshot_<index>.json`` files into a directory."""

    def __init__(self, directory, space: DiscreteSpace):
        self.directory = Path(directory)
        self.space = space
        self.count = 0
        try:
            os.makedirs(self.directory, exist_ok=True)
        except OSError as exc:
            raise OutputError("IO_FAILURE", f"cannot create {directory}: {exc}") from exc

    def snapshot(self, state: State):
        write_snapshot(self.directory / f"snapshot_{self.count:06d}.json", state, self.space)
        self.count += 1
