"""Summary JSON and trajectory CSV files."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, fields
from pathlib import Path

from ..errors import NlspreadError
from ..fbsolver import Trajectory
from .experiments import RunSummary

TIMESERIES_COLUMNS = ("t", "g", "h", "h_rate", "g_rate", "max_u", "mass")
SNAPSHOT_COLUMNS = ("t", "x", "u")


class OutputError(NlspreadError, OSError):
    pass


def fmt(x: float) -> str:
    """Float with 17 significant digits."""
    return format(float(x), ".17g")


def jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None if math.isnan(value) else ("infinite" if value > 0 else "-infinite")
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    return value


def summary_dict(summary: RunSummary) -> dict:
    return {k: jsonable(v) for k, v in asdict(summary).items()}


def read_summary(path) -> RunSummary:
    raw = json.loads(Path(path).read_text())
    names = {f.name for f in fields(RunSummary)}
    if set(raw) != names:
        raise ValueError(f"summary keys {sorted(raw)} do not match RunSummary")
    return RunSummary(**raw)


def write_outputs(summary: RunSummary, traj: Trajectory | None, out_dir) -> list[Path]:
    """Write ``summary.json`` and, with a trajectory, ``timeseries.csv`` and ``snapshots.csv``."""
    d = Path(out_dir)
    written = []
    try:
        d.mkdir(parents=True, exist_ok=True)
        p = d / "summary.json"
        p.write_text(json.dumps(summary_dict(summary), indent=2) + "\n")
        written.append(p)
        if traj is not None:
            p = d / "timeseries.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TIMESERIES_COLUMNS)
                cols = (traj.t, traj.g, traj.h, traj.h_rate, traj.g_rate, traj.max_w, traj.mass)
                for row in zip(*cols):
                    w.writerow([fmt(v) for v in row])
            written.append(p)
            p = d / "snapshots.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(SNAPSHOT_COLUMNS)
                for snap in traj.snapshots:
                    ts = fmt(snap.t)
                    for x, u in zip(snap.x, snap.u):
                        w.writerow([ts, fmt(x), fmt(u)])
            written.append(p)
    except OSError as exc:
        raise OutputError(f"{exc.filename or d}: {exc.strerror}") from None
    return written
