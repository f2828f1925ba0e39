"""Result files: JSON documents, CSV tables, gnuplot scripts and a hashed manifest.

File names depend only on the stem, so the same inputs always produce the
same files with the same hashes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

from src.auction.errors import AuctionError, ValidationFailure
from src.auction.filippov import ContinuousTrajectory, Segment
from src.auction.rational import fmt, fmt_vec, to_q, to_vec
from src.auction.semilinear import ValueGrid

FORMATS = ("json", "csv")


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return fmt(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "model_dump"):
        return _jsonable(obj.model_dump())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def rows_to_csv(rows: Sequence[Dict[str, Any]]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    fields = list(rows[0].keys())
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fields})
    return buf.getvalue()


def _cell(value: Any) -> str:
    if isinstance(value, Fraction):
        return fmt(value)
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return "" if value is None else str(value)


def grid_to_csv(grid: ValueGrid) -> str:
    """Matrix with the first axis down the rows; header row and column hold the axes."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([""] + fmt_vec(grid.axes[1]))
    for x, row in zip(grid.axes[0], grid.matrix()):
        writer.writerow([fmt(x)] + [fmt(v) for v in row])
    return buf.getvalue()


def grid_to_dat(grid: ValueGrid) -> str:
    """Float rendering of the grid for plotting: one ``p1 p2 value`` line per sample, blank line per row."""
    lines = []
    for x, row in zip(grid.axes[0], grid.matrix()):
        for y, val in zip(grid.axes[1], row):
            lines.append(f"{float(x):.10g} {float(y):.10g} {float(val):.10g}")
        lines.append("")
    return "\n".join(lines) + "\n"


def gnuplot_script(grid: ValueGrid, data_file: str) -> str:
    title = f"{grid.kind} for bid ({','.join(str(x) for x in grid.k)})"
    return "\n".join(
        [
            f"set title '{title}'",
            "set xlabel 'p1'",
            "set ylabel 'p2'",
            "set zlabel 'value'",
            "set hidden3d",
            f"splot '{data_file}' using 1:2:3 with lines notitle",
            "",
        ]
    )


def _write(out_dir: str, name: str, text: str) -> Dict[str, Any]:
    path = os.path.join(out_dir, name)
    data = text.encode("utf-8")
    with open(path, "wb") as f:
        f.write(data)
    return {"name": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}


def emit_report(
    stem: str,
    results: Dict[str, Any],
    fmt_: str = "json",
    out_dir: str = "out",
    rows: Optional[Sequence[Dict[str, Any]]] = None,
    grid: Optional[ValueGrid] = None,
) -> Dict[str, Any]:
    """Write ``stem.json`` (plus ``stem.csv`` for tables and ``stem.gp`` for grids) and ``manifest.json``."""
    if fmt_ not in FORMATS:
        raise ValidationFailure(f"unknown format {fmt_!r}", "format")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise AuctionError(f"cannot create output directory {out_dir!r}: {exc.strerror}") from None
    if not os.access(out_dir, os.W_OK):
        raise AuctionError(f"output directory {out_dir!r} is not writable")

    files: List[Dict[str, Any]] = [_write(out_dir, f"{stem}.json", dumps(results))]
    if fmt_ == "csv" and rows is not None:
        files.append(_write(out_dir, f"{stem}.csv", rows_to_csv(rows)))
    if grid is not None and len(grid.axes) == 2:
        files.append(_write(out_dir, f"{stem}.matrix.csv", grid_to_csv(grid)))
        files.append(_write(out_dir, f"{stem}.dat", grid_to_dat(grid)))
        files.append(_write(out_dir, f"{stem}.gp", gnuplot_script(grid, f"{stem}.dat")))
    manifest = {"stem": stem, "files": sorted(files, key=lambda f: f["name"])}
    _write(out_dir, "manifest.json", dumps(manifest))
    return manifest


def load_trajectory(path: str) -> ContinuousTrajectory:
    """Reload a trajectory document written by ``emit_report``."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    doc = doc.get("trajectory", doc)
    segs = [
        Segment(
            to_q(s["t0"]),
            to_q(s["t1"]),
            to_vec(s["start"]),
            to_vec(s["velocity"]),
            tuple(tuple(d) for d in s["label"]),
            s["mode"],
        )
        for s in doc["segments"]
    ]
    return ContinuousTrajectory(start=to_vec(doc["start"]), segments=segs, mode=doc["mode"])


def trajectory_problems(traj: ContinuousTrajectory) -> List[str]:
    """Broken continuity, non-monotone motion or velocities outside ``[0, 1]``."""
    problems = []
    point, t = traj.start, Fraction(0)
    for n, seg in enumerate(traj.segments):
        if seg.start != point or seg.t0 != t:
            problems.append(f"segment {n} does not continue the previous one")
        if seg.t1 <= seg.t0:
            problems.append(f"segment {n} has non-positive length")
        if any(u < 0 or u > 1 for u in seg.velocity):
            problems.append(f"segment {n} velocity outside [0, 1]")
        point, t = seg.end, seg.t1
    return problems
