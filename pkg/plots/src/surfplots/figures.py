"""Multi-panel 3D scatter figures from solver CSV field dumps.

Each input CSV (one per time snapshot, schema
``x,y,z,t,u_pred,u_exact,abs_err``) becomes one panel: surface points
scattered in 3D and colored by the chosen column. Scatter matches the
mesh-free character of the data; no triangulation is needed or wanted.

Panels share a color scale when an explicit range is given. Titles show
the snapshot time, plus the relative error whenever the dump carries the
exact solution.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIELD_COLUMNS = ("x", "y", "z", "t", "u_pred", "u_exact", "abs_err")


@dataclass
class FigureSpec:
    """What to render: inputs, color column, viewpoint, range, output."""

    csv_paths: list
    output: str
    color_column: str = "u_pred"
    azim: float = 135.0
    elev: float = 19.47
    color_range: tuple = None
    point_size: float = 2.0
    columns: int = None  # panels per row; default picks a near-square grid


def view_angles(direction):
    """Convert a 3D view direction into (azimuth, elevation) in degrees."""
    x, y, z = (float(v) for v in direction)
    azim = np.degrees(np.arctan2(y, x))
    elev = np.degrees(np.arctan2(z, np.hypot(x, y)))
    return azim, elev


def load_field_csv(path):
    """Read one solver field dump; empty u_exact entries become None."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return {name: None for name in FIELD_COLUMNS} | {
                "_header": list(FIELD_COLUMNS)
            }
        rows = list(reader)
    data = {}
    for name in header:
        idx = header.index(name)
        col = [row[idx] for row in rows]
        if all(v == "" for v in col):
            data[name] = None
        else:
            data[name] = np.array([float(v) for v in col])
    data["_header"] = header
    return data


def relative_error_from_dump(data):
    """Err of the dump itself when the exact solution is present."""
    if data.get("u_exact") is None:
        return None
    denom = float(np.sum(data["u_exact"] ** 2))
    if denom <= 0:
        return None
    return float(
        np.sqrt(np.sum((data["u_pred"] - data["u_exact"]) ** 2) / denom)
    )


def render(spec):
    """Render the figure described by the spec; returns the output path."""
    panels = []
    for path in spec.csv_paths:
        data = load_field_csv(path)
        if spec.color_column not in data["_header"]:
            raise SystemExit(
                f"error: column {spec.color_column!r} missing from {path}"
            )
        panels.append((path, data))

    n = len(panels)
    cols = spec.columns or min(3, max(1, int(np.ceil(np.sqrt(n)))))
    rows = int(np.ceil(n / cols))
    fig = plt.figure(figsize=(4.2 * cols, 3.8 * rows))

    mappable = None
    for i, (path, data) in enumerate(panels):
        ax = fig.add_subplot(rows, cols, i + 1, projection="3d")
        ax.view_init(elev=spec.elev, azim=spec.azim)
        if data["x"] is None or len(np.atleast_1d(data["x"])) == 0:
            print(f"warning: {path} has no data rows; blank panel", file=sys.stderr)
            ax.set_title("empty dump")
            ax.set_axis_off()
            continue
        color = data[spec.color_column]
        if color is None:
            raise SystemExit(f"error: column {spec.color_column!r} empty in {path}")
        kwargs = {}
        if spec.color_range is not None:
            kwargs = {"vmin": spec.color_range[0], "vmax": spec.color_range[1]}
        sc = ax.scatter(
            data["x"], data["y"], data["z"], c=color, s=spec.point_size,
            cmap="viridis", **kwargs,
        )
        mappable = sc
        title = f"Time: {data['t'][0]:g}"
        err = relative_error_from_dump(data)
        if err is not None:
            title += f", Err={err:.6e}"
        ax.set_title(title, fontsize=10)
        ax.set_box_aspect((1, 1, 1))
    if mappable is not None and spec.color_range is not None:
        fig.colorbar(mappable, ax=fig.axes, shrink=0.6, label=spec.color_column)
    else:
        fig.tight_layout()
    fig.savefig(spec.output, dpi=130)
    plt.close(fig)
    return spec.output


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="surfpinn-plot",
        description="Render multi-panel 3D scatter figures from field dumps",
    )
    parser.add_argument("csvs", nargs="+", help="field-dump CSV files, one per panel")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument(
        "--color-column", default="u_pred", choices=["u_pred", "abs_err"]
    )
    parser.add_argument(
        "--view-dir", default=None,
        help="camera direction as X,Y,Z (overrides --azim/--elev)",
    )
    parser.add_argument("--azim", type=float, default=135.0)
    parser.add_argument("--elev", type=float, default=19.47)
    parser.add_argument("--color-range", default=None, help="MIN,MAX shared scale")
    parser.add_argument("--point-size", type=float, default=2.0)
    parser.add_argument("--columns", type=int, default=None)
    args = parser.parse_args(argv)

    azim, elev = args.azim, args.elev
    if args.view_dir is not None:
        azim, elev = view_angles(args.view_dir.split(","))
    color_range = None
    if args.color_range is not None:
        lo, hi = (float(v) for v in args.color_range.split(","))
        color_range = (lo, hi)
    spec = FigureSpec(
        csv_paths=args.csvs,
        output=args.out,
        color_column=args.color_column,
        azim=azim,
        elev=elev,
        color_range=color_range,
        point_size=args.point_size,
        columns=args.columns,
    )
    render(spec)
    print(f"wrote {spec.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
