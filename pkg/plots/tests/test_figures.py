import csv

import numpy as np
import pytest

from surfplots.figures import (
    FigureSpec,
    load_field_csv,
    main,
    relative_error_from_dump,
    render,
    view_angles,
)


def write_dump(path, n=200, t=0.5, with_exact=True, torus=False, seed=0):
    rng = np.random.default_rng(seed)
    if torus:
        theta = rng.uniform(0, 2 * np.pi, n)
        v = rng.uniform(0, 2 * np.pi, n)
        arm = 1.0 + 0.25 * np.cos(v)
        pts = np.column_stack(
            [arm * np.cos(theta), arm * np.sin(theta), 0.25 * np.sin(v)]
        )
    else:
        pts = rng.standard_normal((n, 3))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
    pred = np.sin(3 * pts[:, 0]) + pts[:, 2] * t
    exact = pred + 0.01 * rng.standard_normal(n)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "z", "t", "u_pred", "u_exact", "abs_err"])
        for i in range(n):
            row = [repr(float(v)) for v in (*pts[i], t, pred[i])]
            if with_exact:
                row += [repr(float(exact[i])), repr(abs(float(pred[i] - exact[i])))]
            else:
                row += ["", ""]
            writer.writerow(row)
    return path


class TestViewAngles:
    def test_paper_viewpoint(self):
        azim, elev = view_angles((-1, 1, 0.5))
        assert azim == pytest.approx(135.0)
        assert elev == pytest.approx(np.degrees(np.arctan2(0.5, np.sqrt(2))))

    def test_axis_directions(self):
        assert view_angles((1, 0, 0)) == (0.0, 0.0)
        azim, elev = view_angles((0, 0, 1))
        assert elev == pytest.approx(90.0)


class TestLoadDump:
    def test_round_trip(self, tmp_path):
        path = write_dump(tmp_path / "f.csv", n=10)
        data = load_field_csv(path)
        assert len(data["x"]) == 10
        assert data["u_exact"] is not None
        assert relative_error_from_dump(data) > 0

    def test_missing_exact_is_none(self, tmp_path):
        path = write_dump(tmp_path / "f.csv", n=10, with_exact=False)
        data = load_field_csv(path)
        assert data["u_exact"] is None
        assert relative_error_from_dump(data) is None


class TestRender:
    def test_five_panel_torus_paper_viewpoint(self, tmp_path):
        # mirrors the heating-a-torus figure: five snapshots, shared scale,
        # camera direction (-1, 1, 0.5)
        csvs = [
            write_dump(tmp_path / f"fields_t{t}.csv", torus=True, t=t, seed=i)
            for i, t in enumerate((0.0, 0.75, 1.5, 2.25, 3.0))
        ]
        azim, elev = view_angles((-1, 1, 0.5))
        out = tmp_path / "torus.png"
        spec = FigureSpec(
            csv_paths=[str(c) for c in csvs],
            output=str(out),
            azim=azim,
            elev=elev,
            color_range=(0.0, 2.0),
        )
        assert render(spec) == str(out)
        assert out.stat().st_size > 10_000

    def test_four_panel_error_figure(self, tmp_path):
        csvs = [
            write_dump(tmp_path / f"fields_t{t}.csv", t=t, seed=i)
            for i, t in enumerate((0.25, 0.5, 0.75, 1.0))
        ]
        out = tmp_path / "sphere_err.png"
        spec = FigureSpec(
            csv_paths=[str(c) for c in csvs],
            output=str(out),
            color_column="abs_err",
        )
        render(spec)
        assert out.exists()

    def test_missing_column_exits_nonzero(self, tmp_path):
        path = tmp_path / "bad.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "z", "t", "u_pred"])  # no abs_err
            writer.writerow(["0", "0", "1", "0", "1"])
        spec = FigureSpec(
            csv_paths=[str(path)], output=str(tmp_path / "o.png"),
            color_column="abs_err",
        )
        with pytest.raises(SystemExit) as err:
            render(spec)
        assert "abs_err" in str(err.value)

    def test_empty_csv_blank_panel(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerow(
                ["x", "y", "z", "t", "u_pred", "u_exact", "abs_err"]
            )
        out = tmp_path / "o.png"
        code = main([str(path), "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert "blank panel" in capsys.readouterr().err


class TestCli:
    def test_view_dir_flag(self, tmp_path):
        path = write_dump(tmp_path / "f.csv", n=20)
        out = tmp_path / "o.png"
        code = main(
            [str(path), "--out", str(out), "--view-dir=-1,1,0.5",
             "--color-range", "0,1"]
        )
        assert code == 0
        assert out.exists()

    def test_title_carries_err(self, tmp_path):
        # the Err in the title comes from the dump itself
        path = write_dump(tmp_path / "f.csv", n=50)
        data = load_field_csv(path)
        assert relative_error_from_dump(data) == pytest.approx(
            np.sqrt(
                np.sum((data["u_pred"] - data["u_exact"]) ** 2)
                / np.sum(data["u_exact"] ** 2)
            )
        )
