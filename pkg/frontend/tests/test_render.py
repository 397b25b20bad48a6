import shutil
import subprocess
import sys

import pytest

from rasefigs import FigureSpec, SchemaError, render
from rasefigs.cli import main as cli_main


@pytest.fixture(scope="session")
def results_dir(tmp_path_factory):
    """CI-small runs produced through the primary package's CLI."""
    if shutil.which("raselab") is None:
        pytest.skip("raselab CLI not installed")
    out = tmp_path_factory.mktemp("results")
    for figure, shots in (("fig6", "5"), ("fig10", "150")):
        subprocess.run(
            ["raselab", "reproduce", figure, "--out", str(out),
             "--shots", shots, "--seed", "5"],
            check=True, capture_output=True,
        )
    return out


def test_render_fig6_and_fig10(results_dir, tmp_path):
    for figure in ("fig6", "fig10"):
        path = render(FigureSpec(figure_id=figure, input_dir=results_dir), tmp_path)
        assert path.exists()
        assert path.suffix == ".svg"
        assert path.stat().st_size > 1000


def test_rerender_is_byte_idempotent(results_dir, tmp_path):
    spec = FigureSpec(figure_id="fig10", input_dir=results_dir)
    first = render(spec, tmp_path / "a").read_bytes()
    second = render(spec, tmp_path / "b").read_bytes()
    assert first == second


def test_cli_renders(results_dir, tmp_path):
    code = cli_main(["--in", str(results_dir), "--figs", "fig6,fig10",
                     "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "fig6.svg").exists()
    assert (tmp_path / "fig10.svg").exists()


def test_schema_mismatch_lists_columns(tmp_path):
    bad = tmp_path / "fig6_efficiency.csv"
    bad.write_text("gain_db,wrong_column\n1.0,2.0\n")
    spec = FigureSpec(figure_id="fig6", input_dir=tmp_path)
    with pytest.raises(SchemaError) as err:
        render(spec, tmp_path / "out")
    assert "eff_mbe" in str(err.value) and "wrong_column" in str(err.value)
    assert not (tmp_path / "out" / "fig6.svg").exists()


def test_empty_csv_rejected_without_output(tmp_path):
    empty = tmp_path / "fig6_efficiency.csv"
    empty.write_text("gain_db,eff_mbe,eff_ledingham\n")
    spec = FigureSpec(figure_id="fig6", input_dir=tmp_path)
    with pytest.raises(SchemaError, match="no data rows"):
        render(spec, tmp_path / "out")
    assert not (tmp_path / "out").exists() or not list((tmp_path / "out").glob("*.svg"))


def test_unknown_figure_rejected(tmp_path):
    with pytest.raises(SchemaError):
        FigureSpec(figure_id="fig8", input_dir=tmp_path)


def test_cli_bad_input_exit_code(tmp_path):
    code = cli_main(["--in", str(tmp_path), "--figs", "fig6",
                     "--out", str(tmp_path / "o")])
    assert code == 2
