import numpy as np
import pytest
from hypothesis import given, strategies as st

from dimbie.cli import ConfigError, ResultTable, fit_slope, load_config, main, read_table

GREENS = """
[experiment]
kind = greens-identity
[geometry]
shape = kite2d
M = 8, 16, 32
[pde]
kind = laplace
[quadrature]
p = 3
[output]
dir = out
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- fit_slope -------------------------------------------------------------------

def test_fit_slope_exact_power():
    h = 2.0 ** -np.arange(5)
    assert fit_slope(h, 3 * h ** 2) == pytest.approx(2.0, abs=1e-12)


def test_fit_slope_excludes_zero_rows():
    h = 2.0 ** -np.arange(5)
    e = h ** 3
    e[2] = 0.0
    assert fit_slope(h, e) == pytest.approx(3.0, abs=1e-12)


def test_fit_slope_uses_last_four_rows():
    h = 2.0 ** -np.arange(6)
    e = np.r_[h[:2] ** 1, h[2:] ** 4]
    assert fit_slope(h, e) == pytest.approx(4.0, abs=1e-12)


def test_fit_slope_needs_three_rows():
    with pytest.raises(ValueError, match="at least 3"):
        fit_slope([1.0, 0.5, 0.25], [1.0, 0.0, 0.1])


@given(st.floats(0.5, 8.0), st.floats(1e-3, 1e3))
def test_fit_slope_recovers_power(q, c):
    h = 2.0 ** -np.arange(4)
    assert fit_slope(h, c * h ** q) == pytest.approx(q, abs=1e-9)


# -- configuration -------------------------------------------------------------------

def test_load_config(tmp_path):
    cfg = load_config(write(tmp_path, GREENS))
    assert cfg.kind == "greens-identity" and cfg.pde.kind == "laplace" and cfg.dim == 2
    assert cfg.M == [8, 16, 32] and cfg.orders == [3]
    assert cfg.out_dir == tmp_path / "out"


@pytest.mark.parametrize("edit,key", [
    (("kind = laplace", "kind = maxwell"), "[pde] kind"),
    (("M = 8, 16, 32", "M = 8, eight"), "[geometry] M"),
    (("p = 3", "p = 3.5"), "[quadrature] p"),
    (("shape = kite2d", "shape = blob2d"), "[geometry] shape"),
    (("[output]", "[output]\ncolour = red"), "[output] colour"),
    (("kind = greens-identity", "kind = everything"), "[experiment] kind"),
    (("kind = greens-identity", "kind = cfie-dirichlet"), "[pde] kind"),
])
def test_config_errors_name_the_key(tmp_path, capsys, edit, key):
    path = write(tmp_path, GREENS.replace(*edit))
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        load_config(path)
    assert main(["validate", str(path)]) == 2
    assert key in capsys.readouterr().err


def test_missing_required_key(tmp_path):
    with pytest.raises(ConfigError, match=r"\[pde\] kind"):
        load_config(write(tmp_path, GREENS.replace("kind = laplace", "")))


def test_missing_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nothing.ini")
    text = GREENS.replace("shape = kite2d\nM = 8, 16, 32", "mesh = absent.msh")
    with pytest.raises(ConfigError, match=r"\[geometry\] mesh"):
        load_config(write(tmp_path, text))


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, GREENS))]) == 0
    assert "ok" in capsys.readouterr().out


# -- tables and runs ---------------------------------------------------------------------

def test_table_round_trip(tmp_path):
    tab = ResultTable(["N", "E"], metadata={"slope": 1 / 3})
    tab.add(N=10, E=0.1)
    tab.add(N=5, E=np.pi)
    tab.sort("N")
    tab.write(tmp_path / "t.csv")
    back = read_table(tmp_path / "t.csv")
    assert back.columns == ["N", "E"]
    assert back.column("N").tolist() == [5, 10]
    assert back.column("E")[0] == np.pi  # 17 significant digits survive
    assert float(back.metadata["slope"]) == 1 / 3


def test_run_greens_identity(tmp_path, capsys):
    path = write(tmp_path, GREENS)
    assert main(["--threads", "1", "run", str(path)]) == 0
    out = capsys.readouterr().out.split()
    assert len(out) == 1
    tab = read_table(out[0])
    assert tab.column("N").tolist() == sorted(tab.column("N"))
    assert float(tab.metadata["slope_E1"]) == pytest.approx(fit_slope(tab.column("h"), tab.column("E1")))
    assert float(tab.metadata["slope_E1"]) > 3
    for key in ("pde.kind", "quadrature.p", "interpolant.t", "interpolant.L", "geometry.M", "version"):
        assert key in tab.metadata


def test_single_thread_runs_are_identical(tmp_path, capsys):
    path = write(tmp_path, GREENS)
    tables = []
    for _ in range(2):
        assert main(["--threads", "1", "run", str(path)]) == 0
        file = capsys.readouterr().out.split()[0]
        lines = open(file).read().splitlines()
        tables.append(lines)
    a, b = tables
    # every byte except the wall-time column
    cols = [l for l in a if not l.startswith("#")][0].split(",")
    wt = cols.index("wall_time")
    strip = lambda ls: [",".join(v for i, v in enumerate(l.split(",")) if l.startswith("#") or i != wt) for l in ls]
    assert strip(a) == strip(b)


def test_spectrum_run(tmp_path, capsys):
    text = """
[experiment]
kind = spectrum
[geometry]
shape = circle2d
M = 64
[pde]
kind = helmholtz
omega = 6.283185307179586
[quadrature]
p = 4
[output]
dir = out
"""
    assert main(["run", str(write(tmp_path, text))]) == 0
    tab = read_table(capsys.readouterr().out.split()[0])
    assert len(tab.rows) == 256
    assert float(tab.metadata["fraction_within_half"]) >= 0.9


def test_list_commands(capsys):
    assert main(["list-shapes"]) == 0
    assert "kite2d" in capsys.readouterr().out
    assert main(["list-rules"]) == 0
    assert "Lebedev" in capsys.readouterr().out
