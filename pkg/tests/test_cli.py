"""Command-line interface: file formats, exit codes, and the compare report."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from igwvmp import cli, tlmm
from igwvmp.cli import CommandError, density_accuracy, main, read_data_csv, write_data_csv
from igwvmp.distributions import (
    Graph,
    MoonRockParams,
    NaturalIGW,
    igw_from_natural,
    igw_to_natural,
    CommonIGW,
)


@pytest.fixture(scope="module")
def small_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "small.csv"
    rc = main(["simulate", "--output", str(path), "--seed", "5", "--m", "6", "--n-per-group", "10"])
    assert rc == 0
    return path


@pytest.fixture(scope="module")
def vmp_json(small_csv, tmp_path_factory):
    path = tmp_path_factory.mktemp("cli_vmp") / "fit.json"
    rc = main(["fit-vmp", "--input", str(small_csv), "--output", str(path)])
    assert rc == 0
    return json.loads(path.read_text())


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_default_row_count(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["simulate", "--output", str(path), "--seed", "0"]) == 0
    rows = path.read_text().strip().splitlines()
    assert rows[0] == "group,y,x1"
    assert len(rows) == 1 + 300


def test_simulate_deterministic(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    main(["simulate", "--output", str(a), "--seed", "3", "--m", "4", "--n-per-group", "5"])
    main(["simulate", "--output", str(b), "--seed", "3", "--m", "4", "--n-per-group", "5"])
    main(["simulate", "--output", str(c), "--seed", "4", "--m", "4", "--n-per-group", "5"])
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_simulate_micro_rows(tmp_path):
    path = tmp_path / "micro.csv"
    assert main(["simulate", "--output", str(path), "--m", "1", "--n-per-group", "2"]) == 0
    assert len(path.read_text().strip().splitlines()) == 3


def test_csv_round_trip(tmp_path):
    data, _ = tlmm.simulate(seed=9, n_groups=5, group_size=7)
    path = tmp_path / "rt.csv"
    write_data_csv(path, data)
    back = read_data_csv(path)
    assert np.array_equal(back.y, data.y)
    assert np.array_equal(back.x, data.x)
    assert np.array_equal(back.group, data.group)


# ---------------------------------------------------------------------------
# CSV validation
# ---------------------------------------------------------------------------


def test_read_csv_names_bad_line(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("group,y,x1\n0,1.0,2.0\nzero,3.0,4.0\n")
    with pytest.raises(CommandError, match="line 3"):
        read_data_csv(path)


def test_read_csv_wrong_header(tmp_path):
    path = tmp_path / "hdr.csv"
    path.write_text("group,y\n0,1.0\n")
    with pytest.raises(CommandError, match="line 1"):
        read_data_csv(path)


def test_read_csv_field_count(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text("group,y,x1\n0,1.0\n")
    with pytest.raises(CommandError, match="line 2"):
        read_data_csv(path)


def test_validation_exit_codes(tmp_path, capsys):
    out = tmp_path / "o.json"
    bad = tmp_path / "bad.csv"
    bad.write_text("group,y,x1\n0,1.0,nan?\n")
    assert main(["fit-vmp", "--input", str(bad), "--output", str(out)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["fit-vmp", "--input", str(tmp_path / "none.csv"), "--output", str(out)]) == 2
    capsys.readouterr()


def test_scale_list_validation(small_csv, tmp_path, capsys):
    out = tmp_path / "o.json"
    args = ["fit-vmp", "--input", str(small_csv), "--output", str(out)]
    assert main(args + ["--s-Sigma", "1,2,3"]) == 2
    assert main(args + ["--s-Sigma", "1;2"]) == 2
    assert main(args + ["--design", "intercept", "--s-Sigma", "1,2"]) == 2
    capsys.readouterr()


# ---------------------------------------------------------------------------
# fit-vmp
# ---------------------------------------------------------------------------


def test_fit_vmp_schema(vmp_json):
    d = vmp_json
    assert d["method"] == "vmp"
    assert d["converged"] is True
    assert set(d) >= {"beta_u", "sigma2", "Sigma", "upsilon", "nu_density", "names", "iterations"}
    k = 2 + 2 * 6
    assert len(d["names"]) == k
    assert len(d["beta_u"]["mean"]) == k
    assert np.asarray(d["beta_u"]["cov"]).shape == (k, k)
    assert len(d["nu_density"]["grid"]) == 401
    assert d["Sigma"]["kappa"] == pytest.approx(d["Sigma"]["xi"] - 2 + 1)


def test_fit_vmp_json_matches_in_process(small_csv, vmp_json):
    data = read_data_csv(small_csv)
    fit = tlmm.fit(data)
    s = fit.summary
    assert np.array_equal(np.asarray(vmp_json["beta_u"]["mean"]), s.coefficient_mean)
    assert np.array_equal(np.asarray(vmp_json["Sigma"]["Lambda"]), s.variance.Lambda)
    assert vmp_json["sigma2"]["lambda"] == s.noise_lambda


def test_fit_vmp_json_regenerates_common(vmp_json):
    d = vmp_json
    igw = CommonIGW(Graph.FULL, d["Sigma"]["xi"], np.asarray(d["Sigma"]["Lambda"]))
    back = igw_from_natural(igw_to_natural(igw))
    assert back.xi == pytest.approx(d["Sigma"]["xi"], abs=1e-10)
    assert np.allclose(back.Lambda, d["Sigma"]["Lambda"], atol=1e-10)
    # scalar chains through the stacked wire encoding
    eta = np.array([-(d["sigma2"]["delta"] + 2.0) / 2.0, -d["sigma2"]["lambda"] / 2.0])
    assert -2.0 * eta[0] - 2.0 == pytest.approx(d["sigma2"]["delta"], abs=1e-10)
    assert -2.0 * eta[1] == pytest.approx(d["sigma2"]["lambda"], abs=1e-10)
    ups = MoonRockParams.from_vector(
        np.array([d["upsilon"]["alpha"], -d["upsilon"]["beta"]])
    )
    assert ups.alpha == pytest.approx(d["upsilon"]["alpha"], abs=1e-10)
    assert ups.beta == pytest.approx(d["upsilon"]["beta"], abs=1e-10)


def test_fit_vmp_not_converged(small_csv, tmp_path, capsys):
    out = tmp_path / "nc.json"
    rc = main(["fit-vmp", "--input", str(small_csv), "--output", str(out), "--max-iters", "3"])
    assert rc == 3
    d = json.loads(out.read_text())
    assert d["converged"] is False
    assert d["iterations"] == 3
    capsys.readouterr()


# ---------------------------------------------------------------------------
# fit-mcmc
# ---------------------------------------------------------------------------


def test_fit_mcmc_schema(small_csv, tmp_path):
    out = tmp_path / "m.json"
    rc = main(
        ["fit-mcmc", "--input", str(small_csv), "--output", str(out),
         "--warmup", "150", "--kept", "500", "--seed", "2"]
    )
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["method"] == "mcmc"
    assert d["iterations"] == 650
    assert d["sigma2"]["delta"] > 0 and d["sigma2"]["lambda"] > 0
    assert d["Sigma"]["kappa"] == pytest.approx(d["Sigma"]["xi"] - 2 + 1)
    assert d["Sigma"]["xi"] > 4  # moment matching keeps E(Sigma) finite
    assert d["upsilon"]["beta"] > d["upsilon"]["alpha"] >= 0
    assert len(d["nu_density"]["grid"]) == len(d["nu_density"]["values"]) == 401
    expected = set(d["names"]) | {"sigma", "sigma1", "sigma2", "rho", "nu"}
    assert set(d["split_half_z"]) == expected


# ---------------------------------------------------------------------------
# accuracy score
# ---------------------------------------------------------------------------


def test_accuracy_of_density_against_itself_is_100():
    grid = np.linspace(-5, 5, 401)
    q = np.exp(-0.5 * grid**2) / np.sqrt(2 * np.pi)
    assert density_accuracy(grid, q, q) == 100.0


def test_accuracy_of_disjoint_densities_is_zero():
    grid = np.linspace(-12, 12, 2001)
    a = np.exp(-0.5 * ((grid + 8) / 0.5) ** 2) / (0.5 * np.sqrt(2 * np.pi))
    b = np.exp(-0.5 * ((grid - 8) / 0.5) ** 2) / (0.5 * np.sqrt(2 * np.pi))
    assert density_accuracy(grid, a, b) == pytest.approx(0.0, abs=1e-6)


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def compare_run(small_csv, tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("cli_cmp")
    out = out_dir / "report.json"
    rc = main(
        ["compare", "--input", str(small_csv), "--output", str(out),
         "--warmup", "150", "--kept", "600", "--seed", "11"]
    )
    assert rc == 0
    return out_dir, json.loads(out.read_text())


def test_compare_parameter_rows(compare_run):
    _, report = compare_run
    names = set(report["parameters"])
    assert names == {
        "beta0", "beta1", "u[1,0]", "u[1,1]", "u[2,0]", "u[2,1]",
        "sigma", "sigma1", "sigma2", "rho", "nu",
    }
    for row in report["parameters"].values():
        assert 0.0 < row["accuracy"] <= 100.0
        assert row["vmp_sd"] > 0 and row["mcmc_sd"] > 0


def test_compare_density_files(compare_run):
    out_dir, report = compare_run
    for name, row in report["parameters"].items():
        path = out_dir / row["density_csv"]
        assert path.exists()
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["value", "q_vmp", "q_mcmc"]
        assert len(rows) == 1 + 401
        grid = np.array([float(r[0]) for r in rows[1:]])
        assert np.all(np.diff(grid) > 0)
        if name == "rho":
            assert grid[0] >= -1.0 and grid[-1] <= 1.0


def test_compare_gaussian_limit_beta_accuracy(tmp_path):
    # near-Gaussian response: the variational posterior for beta is close
    # to exact, so the overlap with the sampler should be high
    data, _ = tlmm.simulate(seed=17, n_groups=20, group_size=15, df=80.0)
    path = tmp_path / "g.csv"
    write_data_csv(path, data)
    out = tmp_path / "report.json"
    rc = main(
        ["compare", "--input", str(path), "--output", str(out),
         "--max-iters", "2500", "--warmup", "500", "--kept", "2500", "--seed", "4"]
    )
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["parameters"]["beta0"]["accuracy"] > 95.0
    assert report["parameters"]["beta1"]["accuracy"] > 95.0


def test_compare_intercept_design(tmp_path):
    path = tmp_path / "i.csv"
    main(["simulate", "--output", str(path), "--seed", "8", "--m", "6",
          "--n-per-group", "12", "--design", "intercept"])
    out = tmp_path / "r.json"
    rc = main(
        ["compare", "--input", str(path), "--output", str(out), "--design", "intercept",
         "--warmup", "150", "--kept", "500", "--seed", "3"]
    )
    assert rc == 0
    names = set(json.loads(out.read_text())["parameters"])
    assert names == {"beta0", "beta1", "u[1,0]", "u[2,0]", "sigma", "sigma1", "nu"}


# ---------------------------------------------------------------------------
# packaging
# ---------------------------------------------------------------------------


def test_console_script(tmp_path):
    path = tmp_path / "s.csv"
    proc = subprocess.run(
        ["igwvmp", "simulate", "--output", str(path), "--m", "1", "--n-per-group", "2"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert path.exists()


def test_module_invocation_help():
    proc = subprocess.run(
        [sys.executable, "-m", "igwvmp.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    for word in ("simulate", "fit-vmp", "fit-mcmc", "compare"):
        assert word in proc.stdout
