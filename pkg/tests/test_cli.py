"""End-to-end tests of the command line: simulate | fit | summarize | check."""

import json
import os

import numpy as np
import pytest
import yaml

from conftest import random_params

from lmrj.cli import build_parser, main
from lmrj.io import read_trace, save_params
from lmrj.params import ModelStructure


@pytest.fixture(autouse=True)
def run_in_tmp(tmp_path, monkeypatch):
    """Point cwd and the default output root at the test tmp dir."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("LMRJ_OUT", raising=False)
    return tmp_path


@pytest.fixture(scope="module")
def sim_files(tmp_path_factory):
    """A saved parameter file plus a panel simulated from it via the CLI."""
    root = tmp_path_factory.mktemp("sim")
    pjson = root / "params.json"
    structure = ModelStructure("basic", T=4, levels=(3,))
    params = random_params(structure, 2, np.random.default_rng(11))
    save_params(params, structure, pjson)
    rc = main(["simulate", "--params", str(pjson), "--n", "25",
               "--seed", "3", "--out", str(root)])
    assert rc == 0
    responses = root / "responses.csv"
    assert responses.exists()
    return {"params": pjson, "responses": responses}


def write_config(path, responses, sweeps=150, burn_in=30, seed=7,
                 run=None, grid=None, prior=None, data_extra=None):
    doc = {
        "model": {"variant": "basic", "levels": [3], "T": 4},
        "data": {"responses": str(responses)},
        "sampler": {"sweeps": sweeps, "burn_in": burn_in, "seed": seed},
    }
    if data_extra:
        doc["data"].update(data_extra)
    if prior:
        doc["prior"] = prior
    if run:
        doc["run"] = run
    if grid is not None:
        doc["grid"] = grid
    path.write_text(yaml.safe_dump(doc))
    return path


# -- simulate ----------------------------------------------------------------------


def test_simulate_prints_written_paths(sim_files, tmp_path, capsys):
    out = tmp_path / "sim-out"
    rc = main(["simulate", "--params", str(sim_files["params"]),
               "--n", "6", "--seed", "1", "--out", str(out)])
    assert rc == 0
    captured = capsys.readouterr()
    rpath = out / "responses.csv"
    assert str(rpath) in captured.out
    assert rpath.exists()
    header = rpath.read_text().splitlines()[0]
    assert header.startswith("subject,occasion")


def test_simulate_same_seed_same_bytes(sim_files, tmp_path):
    outs = []
    for name, seed in (("a", 9), ("b", 9), ("c", 10)):
        out = tmp_path / name
        rc = main(["simulate", "--params", str(sim_files["params"]),
                   "--n", "8", "--seed", str(seed), "--out", str(out)])
        assert rc == 0
        outs.append((out / "responses.csv").read_bytes())
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]


def test_simulate_covariate_variant(tmp_path, capsys):
    structure = ModelStructure("covariate", T=3, levels=(2, 2), n_covariates=3)
    params = random_params(structure, 2, np.random.default_rng(4))
    pjson = tmp_path / "cov-params.json"
    save_params(params, structure, pjson)

    rc = main(["simulate", "--params", str(pjson), "--n", "4", "--seed", "2",
               "--out", str(tmp_path / "nope")])
    assert rc == 1
    assert "--covariates" in capsys.readouterr().err

    table = tmp_path / "xvals.csv"
    rows = ["subject,occasion,x1"]
    rng = np.random.default_rng(8)
    for subj in "abcd":
        for occ in (1, 2, 3):
            rows.append(f"{subj},{occ},{rng.normal():.3f}")
    table.write_text("\n".join(rows) + "\n")

    out = tmp_path / "cov-out"
    rc = main(["simulate", "--params", str(pjson), "--n", "4", "--seed", "2",
               "--covariates", str(table), "--out", str(out)])
    assert rc == 0
    assert (out / "responses.csv").exists()
    assert (out / "covariates.csv").exists()


def test_simulate_env_var_sets_default_output(sim_files, tmp_path, monkeypatch):
    envdir = tmp_path / "from-env"
    monkeypatch.setenv("LMRJ_OUT", str(envdir))
    rc = main(["simulate", "--params", str(sim_files["params"]),
               "--n", "5", "--seed", "2"])
    assert rc == 0
    assert (envdir / "responses.csv").exists()


# -- fit ---------------------------------------------------------------------------


def test_fit_writes_all_artifacts(sim_files, tmp_path, capsys):
    cfg = write_config(tmp_path / "run.yaml", sim_files["responses"])
    out = tmp_path / "fit-out"
    rc = main(["fit", "--config", str(cfg), "--out", str(out)])
    assert rc == 0
    captured = capsys.readouterr()

    trace = out / "run.trace"
    for name in ("run.trace", "run.summary.json", "run.tables.txt",
                 "run.occupancy.csv"):
        assert (out / name).exists()
        assert str(out / name) in captured.out
    assert "run: k* = " in captured.out

    doc = json.loads((out / "run.summary.json").read_text())
    assert set(doc["posterior_of_k"]) and "k_star" in doc
    text = (out / "run.tables.txt").read_text()
    assert "MH with fixed k" in text
    assert "Posterior distribution of the number of states" in text
    occ = (out / "run.occupancy.csv").read_text().splitlines()
    assert occ[0] == "sweep,k,fraction"

    loaded = read_trace(trace)
    assert len(loaded) == 150
    assert loaded.meta.structure.variant == "basic"


def test_fit_same_seed_byte_identical(sim_files, tmp_path):
    cfg = write_config(tmp_path / "run.yaml", sim_files["responses"], sweeps=100)
    blobs = []
    for name in ("one", "two"):
        out = tmp_path / name
        assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 0
        blobs.append(((out / "run.trace").read_bytes(),
                      (out / "run.summary.json").read_bytes()))
    assert blobs[0] == blobs[1]

    out = tmp_path / "three"
    assert main(["fit", "--config", str(cfg), "--seed", "99",
                 "--out", str(out)]) == 0
    assert (out / "run.trace").read_bytes() != blobs[0][0]


def test_fit_multiple_chains(sim_files, tmp_path, capsys):
    cfg = write_config(tmp_path / "mc.yaml", sim_files["responses"], sweeps=80,
                       run={"name": "mc", "chains": 2, "seeds": [5, 6]})
    out = tmp_path / "mc-out"
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 0
    for stem in ("mc-chain0", "mc-chain1"):
        assert (out / f"{stem}.trace").exists()
        assert (out / f"{stem}.summary.json").exists()
    a = read_trace(out / "mc-chain0.trace")
    b = read_trace(out / "mc-chain1.trace")
    assert a.meta.sampler["seed"] == 5
    assert b.meta.sampler["seed"] == 6
    capsys.readouterr()


def test_fit_grid_runs_each_cell(sim_files, tmp_path, capsys):
    cfg = write_config(
        tmp_path / "grid.yaml", sim_files["responses"], sweeps=60,
        prior={"k_max": 4},
        grid=[{"name": "flat", "prior": {"trans_rule": "flat"}},
              {"name": "persistent"}])
    out = tmp_path / "grid-out"
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 0
    for cell in ("flat", "persistent"):
        assert (out / cell / "run.trace").exists()
        assert (out / cell / "run.summary.json").exists()
    # same seed, different priors: the two cells are distinct runs
    a = (out / "flat" / "run.trace").read_bytes()
    b = (out / "persistent" / "run.trace").read_bytes()
    assert a != b
    capsys.readouterr()


def test_fit_missing_config_is_user_error(tmp_path, capsys):
    rc = main(["fit", "--config", str(tmp_path / "absent.yaml")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_fit_requires_response_data(sim_files, tmp_path, capsys):
    cfg = tmp_path / "nodata.yaml"
    cfg.write_text(yaml.safe_dump({
        "model": {"variant": "basic", "levels": [3], "T": 4},
        "sampler": {"sweeps": 10},
    }))
    rc = main(["fit", "--config", str(cfg)])
    assert rc == 1
    assert "data.responses" in capsys.readouterr().err


def test_fit_k_init_above_k_max_rejected(sim_files, tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.yaml", sim_files["responses"],
                       prior={"k_max": 2}, run={"k_init": 5})
    rc = main(["fit", "--config", str(cfg)])
    assert rc == 1
    assert "k_init" in capsys.readouterr().err


def test_internal_error_exit_code(sim_files, tmp_path, monkeypatch, capsys):
    from lmrj.errors import ModelError

    def boom(*a, **kw):
        raise ModelError("invariant broken")

    monkeypatch.setattr("lmrj.cli.run_chain", boom)
    cfg = write_config(tmp_path / "run.yaml", sim_files["responses"],
                       sweeps=10, burn_in=0)
    rc = main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "internal error: invariant broken" in capsys.readouterr().err


def test_unexpected_exception_exit_code(sim_files, tmp_path, monkeypatch, capsys):
    def boom(*a, **kw):
        raise RuntimeError("wires crossed")

    monkeypatch.setattr("lmrj.cli.simulate_panel", boom)
    rc = main(["simulate", "--params", str(sim_files["params"]),
               "--n", "3", "--seed", "1", "--out", str(tmp_path)])
    assert rc == 2
    assert "wires crossed" in capsys.readouterr().err


# -- summarize ---------------------------------------------------------------------


@pytest.fixture()
def fitted(sim_files, tmp_path):
    cfg = write_config(tmp_path / "run.yaml", sim_files["responses"],
                       sweeps=120, burn_in=30)
    out = tmp_path / "fit"
    assert main(["fit", "--config", str(cfg), "--out", str(out)]) == 0
    return out / "run.trace"


def test_summarize_artifacts(fitted, tmp_path, capsys):
    out = tmp_path / "sum"
    rc = main(["summarize", "--trace", str(fitted), "--out", str(out)])
    assert rc == 0
    captured = capsys.readouterr()
    for name in ("summary.json", "tables.txt", "occupancy-run.csv"):
        assert (out / name).exists()
        assert str(out / name) in captured.out
    # a single trace still gets the acceptance table
    assert "MH with fixed k" in (out / "tables.txt").read_text()


def test_summarize_default_burn_in_from_trace(fitted, tmp_path, capsys):
    out_default = tmp_path / "d"
    out_explicit = tmp_path / "e"
    out_zero = tmp_path / "z"
    assert main(["summarize", "--trace", str(fitted), "--out", str(out_default)]) == 0
    assert main(["summarize", "--trace", str(fitted), "--burn-in", "30",
                 "--out", str(out_explicit)]) == 0
    assert main(["summarize", "--trace", str(fitted), "--burn-in", "0",
                 "--out", str(out_zero)]) == 0
    capsys.readouterr()
    default = (out_default / "summary.json").read_bytes()
    assert default == (out_explicit / "summary.json").read_bytes()
    assert default != (out_zero / "summary.json").read_bytes()


def test_summarize_pools_chains(sim_files, tmp_path, capsys):
    cfg = write_config(tmp_path / "mc.yaml", sim_files["responses"], sweeps=80,
                       burn_in=20, run={"name": "mc", "chains": 2})
    fit_out = tmp_path / "fit"
    assert main(["fit", "--config", str(cfg), "--out", str(fit_out)]) == 0
    out = tmp_path / "pool"
    rc = main(["summarize",
               "--trace", str(fit_out / "mc-chain0.trace"),
               str(fit_out / "mc-chain1.trace"),
               "--out", str(out)])
    assert rc == 0
    capsys.readouterr()
    assert (out / "summary.json").exists()
    assert (out / "occupancy-mc-chain0.csv").exists()
    assert (out / "occupancy-mc-chain1.csv").exists()
    # acceptance rates are per chain, so the pooled report omits them
    assert "MH with fixed k" not in (out / "tables.txt").read_text()


def test_summarize_rejects_mixed_structures(fitted, tmp_path, capsys):
    from lmrj.io import FileTraceSink
    from lmrj.priors import PriorSpec, sample_prior
    from lmrj.sampler import SamplerConfig, run_chain
    from lmrj.simulate import simulate_panel

    structure = ModelStructure("cutpoint", T=4, levels=(4,))
    rng = np.random.default_rng(3)
    truth = sample_prior(PriorSpec(), 2, structure, rng)
    data = simulate_panel(truth, n=8, seed=5, T=4)
    other = tmp_path / "cut.trace"
    run_chain(data, PriorSpec(), SamplerConfig(sweeps=30, seed=1),
              sample_prior(PriorSpec(), 1, structure, rng),
              structure=structure, sink=FileTraceSink(other))

    rc = main(["summarize", "--trace", str(fitted), str(other),
               "--out", str(tmp_path / "mixed")])
    assert rc == 1
    assert "different model structures" in capsys.readouterr().err


def test_summarize_missing_trace_is_user_error(tmp_path, capsys):
    rc = main(["summarize", "--trace", str(tmp_path / "ghost.trace")])
    assert rc == 1
    assert "cannot read trace file" in capsys.readouterr().err


def test_summarize_burn_in_swallowing_trace_is_user_error(fitted, tmp_path, capsys):
    rc = main(["summarize", "--trace", str(fitted), "--burn-in", "5000",
               "--out", str(tmp_path / "x")])
    assert rc == 1
    assert "burn-in" in capsys.readouterr().err


# -- check -------------------------------------------------------------------------


def test_check_reports_all_passing(capsys):
    rc = main(["check", "--cases", "1", "--prior-sweeps", "0", "--seed", "1"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "checks passed" in out
    assert "FAIL" not in out
    # four variants x (loglik, jacobian, two roundtrips)
    assert out.count("ok") >= 16


# -- parser ------------------------------------------------------------------------


def test_parser_defaults():
    ap = build_parser()
    args = ap.parse_args(["check"])
    assert args.cases == 3 and args.prior_sweeps == 20_000
    args = ap.parse_args(["summarize", "--trace", "a", "b"])
    assert args.trace == ["a", "b"] and args.ordering == "none"
    with pytest.raises(SystemExit):
        ap.parse_args([])
    with pytest.raises(SystemExit):
        ap.parse_args(["fit"])
