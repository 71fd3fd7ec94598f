import numpy as np
import pytest

from hpsadapt import io
from hpsadapt.cli import RunConfig, compare, main, parse_config, read_report, run
from hpsadapt.errors import ConfigError, MismatchError
from hpsadapt.meshtree import Rect, uniform_tree
from hpsadapt.solver import SolutionField


def test_solution_round_trip(tmp_path):
    mesh = uniform_tree(Rect(0, 1, 0, 1), 5, 1)
    rng = np.random.default_rng(0)
    for cplx in (False, True):
        vals = {t: rng.standard_normal((5, 5)) + (1j * rng.standard_normal((5, 5)) if cplx else 0)
                for t in mesh.leaves()}
        io.write_solution(SolutionField(mesh, 5, vals), tmp_path / "s.txt")
        back = io.read_solution(tmp_path / "s.txt")
        assert sorted(back) == mesh.leaves()
        for t, (rect, n, v) in back.items():
            r = mesh.nodes[t].rect
            assert rect == (r.x0, r.x1, r.y0, r.y1) and n == 5
            assert np.array_equal(v, vals[t])


def test_iteration_log_round_trip(tmp_path):
    rows = [{"iter": 1, "n_leaves": 10, "n_marked": 3, "S_div": 1 / 3, "E_rel": 2e-7}]
    io.write_iterations(rows, tmp_path / "it.txt")
    assert io.read_iterations(tmp_path / "it.txt") == rows


def test_key_value_grammar():
    kv = io.parse_key_values("# comment\n\na = 1  # trailing\nb=x y\n")
    assert kv == {"a": ("1", 3), "b": ("x y", 4)}
    with pytest.raises(ConfigError, match=":2:"):
        io.parse_key_values("a = 1\nnonsense\n")
    with pytest.raises(ConfigError, match="twice"):
        io.parse_key_values("a = 1\na = 2\n")


def test_fmt_sci_three_digits():
    assert io.fmt_sci(1.9487e-6) == "1.95e-06"
    assert io.fmt_sci(float("nan")) == "nan"


def test_config_parse_and_validation():
    cfg = parse_config("problem = wave_front\nn_c = 12\nmode = uniform\nuniform_levels = 2\n"
                       "retain_for_update = no\n")
    assert cfg == RunConfig("wave_front", n_c=12, mode="uniform", uniform_levels=2,
                            retain_for_update=False)
    with pytest.raises(ConfigError, match=r"<config>:2: field 'epsilon'"):
        parse_config("problem = wave_front\nepsilon = -1\n")
    with pytest.raises(ConfigError, match=r":2: field 'n_c'"):
        parse_config("problem = wave_front\nn_c = many\n")
    with pytest.raises(ConfigError, match="unknown field 'colour'"):
        parse_config("problem = wave_front\ncolour = red\n")
    with pytest.raises(ConfigError, match="uniform_levels"):
        parse_config("problem = wave_front\nmode = uniform\n")
    with pytest.raises(ConfigError, match="problem"):
        parse_config("n_c = 8\n")


def test_run_writes_round_trippable_files(tmp_path):
    cfg = RunConfig("wave_front", n_c=8, mode="uniform", uniform_levels=1,
                    output_dir=str(tmp_path / "a"))
    rep = run(cfg)
    assert rep.N_f == 4 and rep.reference == "exact"
    files = {f: (tmp_path / "a" / f) for f in ("mesh.txt", "solution.txt", "report.txt", "iterations.txt")}
    assert all(p.exists() for p in files.values())
    assert len(io.read_mesh(files["mesh.txt"])) == 4
    assert len(io.read_solution(files["solution.txt"])) == 4
    back = read_report(files["report.txt"])
    assert back["N_f"] == 4 and back["problem"] == "wave_front"
    assert back["E_rel"] == float(io.fmt_sci(rep.E_rel))


def test_identical_configs_give_identical_exports(tmp_path):
    for d in ("a", "b"):
        run(RunConfig("boundary_layer", alpha=0.1, n_c=8, epsilon=1e-4, output_dir=str(tmp_path / d)))
    for f in ("mesh.txt", "solution.txt", "iterations.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    rows = compare(tmp_path / "a" / "report.txt", tmp_path / "b" / "report.txt")
    deltas = {k: d for k, _, _, d in rows}
    assert deltas["N_f"] == 0 and deltas["R"] == 0 and deltas["E_rel"] == 0


def test_compare_refuses_different_problems(tmp_path):
    io.write_key_values([("problem", "wave_front")], tmp_path / "a.txt")
    io.write_key_values([("problem", "boundary_layer")], tmp_path / "b.txt")
    with pytest.raises(MismatchError):
        compare(tmp_path / "a.txt", tmp_path / "b.txt")


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("problem = wave_front\nepsilon = -1\n")
    assert main(["solve", "--config", str(bad)]) == 2
    assert "epsilon" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.cfg")]) == 2
    good = tmp_path / "good.cfg"
    good.write_text(f"problem = wave_front\nn_c = 8\nmode = uniform\nuniform_levels = 1\n"
                    f"output_dir = {tmp_path / 'o'}\n")
    assert main(["solve", "--config", str(good), "--nc", "6"]) == 0
    out = capsys.readouterr().out
    assert "N_f = 4" in out and "n_c = 6" in out
    cap = tmp_path / "cap.cfg"
    cap.write_text(f"problem = wave_front\nn_c = 6\nepsilon = 1e-2\nmax_iterations = 0\n"
                   f"output_dir = {tmp_path / 'c'}\n")
    assert main(["solve", "-q", "--config", str(cap)]) == 4
    assert "non-convergence" in capsys.readouterr().err
    r = str(tmp_path / "o" / "report.txt")
    assert main(["compare", r, r]) == 0
    assert main(["compare", r, str(tmp_path / "nope.txt")]) == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    cfg = tmp_path / "deep.cfg"
    cfg.write_text(f"problem = boundary_layer\nalpha = 1e-4\nn_c = 6\nmax_depth = 2\n"
                   f"output_dir = {tmp_path / 'd'}\n")
    assert main(["solve", "-q", "--config", str(cfg)]) == 3
    assert "depth-exceeded" in capsys.readouterr().err
