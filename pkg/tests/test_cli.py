import json
import os

import pytest

from netnum.cli import main

ONE_LINK = "0 1 10\n"
DIAMOND = "0 1 40\n0 2 60\n1 3 50\n2 3 30\n1 0 40\n2 0 60\n3 1 50\n3 2 30\n"


@pytest.fixture
def one_link(tmp_path):
    path = tmp_path / "one.txt"
    path.write_text(ONE_LINK)
    return str(path)


@pytest.fixture
def diamond(tmp_path):
    path = tmp_path / "diamond.txt"
    path.write_text(DIAMOND)
    return str(path)


def strip_elapsed(text: str) -> str:
    lines = text.splitlines()
    return "\n".join(",".join(line.split(",")[:-1]) for line in lines)


class TestSolve:
    def test_happy_path_row_count(self, one_link, capsys):
        code = main([
            "solve", "--topology", one_link, "--solver", "agm", "--iters", "40",
            "--alpha", "0", "--xi", "0", "--mu", "2", "--cap-max", "none",
        ])
        out = capsys.readouterr()
        assert code == 0
        lines = out.out.strip().splitlines()
        assert lines[0] == "iter,objective,error,utility,exact_penalty,restart,elapsed_ms"
        assert len(lines) == 41  # header + one row per iteration
        assert "beta_v=0.5" in out.err and "gamma=2" in out.err

    def test_out_file(self, one_link, tmp_path, capsys):
        trace = tmp_path / "trace.csv"
        code = main([
            "solve", "--topology", one_link, "--solver", "pgd", "--iters", "10",
            "--alpha", "0", "--xi", "0", "--cap-max", "none", "--out", str(trace),
        ])
        assert code == 0
        assert len(trace.read_text().splitlines()) == 11
        assert "objective=" in capsys.readouterr().out

    def test_missing_topology_names_flag(self, capsys):
        code = main(["solve", "--solver", "agm", "--iters", "5"])
        assert code == 1
        assert "--topology" in capsys.readouterr().err

    def test_unknown_flag(self, one_link, capsys):
        code = main([
            "solve", "--topology", one_link, "--solver", "agm", "--iters", "5",
            "--bogus", "1",
        ])
        assert code == 1
        assert "--bogus" in capsys.readouterr().err

    def test_expnum_zeros_init(self, one_link, capsys):
        code = main([
            "solve", "--topology", one_link, "--solver", "expnum", "--iters", "5",
            "--init", "zeros",
        ])
        assert code == 1
        assert "--init" in capsys.readouterr().err

    def test_missing_file(self, capsys):
        code = main(["solve", "--topology", "/no/such/file", "--solver", "agm",
                     "--iters", "5"])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_divergent_step_exits_two(self, one_link, capsys):
        code = main([
            "solve", "--topology", one_link, "--solver", "pgd", "--iters", "3",
            "--alpha", "0", "--xi", "0", "--cap-max", "none", "--step", "1e308",
        ])
        assert code == 2
        assert "numerical failure" in capsys.readouterr().err

    def test_explicit_init_vector(self, one_link, capsys):
        code = main([
            "solve", "--topology", one_link, "--solver", "agm", "--iters", "5",
            "--alpha", "0", "--xi", "0", "--cap-max", "none", "--init", "10.0",
        ])
        assert code == 0
        assert "objective=-8.6137056388801092" in capsys.readouterr().err

    def test_deterministic_rerun(self, diamond, capsys):
        argv = [
            "solve", "--topology", diamond, "--solver", "expnum", "--iters", "60",
            "--flows", "12", "--seed", "5",
        ]
        main(argv)
        first = capsys.readouterr()
        main(argv)
        second = capsys.readouterr()
        assert strip_elapsed(first.out) == strip_elapsed(second.out)
        assert first.err == second.err


class TestOracle:
    def test_analytic(self, one_link, capsys):
        code = main(["oracle", "--topology", one_link, "--alpha", "0", "--xi", "0",
                     "--cap-max", "none"])
        out = capsys.readouterr().out
        assert code == 0
        assert "method=analytic" in out and "tolerance=0" in out and "x=10" in out

    def test_grid(self, diamond, capsys):
        code = main(["oracle", "--topology", diamond, "--flows", "2", "--seed", "1",
                     "--method", "grid"])
        out = capsys.readouterr().out
        assert code == 0
        assert "method=grid" in out

    def test_vertex_guard_exit(self, one_link, capsys):
        code = main(["oracle", "--topology", one_link, "--alpha", "0", "--xi", "0",
                     "--flows", "9", "--method", "vertex"])
        assert code == 1
        assert "d <= 8" in capsys.readouterr().err

    def test_no_oracle_applies(self, diamond, capsys):
        code = main(["oracle", "--topology", diamond, "--flows", "6"])
        assert code == 1
        assert "no oracle" in capsys.readouterr().err


class TestCompare:
    def test_fan_out(self, diamond, tmp_path, capsys):
        out = tmp_path / "rep"
        code = main([
            "compare", "--topology", diamond, "--solvers", "pgd,expnum,agm,agm-fr",
            "--iters", "150", "--out", str(out),
        ])
        assert code == 0
        assert sorted(os.listdir(out)) == [
            "agm-fr.csv", "agm.csv", "expnum.csv", "pgd.csv", "report.json",
        ]
        meta = json.loads((out / "report.json").read_text())
        assert [s["label"] for s in meta["solvers"]] == ["pgd", "expnum", "agm", "agm-fr"]

    def test_lp_table_for_throughput_setting(self, one_link, tmp_path, capsys):
        out = tmp_path / "rep"
        code = main([
            "compare", "--topology", one_link, "--solvers", "agm-fr", "--iters", "2000",
            "--alpha", "0", "--xi", "0", "--cap-max", "none", "--reference", "oracle",
            "--out", str(out),
        ])
        assert code == 0
        assert (out / "utility.csv").exists()
        assert "lp_optimum=10" in capsys.readouterr().out

    def test_deterministic_outputs(self, diamond, tmp_path):
        reports = []
        for name in ("a", "b"):
            out = tmp_path / name
            main([
                "compare", "--topology", diamond, "--solvers", "agm,expnum",
                "--iters", "120", "--flows", "10", "--seed", "3", "--out", str(out),
            ])
            files = {}
            for fname in sorted(os.listdir(out)):
                text = (out / fname).read_text()
                if fname.endswith(".csv"):
                    text = strip_elapsed(text)
                files[fname] = text
            reports.append(files)
        assert reports[0] == reports[1]

    def test_unknown_solver_name(self, diamond, capsys):
        code = main(["compare", "--topology", diamond, "--solvers", "warp", "--iters", "5"])
        assert code == 1
        assert "warp" in capsys.readouterr().err

    def test_spec_file(self, diamond, tmp_path, capsys):
        spec = tmp_path / "run.spec"
        spec.write_text(
            f"topology = {diamond}\nsolvers = agm\niters = 80\nalpha = 0\nxi = 0\n"
            f"out = {tmp_path / 'rep'}\n"
        )
        code = main(["compare", "--spec", str(spec)])
        assert code == 0
        meta = json.loads((tmp_path / "rep" / "report.json").read_text())
        assert meta["alpha"] == 0.0
        assert meta["solvers"][0]["iterations"] == 80

    def test_cli_flag_overrides_spec_file(self, diamond, tmp_path):
        spec = tmp_path / "run.spec"
        spec.write_text(f"topology = {diamond}\nsolvers = agm\niters = 80\n")
        out = tmp_path / "rep2"
        code = main(["compare", "--spec", str(spec), "--iters", "33", "--out", str(out)])
        assert code == 0
        meta = json.loads((out / "report.json").read_text())
        assert meta["solvers"][0]["iterations"] == 33

    def test_spec_file_unknown_key(self, diamond, tmp_path, capsys):
        spec = tmp_path / "run.spec"
        spec.write_text("turbo = yes\n")
        code = main(["compare", "--spec", str(spec), "--topology", diamond])
        assert code == 1
        assert "turbo" in capsys.readouterr().err


class TestBench:
    def test_timing_rows(self, diamond, tmp_path, capsys):
        out = tmp_path / "bench"
        code = main([
            "bench", "--topology", diamond, "--solvers", "pgd,agm", "--iters", "5",
            "--flow-counts", "6,12", "--warmup", "2", "--measure", "30",
            "--out", str(out),
        ])
        assert code == 0
        lines = (out / "timing.csv").read_text().splitlines()
        assert lines[0] == "solver,flows,seconds_per_iter"
        assert len(lines) == 5  # 2 solvers x 2 flow counts

    def test_flow_counts_required(self, diamond, capsys):
        code = main(["bench", "--topology", diamond])
        assert code == 1
        assert "--flow-counts" in capsys.readouterr().err

    def test_bad_flow_counts(self, diamond, capsys):
        code = main(["bench", "--topology", diamond, "--flow-counts", "ten"])
        assert code == 1
        assert "flow-counts" in capsys.readouterr().err


class TestHelp:
    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        assert "solve" in capsys.readouterr().out

    def test_no_command(self, capsys):
        assert main([]) == 1
