import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from diteration.cli import EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, main, read_config


def _solution(path):
    rows = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    assert rows[0] == "node,h"
    return np.array([float(r.split(",")[1]) for r in rows[1:]])


@pytest.fixture
def graph_files(tmp_path):
    for kind in ("chain", "snake"):
        assert main(["gen", kind, "--out", str(tmp_path / f"{kind}.edges")]) == EXIT_OK
    return tmp_path


class TestGen:
    def test_uniform_file(self, tmp_path, capsys):
        out = tmp_path / "u.edges"
        assert main(["gen", "uniform", "128", "1652", "--seed", "3", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "n 128" and len(lines) == 1 + 1652
        assert "directed_entries=1652" in capsys.readouterr().out

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            main(["gen", "powerlaw", "500", "--seed", "2", "--out", str(tmp_path / name)])
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_bad_args(self, tmp_path, capsys):
        assert main(["gen", "uniform", "3", "50", "--out", str(tmp_path / "x")]) == EXIT_USAGE
        assert main(["gen", "uniform", "--out", str(tmp_path / "x")]) == EXIT_USAGE
        with pytest.raises(SystemExit) as err:
            main(["gen", "hexagon"])
        assert err.value.code == 2


class TestSolve:
    def test_chain(self, graph_files):
        out = graph_files / "sol.csv"
        # the chain file holds weights 0.5, so the linear system is the chain itself
        rc = main(["solve", "--graph", str(graph_files / "chain.edges"), "--system", "linear",
                   "--out", str(out)])
        assert rc == EXIT_OK
        np.testing.assert_allclose(_solution(out), [2.0, 2.0], atol=1e-8)
        hist = (graph_files / "sol.history.csv").read_text().splitlines()
        assert hist[0] == "diffusions,link_ops,residual"

    def test_epsilon_one_trivial(self, graph_files, capsys):
        rc = main(["solve", "--graph", str(graph_files / "chain.edges"), "--system", "linear",
                   "--b-value", "0.5", "--epsilon", "1", "--out", str(graph_files / "s.csv")])
        assert rc == EXIT_OK
        assert "diffusions=0" in capsys.readouterr().out

    def test_snake_all_fails(self, graph_files):
        out = graph_files / "snake.csv"
        rc = main(["solve", "--graph", str(graph_files / "snake.edges"), "--system", "eigen",
                   "--mode", "all", "--strategy", "explicit", "--sequence", "1,2,0,3,4",
                   "--epsilon", "1e-6", "--max-diffusions", "100000", "--out", str(out)])
        assert rc == EXIT_NOT_CONVERGED
        assert out.read_text().startswith("# partial: status=budget")

    def test_snake_negative(self, graph_files):
        out = graph_files / "snake.csv"
        rc = main(["solve", "--graph", str(graph_files / "snake.edges"), "--system", "eigen",
                   "--strategy", "max", "--out", str(out)])
        assert rc == EXIT_OK
        np.testing.assert_allclose(_solution(out), [0.2, 0.1, 0.1, 0.1, 0.1], atol=1e-9)

    def test_byte_identical(self, tmp_path):
        outs = []
        for name in ("a.csv", "b.csv"):
            main(["solve", "--n", "64", "--links", "400", "--strategy", "cyc",
                  "--out", str(tmp_path / name)])
            outs.append((tmp_path / name).read_bytes()
                        + (tmp_path / name.replace(".csv", ".history.csv")).read_bytes())
        assert outs[0] == outs[1]

    def test_usage_errors(self, tmp_path):
        assert main(["solve", "--graph", str(tmp_path / "missing")]) == EXIT_USAGE
        assert main(["solve", "--strategy", "explicit", "--out",
                     str(tmp_path / "x.csv")]) == EXIT_USAGE


class TestSimulate:
    def test_outputs_and_determinism(self, tmp_path):
        blobs = []
        for run_id in ("a", "b"):
            out = tmp_path / f"{run_id}.csv"
            rc = main(["simulate", "--n", "64", "--links", "400", "--k", "4",
                       "--delay-bound", "50", "--exchange-period", "3", "--out", str(out)])
            assert rc == EXIT_OK
            blobs.append(b"".join((tmp_path / f"{run_id}{suffix}").read_bytes() for suffix in
                                  (".csv", ".exchange.csv", ".history.csv", ".ledger.csv")))
        assert blobs[0] == blobs[1]
        ex = (tmp_path / "a.exchange.csv").read_text().splitlines()[0]
        assert ex == "event,clock,src,dst,mass,send_clock,deliver_clock"

    def test_matches_solve(self, tmp_path):
        main(["solve", "--n", "64", "--links", "400", "--out", str(tmp_path / "s.csv")])
        main(["simulate", "--n", "64", "--links", "400", "--k", "8", "--delay-bound", "500",
              "--out", str(tmp_path / "d.csv")])
        diff = np.abs(_solution(tmp_path / "s.csv") - _solution(tmp_path / "d.csv")).sum()
        assert diff < 1e-7

    def test_config_file_and_override(self, tmp_path, capsys):
        cfg = tmp_path / "run.conf"
        cfg.write_text("# sample\nk = 4\ndelay-bound = 10\nn=64\nlinks = 400\nrebalance = yes\n"
                       "speed = 4,1,1,1\nrebalance_window = 2000\n")
        rc = main(["simulate", "--config", str(cfg), "--k", "4", "--out", str(tmp_path / "o.csv")])
        assert rc == EXIT_OK
        assert "transfers=" in capsys.readouterr().out
        bad = tmp_path / "bad.conf"
        bad.write_text("colour = red\n")
        with pytest.raises(SystemExit):
            main(["simulate", "--config", str(bad)])

    def test_read_config(self, tmp_path):
        p = tmp_path / "c"
        p.write_text("a-b = 1\n\n c = x y # trailing\n")
        assert read_config(p) == {"a_b": "1", "c": "x y"}


def test_bench_command(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--n", "32", "--links", "160", "--ks", "1,2",
                 "--out", str(out)]) == EXIT_OK
    rows = out.read_text().splitlines()
    assert rows[0] == "method,K,makespan_cycles,normalized_speed"
    assert len(rows) == 1 + 5 * 2
    for suffix in (".ideal.csv", ".ledger.csv", ".report.txt"):
        assert (tmp_path / f"bench{suffix}").exists()
    first = out.read_bytes()
    main(["bench", "--n", "32", "--links", "160", "--ks", "1,2", "--out", str(out)])
    assert out.read_bytes() == first
    assert "DI+COST" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "diteration", "--help"], capture_output=True,
                       text=True, check=False)
    assert r.returncode == 0
    for cmd in ("gen", "solve", "simulate", "bench"):
        assert cmd in r.stdout
