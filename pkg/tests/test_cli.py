import os
import subprocess
import sys

from roq.harness.cli import main
from roq.harness.config import shipped_config


def test_gen_rib(tmp_path, capsys):
    out = tmp_path / "rib.txt"
    assert main(["gen-rib", "--count", "200", "--seed", "4", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 200
    assert "170 IPv4, 30 IPv6" in capsys.readouterr().out


def test_gen_rib_rejects_zero(tmp_path):
    assert main(["gen-rib", "--count", "0", "--out", str(tmp_path / "x")]) == 1


def test_usage_errors_exit_1():
    assert main([]) == 1
    assert main(["bench", "ospf-mesh"]) == 1
    assert main(["bench", "ospf-mesh", "--mode", "native", "--delegate-acks"]) == 1


def test_invalid_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.conf"
    bad.write_text('protocol = "ospf"\ntransport = "smoke"\n')
    assert main(["run", "--config", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "transport" in err and "nodes" in err


def test_bad_rib_file_exits_1(tmp_path):
    rib = tmp_path / "rib.txt"
    rib.write_text("10.0.0.0/8 1\nnot-a-prefix 2\n")
    conf = tmp_path / "exp.conf"
    conf.write_text(shipped_config("bgp-triangle.conf").read_text()
                    .replace("generate = 10000", 'path = "rib.txt"'))
    assert main(["run", "--config", str(conf), "--out", str(tmp_path / "o")]) == 1


def test_bench_ospf_mesh_writes_report(tmp_path, capsys):
    out = tmp_path / "mesh"
    assert main(["bench", "ospf-mesh", "--mode", "quic", "--delegate-acks", "--nodes", "3",
                 "--out", str(out)]) == 0
    assert (out / "convergence.csv").exists()
    assert "cold start" in capsys.readouterr().out


def test_bench_triangle_and_compare(tmp_path, capsys):
    for t in ("tcp", "quic"):
        assert main(["bench", "bgp-triangle", "--transport", t, "--routes", "200",
                     "--out", str(tmp_path / t)]) == 0
    assert main(["compare", str(tmp_path / "tcp"), str(tmp_path / "quic")]) == 0
    assert "p50" in capsys.readouterr().out


def test_time_cap_exits_2_with_partial_output(tmp_path):
    conf = tmp_path / "short.conf"
    conf.write_text(shipped_config("ospf-mesh.conf").read_text().replace("time_cap = 300.0", "time_cap = 2.0"))
    out = tmp_path / "o"
    assert main(["run", "--config", str(conf), "--out", str(out)]) == 2
    assert "time_cap" in (out / "convergence.csv").read_text()


def test_compare_of_missing_dirs_exits_1(tmp_path):
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b")]) == 1


def _roq(args, level):
    env = dict(os.environ, ROQ_LOG=level)
    return subprocess.run([sys.executable, "-m", "roq.harness.cli", *args], env=env,
                          capture_output=True, text=True, timeout=120)


def test_log_level_comes_from_environment(tmp_path):
    args = ["bench", "ospf-mesh", "--mode", "native", "--nodes", "2", "--out", str(tmp_path / "o")]
    loud = _roq(args, "debug")
    assert loud.returncode == 0
    assert "DEBUG roq" in loud.stderr
    quiet = _roq(args, "error")
    assert quiet.returncode == 0 and quiet.stderr == ""
    odd = _roq(args, "shouty")
    assert "unknown ROQ_LOG level" in odd.stderr
