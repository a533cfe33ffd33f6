import math
import statistics

import pytest

from roq.harness import (
    BadAsNumber,
    BadPrefix,
    ConfigErrors,
    ParseError,
    UnknownField,
    cdf_table,
    emit_report,
    generate_rib,
    ingest_rib,
    load_config,
    mesh_config,
    parse_config,
    parse_rib,
    run_bgp_experiment,
    run_ospf_experiment,
    shipped_config,
    summarize,
    triangle_config,
    write_rib,
)
from roq.harness.report import compare, read_summary
from roq.netsim import MS
from roq.prefix import Prefix

MINIMAL_OSPF = """
protocol = "ospf"
[[nodes]]
name = "A"
[[nodes]]
name = "B"
[[links]]
a = "A"
b = "B"
"""


# -- configs ------------------------------------------------------------------

def test_shipped_configs_load():
    tri = load_config(shipped_config("bgp-triangle.conf"))
    assert tri.protocol == "bgp" and tri.transport == "quic"
    assert [n.role for n in tri.nodes] == ["injector", "monitor", "peer", "peer"]
    assert tri.rib.generate == 10_000
    mesh = load_config(shipped_config("ospf-mesh.conf"))
    assert len(mesh.nodes) == 6 and len(mesh.links) == 15
    assert str(mesh.inject_prefix) == "203.0.113.0/24"


def test_defaults_fill_in():
    cfg = parse_config(MINIMAL_OSPF)
    assert cfg.transport == "tcp-like" and cfg.seed == 0 and cfg.time_cap == 300.0
    assert [n.router_id for n in cfg.nodes] == [1, 2]
    assert cfg.links[0].spec.one_way_delay_ms == 10 and cfg.links[0].spec.loss_rate == 0.0


def test_every_problem_is_reported_at_once():
    text = MINIMAL_OSPF.replace('protocol = "ospf"',
                                'protocol = "ospf"\ntransport = "carrier-pigeon"\ncolour = 1\nseed = -4')
    text += '[[links]]\na = "A"\nb = "Z"\nloss_rate = 1.5\n'
    with pytest.raises(ConfigErrors) as info:
        parse_config(text)
    errs = info.value.errors
    where = sorted(getattr(e, "where", "") for e in errs)
    assert where == ["colour", "links[1].b", "links[1].loss_rate", "seed", "transport"]
    assert any(isinstance(e, UnknownField) for e in errs)


def test_toml_syntax_error_carries_line():
    with pytest.raises(ConfigErrors) as info:
        parse_config('protocol = "ospf"\n\nseed = = 3\n')
    (err,) = info.value.errors
    assert isinstance(err, ParseError) and err.line == 3


@pytest.mark.parametrize("snippet,where", [
    ('\n[ospf]\nmode = "delegate-acks"\n', "ospf.mode"),
    ('\n[rib]\ngenerate = 5\n', "rib"),
    ('\n[bgp]\nratio_bound = 2.0\n', "bgp"),
])
def test_cross_field_rules(snippet, where):
    with pytest.raises(ConfigErrors) as info:
        parse_config(MINIMAL_OSPF + snippet)
    assert [e.where for e in info.value.errors] == [where]


def test_bgp_roles_are_checked():
    text = shipped_config("bgp-triangle.conf").read_text().replace('role = "monitor"', 'role = "peer"')
    with pytest.raises(ConfigErrors) as info:
        parse_config(text)
    assert any("monitor" in str(e) for e in info.value.errors)


def test_rib_path_and_generate_are_exclusive(tmp_path):
    text = shipped_config("bgp-triangle.conf").read_text().replace(
        "generate = 10000", 'generate = 10\npath = "x.txt"')
    with pytest.raises(ConfigErrors, match="mutually exclusive"):
        parse_config(text)


def test_relative_rib_path_resolves_against_config_dir(tmp_path):
    text = shipped_config("bgp-triangle.conf").read_text().replace(
        "generate = 10000", 'path = "tables/rib.txt"')
    p = tmp_path / "exp.conf"
    p.write_text(text)
    assert load_config(p).rib.path == tmp_path / "tables" / "rib.txt"


def test_unreadable_config():
    with pytest.raises(ConfigErrors):
        load_config("/nonexistent/config.conf")


# -- route tables ---------------------------------------------------------------

def test_parse_rib_canonicalises_and_skips_comments():
    routes = parse_rib(["# header", "", "10.1.2.3/8 65001 65002  # trailing", "2001:db8::1/32 7"])
    assert routes == [(Prefix.parse("10.0.0.0/8"), (65001, 65002)),
                      (Prefix.parse("2001:db8::/32"), (7,))]
    assert routes.counts == {4: 1, 6: 1}


def test_parse_rib_keeps_first_duplicate():
    routes = parse_rib(["10.0.0.0/8 1", "10.0.0.0/8 2"])
    assert routes == [(Prefix.parse("10.0.0.0/8"), (1,))]


@pytest.mark.parametrize("line,exc", [
    ("10.0.0.0 65001", BadPrefix),
    ("300.0.0.0/8 65001", BadPrefix),
    ("10.0.0.0/33", BadPrefix),
    ("10.0.0.0/8 AS65001", BadAsNumber),
    ("10.0.0.0/8 4294967296", BadAsNumber),
    ("10.0.0.0/8 0", BadAsNumber),
])
def test_parse_rib_errors_name_the_line(line, exc):
    with pytest.raises(exc) as info:
        parse_rib(["10.9.0.0/16 1", line])
    assert info.value.line == 2


def test_generated_table_shape():
    routes = generate_rib(10_000, 42)
    assert len(routes) == 10_000
    assert routes.counts == {4: 8500, 6: 1500}
    assert len({p for p, _ in routes}) == 10_000
    assert all(1 <= len(path) <= 5 for _, path in routes)
    for p, _ in routes:
        assert p == Prefix.parse(str(p))
    assert generate_rib(10_000, 42) == routes
    assert generate_rib(10_000, 43) != routes


def test_generated_table_round_trips_through_text(tmp_path):
    routes = generate_rib(500, 3)
    path = tmp_path / "rib.txt"
    write_rib(routes, path)
    assert ingest_rib(path) == routes


def test_generate_rejects_zero():
    with pytest.raises(ValueError):
        generate_rib(0)


# -- reports --------------------------------------------------------------------

def test_summary_matches_statistics_module():
    lat = [5, 1, 9, 3, 7, 2, 8, 4, 6, 10, 100]
    q = statistics.quantiles(lat, n=100, method="inclusive")
    s = summarize(lat)
    assert s["p10"] == pytest.approx(q[9])
    assert s["p50"] == pytest.approx(statistics.median(lat))
    assert s["p90"] == pytest.approx(q[89])
    assert s["p99"] == pytest.approx(q[98])
    assert s["max"] == 100 and s["mean"] == pytest.approx(statistics.fmean(lat))


def test_cdf_is_empirical_inverse():
    lat = [30, 10, 20, 40, 50]
    table = cdf_table(lat, points=10)
    srt = sorted(lat)
    for value, frac in table:
        assert value == srt[math.ceil(frac * len(lat) - 1e-9) - 1]
    assert table[-1] == (50, 1.0)
    assert [f for _, f in table] == pytest.approx([i / 10 for i in range(1, 11)])


def test_empty_inputs():
    assert summarize([]) == {} and cdf_table([]) == []
    with pytest.raises(ValueError):
        emit_report([], "unused")


def _bgp_files(tmp_path, name, transport="tcp-like"):
    run = run_bgp_experiment(triangle_config(transport, routes=300, seed=9))
    out = tmp_path / name
    emit_report(run.records, out)
    return run, {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_bgp_run_and_report(tmp_path):
    run, files = _bgp_files(tmp_path, "a")
    assert not run.partial and run.missing == 0
    assert run.lower_bound_us == 20 * MS
    assert min(run.latencies()) >= run.lower_bound_us
    assert run.loop_violations == 0
    assert set(files) == {"raw.csv", "summary.csv", "cdf.csv"}
    raw = files["raw.csv"].decode().splitlines()
    assert raw[0] == "prefix,t_injected_us,t_r2_us,t_r3_us,latency_us" and len(raw) == 301
    summary = read_summary(tmp_path / "a")
    assert summary["count"] == 300 and summary["missing"] == 0
    assert summary["p50"] == pytest.approx(statistics.median(run.latencies()))


def test_reports_are_byte_identical_across_runs(tmp_path):
    _, first = _bgp_files(tmp_path, "a", "quic")
    _, second = _bgp_files(tmp_path, "b", "quic")
    assert first == second
    cfg = mesh_config(4, "quic", seed=5)
    for d in ("c", "d"):
        emit_report(run_ospf_experiment(cfg).events, tmp_path / d)
    assert (tmp_path / "c" / "convergence.csv").read_bytes() == \
        (tmp_path / "d" / "convergence.csv").read_bytes()


def test_compare_reports_ratios(tmp_path):
    _bgp_files(tmp_path, "tcp", "tcp-like")
    _bgp_files(tmp_path, "quic", "quic")
    rows = {k: (a, b, r) for k, a, b, r in compare(tmp_path / "tcp", tmp_path / "quic")}
    a, b, r = rows["p50"]
    assert r == pytest.approx(b / a)


def test_ospf_run_records_milestones():
    run = run_ospf_experiment(mesh_config(4, "tcp-like", seed=2))
    names = [e.event for e in run.events]
    assert names[:4] == ["cold_start_converged", "cold_start_quiescent", "prefix_injected", "reconverged"]
    assert run.cold_start_us <= run.events[1].t_us
    assert run.reconvergence_us <= run.reconverge_quiescent_us


def test_ospf_time_cap_gives_partial_run():
    run = run_ospf_experiment(mesh_config(4, "tcp-like", seed=2, time_cap=1.0))
    assert run.partial and run.reason == "TimeCap"
    assert run.events[0].event == "time_cap"
    assert run.cold_start_us is None
