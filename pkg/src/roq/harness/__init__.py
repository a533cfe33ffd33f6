"""Experiment harness: configs, route tables, runners and CSV reports."""

from .config import (
    ConfigError,
    ConfigErrors,
    ExperimentConfig,
    InvalidValue,
    ParseError,
    UnknownField,
    load_config,
    parse_config,
    shipped_config,
)
from .experiments import (
    BgpRecord,
    BgpRun,
    OspfEvent,
    OspfRun,
    SessionFailed,
    mesh_config,
    run_bgp_experiment,
    run_ospf_experiment,
    triangle_config,
)
from .report import cdf_table, emit_report, summarize
from .rib_io import BadAsNumber, BadPrefix, generate_rib, ingest_rib, parse_rib, write_rib

__all__ = [
    "ConfigError", "ConfigErrors", "ExperimentConfig", "InvalidValue", "ParseError", "UnknownField",
    "load_config", "parse_config", "shipped_config", "BgpRecord", "BgpRun", "OspfEvent", "OspfRun",
    "SessionFailed", "mesh_config", "run_bgp_experiment", "run_ospf_experiment", "triangle_config",
    "cdf_table", "emit_report", "summarize", "BadAsNumber", "BadPrefix", "generate_rib",
    "ingest_rib", "parse_rib", "write_rib",
]
