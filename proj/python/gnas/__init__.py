"""Python front end for the gnas architecture search toolkit."""

import json

from . import _core
from ._core import ConfigError, DomainError, FormatError, correlation, device_names

__version__ = _core.__version__

__all__ = [
    "ConfigError",
    "DomainError",
    "FormatError",
    "arch_graph",
    "canonicalize",
    "cardinality",
    "config_hash",
    "correlation",
    "device_names",
    "dgcnn_preset",
    "estimate_peak_memory",
    "gen_dataset",
    "latency",
    "latency_breakdown",
    "memory_trace",
    "run_cli",
    "sample_genotype",
    "search",
]


def _text(obj):
    if obj is None:
        return ""
    return obj if isinstance(obj, str) else json.dumps(obj)


def sample_genotype(num_positions=12, seed=0):
    return json.loads(_core.sample_genotype(num_positions, seed))


def canonicalize(genotype):
    return json.loads(_core.canonicalize(_text(genotype)))


def dgcnn_preset():
    return json.loads(_core.dgcnn_preset())


def cardinality(num_positions=12, level="operations"):
    return int(_core.cardinality(num_positions, level))


def estimate_peak_memory(genotype, stats=None):
    return _core.estimate_peak_memory(_text(genotype), _text(stats))


def memory_trace(genotype, stats=None):
    return json.loads(_core.memory_trace(_text(genotype), _text(stats)))


def latency(genotype, device="gpu_like", stats=None):
    return _core.latency(_text(genotype), device, _text(stats))


def latency_breakdown(genotype, device="gpu_like", stats=None):
    return _core.latency_breakdown(_text(genotype), device, _text(stats))


def arch_graph(genotype, stats=None):
    """Adjacency and node-feature matrices of the predictor's input graph."""
    return _core.arch_graph(_text(genotype), _text(stats))


def search(config="", seed=None):
    return json.loads(_core.search(config, seed))


def gen_dataset(config="", count=10, seed=0):
    return [json.loads(line) for line in _core.gen_dataset(config, count, seed).splitlines()]


def config_hash(config=""):
    return _core.config_hash(config)


def run_cli(*args):
    """Runs the command-line tool in process; returns (exit code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])
