"""Run configuration with case-study defaults and layered overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import InvalidSpec
from .graph import GraphSpec
from .risk import RiskParams

DEFAULT_N = 20
DEFAULT_TAU = 0.05
DEFAULT_B = 0.01
DEFAULT_Y_F = 4.0


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs; ``graph`` is None until a topology is given."""

    graph: GraphSpec | None = None
    tau: float = DEFAULT_TAU
    b: float = DEFAULT_B
    c: float = 4.0
    alpha: float = 1000.0
    epsilon: float = 0.1
    y_f: float = DEFAULT_Y_F
    seed: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def risk(self) -> RiskParams:
        return RiskParams(self.c, self.alpha, self.epsilon)

    def require_graph(self) -> GraphSpec:
        if self.graph is None:
            raise InvalidSpec("a graph is required: pass --topology and --n (or a config file with a graph)")
        return self.graph

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("graph", "extra")}
        d["graph"] = None if self.graph is None else self.graph.to_dict()
        d.update(self.extra)
        return d


_SCALARS = ("tau", "b", "c", "alpha", "epsilon", "y_f", "seed")
_GRAPH_KEYS = ("n", "topology", "p", "edge_prob", "seed", "weights")


def _graph_from(base: dict[str, Any] | None, overrides: dict[str, Any]) -> GraphSpec | None:
    d = dict(base or {})
    d.update({k: v for k, v in overrides.items() if v is not None})
    if not d:
        return None
    if "topology" not in d or "n" not in d:
        missing = [k for k in ("topology", "n") if k not in d]
        raise InvalidSpec(f"graph is missing {', '.join(missing)}")
    if d["topology"] == "erdos-renyi" and d.get("seed") is None:
        d["seed"] = 0
    return GraphSpec.from_dict(d)


def resolve(file_config: dict[str, Any] | None, flags: dict[str, Any]) -> RunConfig:
    """Merge library defaults < config file < command-line flags.

    ``flags`` holds parsed options, None meaning "not given".  Graph
    fields may sit under a "graph" key or at the top level of the file.
    """
    fc = dict(file_config or {})
    graph_file = dict(fc.pop("graph", None) or {})
    for k in ("n", "topology", "p", "edge_prob", "weights"):
        if k in fc:
            graph_file.setdefault(k, fc.pop(k))
    values: dict[str, Any] = {}
    for k in _SCALARS:
        if k in fc:
            values[k] = fc.pop(k)
        if flags.get(k) is not None:
            values[k] = flags[k]
    graph_flags = {k: flags.get(k) for k in ("n", "topology", "p", "edge_prob")}
    if flags.get("graph_seed") is not None:
        graph_flags["seed"] = flags["graph_seed"]
    try:
        graph = _graph_from(graph_file, graph_flags)
        cfg = RunConfig(graph=graph, **values, extra=fc)
        _ = cfg.risk  # validates c, alpha, epsilon
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpec):
            raise
        raise InvalidSpec(str(exc)) from None
    if cfg.tau < 0 or cfg.b < 0:
        raise InvalidSpec("tau and b must be nonnegative")
    return cfg


def load_config_file(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidSpec(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidSpec("config file must hold a JSON object")
    return data


def with_graph(cfg: RunConfig, graph: GraphSpec) -> RunConfig:
    return replace(cfg, graph=graph)

