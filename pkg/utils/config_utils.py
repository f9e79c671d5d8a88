# utils/config_utils.py

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import yaml

from utils.belief_utils import GPHyperparams, PhenomenonParams
from utils.info_utils import MAX_QUADRATURE_ORDER
from utils.mission_utils import ALGORITHMS

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Kernel presets: MAPF benchmark grids, and rasterized real-world maps (4 cells).
GP_PRESETS = {
    "mapf": {"theta1": 0.4, "theta2": 0.01, "sigma": 0.2, "mean": 1.0},
    "realistic": {"theta1": 1.25, "theta2": 4.0, "sigma": 0.2, "mean": 1.0},
}


class ConfigError(ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class MCTSParams:
    iterations: int = 500
    exploration: float = 1.0
    exhaustive: bool = False
    selection: str = "mean"


@dataclass(frozen=True)
class DiscoveryParams:
    rule: str = "visitation"
    threshold: float = 0.9


@dataclass(frozen=True)
class FieldParams:
    mode: str = "bumps"
    amplitude: float = 1.0


@dataclass(frozen=True)
class SearchParams:
    pruning: bool = True
    condition_h_on_plan: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    map_path: Path
    num_agents: int
    num_phenomena: int
    mission_duration: int
    seed: int = 0
    planning_horizon: int = 2
    comm_range: int = 5
    algorithm: str = "MA-V"
    quadrature_order: int = 5
    max_planned_observations: int = 6
    gp: GPHyperparams = GPHyperparams()
    phenomenon: PhenomenonParams = PhenomenonParams()
    mcts: MCTSParams = MCTSParams()
    discovery: DiscoveryParams = DiscoveryParams()
    field: FieldParams = FieldParams()
    search: SearchParams = SearchParams()
    starts: Optional[tuple] = None

    @property
    def map_name(self):
        return self.map_path.stem

    @property
    def run_id(self):
        return f"{self.name}__{self.algorithm}__seed{self.seed:06d}"

    def with_overrides(self, **changes):
        return replace(self, **changes)


# --- Field readers ---
def _take(mapping, key, kind, prefix, default=None, required=False):
    name = f"{prefix}{key}"
    if key not in mapping:
        if required:
            raise ConfigError(name, "is required")
        return default
    value = mapping[key]
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    if kind is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if kind is bool and not isinstance(value, bool):
        raise ConfigError(name, f"expected true/false, got {value!r}")
    if kind is str and not isinstance(value, str):
        raise ConfigError(name, f"expected a string, got {value!r}")
    return float(value) if kind is float else value


def _check_keys(mapping, allowed, prefix):
    if not isinstance(mapping, dict):
        raise ConfigError(prefix.rstrip(".") or "<root>", f"expected a mapping, got {type(mapping).__name__}")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{prefix}{unknown[0]}", "unknown key")


def _at_least(name, value, minimum):
    if value < minimum:
        raise ConfigError(name, f"must be >= {minimum}, got {value}")
    return value


def _choice(name, value, options):
    if value not in options:
        raise ConfigError(name, f"must be one of {list(options)}, got {value!r}")
    return value


def _gp(section):
    section = section or {}
    _check_keys(section, ("preset", "theta1", "theta2", "sigma", "mean"), "gp.")
    preset = _choice("gp.preset", _take(section, "preset", str, "gp.", "mapf"), GP_PRESETS)
    values = {k: _take(section, k, float, "gp.", GP_PRESETS[preset][k]) for k in ("theta1", "theta2", "sigma", "mean")}
    for key in ("theta1", "theta2"):
        if not values[key] > 0:
            raise ConfigError(f"gp.{key}", f"must be > 0, got {values[key]}")
    _at_least("gp.sigma", values["sigma"], 0.0)
    return GPHyperparams(**values)


def _phenomenon(section):
    section = section or {}
    _check_keys(section, ("u_tilde", "p1", "p2"), "phenomenon.")
    defaults = PhenomenonParams()
    values = {k: _take(section, k, float, "phenomenon.", getattr(defaults, k)) for k in ("u_tilde", "p1", "p2")}
    if not 0.0 <= values["p2"] <= values["p1"] <= 1.0:
        raise ConfigError("phenomenon.p1", f"need 0 <= p2 <= p1 <= 1, got p1={values['p1']}, p2={values['p2']}")
    return PhenomenonParams(**values)


def _mcts(section):
    section = section or {}
    _check_keys(section, ("iterations", "exploration", "exhaustive", "selection"), "mcts.")
    d = MCTSParams()
    return MCTSParams(
        iterations=_at_least("mcts.iterations", _take(section, "iterations", int, "mcts.", d.iterations), 1),
        exploration=_at_least("mcts.exploration", _take(section, "exploration", float, "mcts.", d.exploration), 0.0),
        exhaustive=_take(section, "exhaustive", bool, "mcts.", d.exhaustive),
        selection=_choice("mcts.selection", _take(section, "selection", str, "mcts.", d.selection), ("mean", "max")),
    )


def _discovery(section):
    section = section or {}
    _check_keys(section, ("rule", "threshold"), "discovery.")
    d = DiscoveryParams()
    threshold = _take(section, "threshold", float, "discovery.", d.threshold)
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError("discovery.threshold", f"must lie in [0, 1], got {threshold}")
    return DiscoveryParams(
        rule=_choice("discovery.rule", _take(section, "rule", str, "discovery.", d.rule), ("visitation", "belief")),
        threshold=threshold,
    )


def _field(section):
    section = section or {}
    _check_keys(section, ("mode", "amplitude"), "field.")
    d = FieldParams()
    amplitude = _take(section, "amplitude", float, "field.", d.amplitude)
    if not amplitude > 0:
        raise ConfigError("field.amplitude", f"must be > 0, got {amplitude}")
    return FieldParams(
        mode=_choice("field.mode", _take(section, "mode", str, "field.", d.mode), ("bumps", "gp_prior")),
        amplitude=amplitude,
    )


def _search(section):
    section = section or {}
    _check_keys(section, ("pruning", "condition_h_on_plan"), "search.")
    d = SearchParams()
    return SearchParams(
        pruning=_take(section, "pruning", bool, "search.", d.pruning),
        condition_h_on_plan=_take(section, "condition_h_on_plan", bool, "search.", d.condition_h_on_plan),
    )


def _starts(raw, num_agents):
    if raw is None:
        return None
    if not isinstance(raw, list) or len(raw) != num_agents:
        raise ConfigError("starts", f"expected {num_agents} [row, col] pairs")
    starts = []
    for pair in raw:
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in pair)):
            raise ConfigError("starts", f"expected [row, col] integers, got {pair!r}")
        starts.append((pair[0], pair[1]))
    return tuple(starts)


SCENARIO_KEYS = (
    "schema_version", "name", "map", "num_agents", "num_phenomena", "mission_duration",
    "planning_horizon", "comm_range", "algorithm", "seed", "quadrature_order",
    "max_planned_observations", "gp", "phenomenon", "mcts", "discovery", "field", "search", "starts",
)


def scenario_from_dict(data, base_dir="."):
    _check_keys(data, SCENARIO_KEYS, "")
    version = _take(data, "schema_version", int, "", required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version} (expected {SCHEMA_VERSION})")

    map_path = Path(_take(data, "map", str, "", required=True))
    if not map_path.is_absolute():
        map_path = Path(base_dir) / map_path

    num_agents = _at_least("num_agents", _take(data, "num_agents", int, "", required=True), 1)
    order = _at_least("quadrature_order", _take(data, "quadrature_order", int, "", 5), 1)
    if order > MAX_QUADRATURE_ORDER:
        raise ConfigError("quadrature_order", f"must be <= {MAX_QUADRATURE_ORDER}, got {order}")

    return ScenarioConfig(
        name=_take(data, "name", str, "", map_path.stem),
        map_path=map_path,
        num_agents=num_agents,
        num_phenomena=_at_least("num_phenomena", _take(data, "num_phenomena", int, "", required=True), 0),
        mission_duration=_at_least("mission_duration", _take(data, "mission_duration", int, "", required=True), 0),
        seed=_at_least("seed", _take(data, "seed", int, "", 0), 0),
        planning_horizon=_at_least("planning_horizon", _take(data, "planning_horizon", int, "", 2), 1),
        comm_range=_at_least("comm_range", _take(data, "comm_range", int, "", 5), 0),
        algorithm=_choice("algorithm", _take(data, "algorithm", str, "", "MA-V"), ALGORITHMS),
        quadrature_order=order,
        max_planned_observations=_at_least(
            "max_planned_observations", _take(data, "max_planned_observations", int, "", 6), 1
        ),
        gp=_gp(data.get("gp")),
        phenomenon=_phenomenon(data.get("phenomenon")),
        mcts=_mcts(data.get("mcts")),
        discovery=_discovery(data.get("discovery")),
        field=_field(data.get("field")),
        search=_search(data.get("search")),
        starts=_starts(data.get("starts"), num_agents),
    )


def _read_yaml(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), "file not found")
    try:
        with open(path, "r") as f:
            return yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(str(path), f"invalid YAML: {e}")


def load_scenario(path, seed=None):
    path = Path(path)
    config = scenario_from_dict(_read_yaml(path), base_dir=path.parent)
    if seed is not None:
        config = config.with_overrides(seed=_at_least("seed", int(seed), 0))
    logger.info(f"Loaded scenario {config.name} from {path}")
    return config


def _seeds(raw):
    if isinstance(raw, list) and raw and all(isinstance(s, int) and not isinstance(s, bool) for s in raw):
        return [_at_least("seeds", s, 0) for s in raw]
    if isinstance(raw, dict):
        _check_keys(raw, ("start", "count"), "seeds.")
        start = _at_least("seeds.start", _take(raw, "start", int, "seeds.", 0), 0)
        count = _at_least("seeds.count", _take(raw, "count", int, "seeds.", required=True), 1)
        return list(range(start, start + count))
    raise ConfigError("seeds", f"expected a list of integers or {{start, count}}, got {raw!r}")


def load_sweep(path):
    """Cross product scenarios x algorithms x seeds, with optional overrides merged into every scenario."""
    path = Path(path)
    data = _read_yaml(path)
    _check_keys(data, ("schema_version", "scenarios", "algorithms", "seeds", "overrides"), "")
    version = _take(data, "schema_version", int, "", required=True)
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version} (expected {SCHEMA_VERSION})")

    scenarios = data.get("scenarios")
    if not isinstance(scenarios, list) or not scenarios or not all(isinstance(s, str) for s in scenarios):
        raise ConfigError("scenarios", "expected a non-empty list of scenario file paths")
    algorithms = data.get("algorithms", list(ALGORITHMS))
    if not isinstance(algorithms, list) or not algorithms:
        raise ConfigError("algorithms", "expected a non-empty list")
    for algo in algorithms:
        _choice("algorithms", algo, ALGORITHMS)
    seeds = _seeds(data.get("seeds", [0]))
    overrides = data.get("overrides") or {}
    if not isinstance(overrides, dict):
        raise ConfigError("overrides", "expected a mapping")

    configs = []
    for scenario in scenarios:
        scenario_path = path.parent / scenario
        raw = dict(_read_yaml(scenario_path))
        for key, value in overrides.items():
            if isinstance(value, dict) and isinstance(raw.get(key), dict):
                raw[key] = {**raw[key], **value}
            else:
                raw[key] = value
        for algo in algorithms:
            for seed in seeds:
                raw.update(algorithm=algo, seed=seed)
                configs.append(scenario_from_dict(raw, base_dir=scenario_path.parent))
    logger.info(f"Sweep {path.name}: {len(configs)} runs ({len(scenarios)} scenarios x {len(algorithms)} algorithms x {len(seeds)} seeds)")
    return configs
