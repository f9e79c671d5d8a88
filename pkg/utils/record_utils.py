# utils/record_utils.py

import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import pandas as pd

logger = logging.getLogger(__name__)

RECORD_SCHEMA_VERSION = 1
LIST_FIELDS = ("steps_to_first_unique",)


@dataclass
class RunRecord:
    schema_version: int
    run_id: str
    seed: int
    map_name: str
    algorithm: str
    num_agents: int
    num_phenomena: int
    mission_duration: int
    planning_horizon: int
    comm_range: int
    status: str = "ok"
    error: str = ""
    unique_phenomena_discovered: int = 0
    steps_to_first_unique: Optional[list] = None
    mean_steps_to_first_unique: Optional[float] = None
    nodes_generated: int = 0
    nodes_expanded: int = 0
    max_possible_nodes: int = 0
    search_ratio: float = 0.0
    reactive_yields: int = 0
    collision_events: int = 0
    bubble_steps: int = 0
    wall_time: float = 0.0


COLUMNS = [f.name for f in fields(RunRecord)]


def _base(config):
    return dict(
        schema_version=RECORD_SCHEMA_VERSION,
        run_id=config.run_id,
        seed=config.seed,
        map_name=config.map_name,
        algorithm=config.algorithm,
        num_agents=config.num_agents,
        num_phenomena=config.num_phenomena,
        mission_duration=config.mission_duration,
        planning_horizon=config.planning_horizon,
        comm_range=config.comm_range,
    )


def record_from_metrics(config, metrics):
    return RunRecord(
        **_base(config),
        unique_phenomena_discovered=metrics.unique_phenomena_discovered,
        steps_to_first_unique=list(metrics.steps_to_first_unique),
        mean_steps_to_first_unique=metrics.mean_steps_to_first_unique,
        nodes_generated=metrics.nodes_generated,
        nodes_expanded=metrics.nodes_expanded,
        max_possible_nodes=metrics.max_possible_nodes,
        search_ratio=metrics.search_ratio,
        reactive_yields=metrics.reactive_yields,
        collision_events=metrics.collision_events,
        bubble_steps=metrics.bubble_steps,
        wall_time=metrics.wall_time,
    )


def failed_record(config, error):
    return RunRecord(**_base(config), status="failed", error=f"{type(error).__name__}: {error}")


# --- Writing ---
def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def records_frame(records):
    rows = []
    for record in sorted(records, key=lambda r: r.run_id):
        row = asdict(record)
        for key in LIST_FIELDS:
            row[key] = json.dumps(row[key])
        rows.append(row)
    return pd.DataFrame(rows, columns=COLUMNS)


def write_records(records, out_dir, trajectories=None):
    """
    records.csv (flat, list fields JSON-encoded) and records.jsonl (nested, plus per-agent
    trajectories keyed by run_id) in `out_dir`, sorted by run_id.
    """
    out_dir = Path(out_dir)
    trajectories = trajectories or {}
    ordered = sorted(records, key=lambda r: r.run_id)

    _atomic_write(out_dir / "records.csv", records_frame(ordered).to_csv(index=False))
    lines = []
    for record in ordered:
        row = asdict(record)
        row["trajectories"] = trajectories.get(record.run_id)
        lines.append(json.dumps(row, sort_keys=False))
    _atomic_write(out_dir / "records.jsonl", "\n".join(lines) + ("\n" if lines else ""))
    logger.info(f"Saved {len(ordered)} record(s) to {out_dir}")
    return out_dir / "records.csv"


def read_records(path):
    df = pd.read_csv(path)
    for key in LIST_FIELDS:
        df[key] = df[key].map(json.loads)
    return df


# --- Summaries ---
def summarize(df):
    """Per-algorithm means over successful runs."""
    ok = df[df["status"] == "ok"]
    grouped = ok.groupby("algorithm")
    summary = grouped.agg(
        runs=("run_id", "count"),
        unique_phenomena=("unique_phenomena_discovered", "mean"),
        steps_to_first_unique=("mean_steps_to_first_unique", "mean"),
        search_ratio=("search_ratio", "mean"),
        reactive_yields=("reactive_yields", "mean"),
        collision_events=("collision_events", "mean"),
    )
    return summary.reset_index()


def format_summary(df):
    formatted = df.copy()
    float_cols = formatted.select_dtypes(include=["float", "float64"]).columns
    for col in float_cols:
        formatted[col] = formatted[col].map(lambda x: f"{x:.3f}" if pd.notnull(x) else "-")
    return formatted


def save_summary(summary, out_dir, xlsx=False):
    out_dir = Path(out_dir)
    _atomic_write(out_dir / "summary.csv", summary.to_csv(index=False))
    if xlsx:
        summary.to_excel(out_dir / "summary.xlsx", index=False, engine="openpyxl")
    logger.info(f"Saved summary to {out_dir}")
