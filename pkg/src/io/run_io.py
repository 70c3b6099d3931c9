"""
Run I/O Module

Trajectory and session-result files written by ``ask`` and ``evaluate``.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Dict

from ..core.plans import Trajectory
from ..core.session import SessionResult

TRAJECTORY_DIR = "trajectories"


def session_slug(query: str) -> str:
    """Stable directory name for a single ``ask`` session."""
    return "ask-" + hashlib.sha1(query.encode("utf-8")).hexdigest()[:10]


def _write_json(path: Path, data: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
    return path


def save_session(result: SessionResult, out_dir: str, name: str = "trajectory") -> Path:
    """
    Write ``<out_dir>/<name>.json`` with the response, failure reason and
    trajectory (plan snapshots per phase plus the task history).
    """
    return _write_json(Path(out_dir) / f"{name}.json", result.to_dict())


def save_trajectory(trajectory: Trajectory, run_dir: str, query_id: str) -> Path:
    return _write_json(Path(run_dir) / TRAJECTORY_DIR / f"{query_id}.json", trajectory.to_dict())


def load_trajectory(path: str) -> Trajectory:
    """Read a trajectory file, or the trajectory inside a session file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trajectory not found: {path}")
    with open(path) as f:
        data = json.load(f)
    if "trajectory" in data:
        data = data["trajectory"]
    return Trajectory.from_dict(data)
