"""Per-iteration training statistics and the metrics CSV writer."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, fields

from .errors import ValidationError

CSV_HEADER = ("iteration,episodes,steps,mean_env_reward,mean_bonus,ctr,"
              "disc_loss,policy_loss,value_loss,entropy,approx_kl")


@dataclass
class IterationStats:
    iteration: int
    episodes: int
    steps: int
    mean_env_reward: float
    mean_bonus: float
    ctr: float
    disc_loss: float
    policy_loss: float
    value_loss: float
    entropy: float
    approx_kl: float

    def values(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


def _render(value) -> str:
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    return f"{value:.6g}"


def write_metrics(path, rows: list[IterationStats]) -> None:
    """Write the metrics CSV (6 significant digits, '\\n' newlines)."""
    if not rows:
        raise ValidationError("rows must be nonempty")
    lines = [CSV_HEADER]
    for row in rows:
        lines.append(",".join(_render(v) for v in row.values()))
    write_text_atomic(path, "\n".join(lines) + "\n")


def write_text_atomic(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
