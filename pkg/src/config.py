"""Environment-driven settings shared by the CLI and the HTTP service."""

from __future__ import annotations

import os
import sys

from pydantic import BaseModel

_FALSY = ("0", "false", "False", "no", "")


def load_dotenv(path: str = ".env") -> None:
    """Lightweight .env loader.

    Populates os.environ for KEY=VALUE lines. Does not override existing vars.
    """
    if not os.path.isfile(path):
        return
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#") or "=" not in line:
                    continue
                key, value = line.split("=", 1)
                os.environ.setdefault(key.strip(), value.strip().strip('"').strip("'"))
    except OSError:
        # fail-soft: a broken .env must not stop the CLI
        pass


class Settings(BaseModel):
    progress: bool = True
    sampling_budget: int = 500
    out_dir: str = "out"
    scenario_dir: str = os.path.join("src", "scenarios")

    @classmethod
    def from_env(cls) -> "Settings":
        return cls(
            progress=os.getenv("AUCTION_PROGRESS", "1") not in _FALSY,
            sampling_budget=int(os.getenv("AUCTION_SAMPLING_BUDGET", "500")),
            out_dir=os.getenv("AUCTION_OUT_DIR", "out"),
            scenario_dir=os.getenv("AUCTION_SCENARIO_DIR", os.path.join("src", "scenarios")),
        )


def _p(msg: str) -> None:
    """Progress line on stderr; stdout is reserved for results."""
    if os.getenv("AUCTION_PROGRESS", "1") not in _FALSY:
        print(msg, file=sys.stderr, flush=True)
