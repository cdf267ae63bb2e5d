"""Environment settings and output writers for simulation results."""
import os
from pathlib import Path
from typing import Optional, Union
import logging

import pandas as pd
from dotenv import load_dotenv
from pydantic import BaseModel

logger = logging.getLogger(__name__)

load_dotenv()  # Load .env file
LOG_FILE = os.getenv("SKS_LOG_FILE", "sks_simulation.log")


def env_int(name: str) -> Optional[int]:
    """Integer environment variable, or None when unset or empty.

    Raises:
        ValueError: If the variable is set to something that is not an integer
    """
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"Environment variable {name}={raw!r} is not an integer")


def env_str(name: str) -> Optional[str]:
    raw = os.getenv(name)
    return raw if raw else None


def ensure_out_dir(out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_csv(frame: pd.DataFrame, out_dir: Union[str, Path], name: str) -> Path:
    """Write a result table; NaN cells come out empty."""
    path = ensure_out_dir(out_dir) / name
    frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    logger.info(f"[OUTPUT] Wrote {path} ({len(frame)} rows)")
    return path


def write_json(model: BaseModel, out_dir: Union[str, Path], name: str = "effective_config.json") -> Path:
    path = ensure_out_dir(out_dir) / name
    path.write_text(model.model_dump_json(indent=2) + "\n")
    logger.info(f"[OUTPUT] Wrote {path}")
    return path
