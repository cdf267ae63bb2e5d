"""Write every experiment preset as a JSON config under configs/."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from sks_api.presets import get_preset, get_preset_description, list_presets  # noqa: E402


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--dst", type=str, default=None, help="Destination directory (default: configs/).")
    ap.add_argument("--only", nargs="*", default=None, help="Preset names to write (default: all).")
    args = ap.parse_args()

    dst = Path(args.dst) if args.dst else ROOT / "configs"
    names = args.only or list_presets()
    unknown = [n for n in names if n not in list_presets()]
    if unknown:
        raise SystemExit(f"Unknown presets: {unknown}. Available: {list_presets()}")

    dst.mkdir(parents=True, exist_ok=True)
    for name in names:
        path = dst / f"{name}.json"
        path.write_text(get_preset(name).model_dump_json(indent=2) + "\n")
        print(f"Wrote {path} ({get_preset_description(name)})")


if __name__ == "__main__":
    main()
