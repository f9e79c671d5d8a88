# -*- coding: utf-8 -*-

import sys
import os

# Add the parent directory to the system path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from datetime import datetime
from pathlib import Path

from info_mapf import main as info_mapf_main

# Output directory
if os.environ.get("RENDER"):
    DATA_DIR = Path("/data/bench")
else:
    DATA_DIR = Path("data/bench")

SWEEP = os.environ.get("BENCH_SWEEP", "sweeps/desk_reproduction.yaml")
WORKERS = os.environ.get("BENCH_WORKERS", "4")


def run_nightly_bench():
    print(f"📊 Running nightly bench @ {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    out_dir = DATA_DIR / str(datetime.today().date())
    out_dir.mkdir(parents=True, exist_ok=True)

    code = info_mapf_main(["bench", "--sweep", SWEEP, "--out", str(out_dir), "--workers", WORKERS, "--xlsx"])
    if code == 0:
        print(f"✅ Bench complete: {out_dir}")
    else:
        print(f"[ERROR] Bench finished with exit code {code}: {out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(run_nightly_bench())
