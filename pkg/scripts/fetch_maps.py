# -*- coding: utf-8 -*-
import sys
import os

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

import argparse
import io
import zipfile
from datetime import datetime

import requests

from utils.grid_utils import MapParseError, parse_map

MAPS_DIR = "maps"
FETCH_LOG = os.path.join(MAPS_DIR, "fetch_log.txt")
MAPF_MAP_ZIP = "https://movingai.com/benchmarks/mapf/mapf-map.zip"
DEFAULT_MAPS = ["empty-16-16", "empty-32-32", "maze-32-32-4", "den312d"]


def log_fetch(level, message):
    os.makedirs(MAPS_DIR, exist_ok=True)
    stamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    with open(FETCH_LOG, "a") as f:
        f.write(f"[{stamp}] [{level}] {message}\n")


def download_archive(url=MAPF_MAP_ZIP, timeout=60):
    print(f"[FETCHING] {url}")
    response = requests.get(url, timeout=timeout)
    response.raise_for_status()
    return zipfile.ZipFile(io.BytesIO(response.content))


def fetch_map(name, archive=None, force_refresh=False):
    """Cached path of a MovingAI benchmark map, downloading the archive when missing."""
    cache_file = os.path.join(MAPS_DIR, f"{name}.map")
    if not force_refresh and os.path.exists(cache_file):
        return cache_file

    try:
        archive = archive or download_archive()
        member = next((m for m in archive.namelist() if m.endswith(f"{name}.map")), None)
        if member is None:
            raise FileNotFoundError(f"{name}.map not in archive")
        text = archive.read(member).decode("utf-8")
        grid = parse_map(text, name=name)

        os.makedirs(MAPS_DIR, exist_ok=True)
        with open(cache_file, "w") as f:
            f.write(text)
        print(f"[CACHED] {name} ({grid.height}x{grid.width})")
        log_fetch("OK", f"Cached {name} ({grid.height}x{grid.width}, {len(grid.passable_cells)} passable)")
        return cache_file

    except (requests.RequestException, zipfile.BadZipFile, FileNotFoundError, MapParseError) as e:
        print(f"[ERROR] Failed to fetch map {name}: {e}")
        log_fetch("ERROR", f"Failed to fetch map {name}: {e}")
        return None


def fetch_maps(names, force_refresh=False):
    missing = [n for n in names if force_refresh or not os.path.exists(os.path.join(MAPS_DIR, f"{n}.map"))]
    archive = None
    if missing:
        try:
            archive = download_archive()
        except (requests.RequestException, zipfile.BadZipFile) as e:
            print(f"[ERROR] Failed to download {MAPF_MAP_ZIP}: {e}")
            log_fetch("ERROR", f"Failed to download {MAPF_MAP_ZIP}: {e}")
            return {n: None for n in missing}
    return {n: fetch_map(n, archive=archive, force_refresh=force_refresh) for n in names}


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Cache MovingAI MAPF benchmark maps under maps/.")
    parser.add_argument("names", nargs="*", default=DEFAULT_MAPS)
    parser.add_argument("--force", action="store_true", help="re-download cached maps")
    args = parser.parse_args()

    print("⏬ Fetching MovingAI benchmark maps...")
    results = fetch_maps(args.names, force_refresh=args.force)
    sys.exit(0 if all(results.values()) else 1)
