#!/usr/bin/env python3
"""Rebuild the MovieLens 100K files ``u.data``, ``u.item`` and ``u.user``.

grouplens.org is often unreachable from build machines, but the
``pytorch-widedeep`` wheel on PyPI ships the full 100K ratings, item and
user tables as parquet files. This script downloads that wheel (no
dependencies, nothing installed), reads the three tables and writes them out
in the original tab/pipe separated layouts.

    python scripts/fetch_movielens.py data/ml-100k

Needs pandas with a parquet engine (pyarrow).
"""

import argparse
import io
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

WHEEL = "pytorch-widedeep==1.7.0"
MEMBER = "pytorch_widedeep/datasets/data/MovieLens100k_{}.parquet.brotli"
GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime", "Documentary",
    "Drama", "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi",
    "Thriller", "War", "Western",
]


def _cell(v):
    if v is None or v != v:
        return ""
    return str(v)


def fetch(dest: Path, wheel: Path | None = None) -> Path:
    import pandas as pd

    dest.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        if wheel is None:
            subprocess.run(
                [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:", "-d", tmp, WHEEL],
                check=True,
                stdout=subprocess.DEVNULL,
            )
            wheel = next(Path(tmp).glob("*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            tables = {n: pd.read_parquet(io.BytesIO(zf.read(MEMBER.format(n)))) for n in ("data", "items", "users")}

    ratings = tables["data"]
    with open(dest / "u.data", "w", newline="\n") as fh:
        for u, i, r, t in ratings[["user_id", "movie_id", "rating", "timestamp"]].itertuples(index=False):
            fh.write(f"{u}\t{i}\t{r}\t{t}\n")

    items = tables["items"]
    cols = ["movie_id", "movie_title", "release_date", "video_release_date", "IMDb_URL"] + GENRES
    with open(dest / "u.item", "w", encoding="latin-1", newline="\n") as fh:
        for row in items[cols].itertuples(index=False):
            fh.write("|".join(_cell(v) for v in row) + "\n")

    with open(dest / "u.genre", "w", newline="\n") as fh:
        for k, g in enumerate(GENRES):
            fh.write(f"{g}|{k}\n")

    users = tables["users"]
    with open(dest / "u.user", "w", newline="\n") as fh:
        for row in users[["user_id", "age", "gender", "occupation", "zip_code"]].itertuples(index=False):
            fh.write("|".join(_cell(v) for v in row) + "\n")
    return dest


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dest", nargs="?", default="data/ml-100k", type=Path)
    parser.add_argument("--wheel", type=Path, help="use an already downloaded wheel")
    args = parser.parse_args(argv)
    out = fetch(args.dest, args.wheel)
    n = sum(1 for _ in open(out / "u.data"))
    print(f"wrote {out} ({n} ratings)")


if __name__ == "__main__":
    main()
