"""
scripts/toy_run.py — Execução ponta a ponta no dataset sintético.

    synth (3 classes, 200 treino / 50 teste, seed 42)
      → train (TinySkeletonNet, preset toy)
      → detect (split de teste)
      → eval (θ = 0.1, 0.3, 0.5, 0.7)

Critério: mAP(0.5) >= 0.8 e mAP(0.1) >= mAP(0.5).

Uso:
    python scripts/toy_run.py [--out runs/toy] [--jobs 4]
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from cli.app import EXIT_OK, run  # noqa: E402

log = logging.getLogger("toy_run")

MAP_TARGET = 0.8


def read_map_row(table_csv: Path) -> dict[float, float]:
    with open(table_csv, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    header, last = rows[0], rows[-1]
    return {float(h.split("=", 1)[1]): float(v) for h, v in zip(header[1:], last[1:])}


def toy_run(out: Path, jobs: int = 1, seed: int = 42) -> dict[float, float]:
    """Roda o pipeline inteiro e devolve {θ: mAP}."""
    common = ["--preset", "toy", "--seed", str(seed), "--jobs", str(jobs)]
    steps = [
        ["synth", "--out", str(out / "data")],
        ["train", str(out / "data" / "train"), "--out", str(out / "model.ckpt.json"),
         "--loss-log", str(out / "loss.csv")],
        ["detect", str(out / "data" / "test"), "--checkpoint", str(out / "model.ckpt.json"),
         "--out", str(out / "detections.csv")],
        ["eval", str(out / "detections.csv"), str(out / "data" / "test" / "label"),
         "--out", str(out / "ap_table.csv")],
    ]
    for step in steps:
        started = time.perf_counter()
        code = run(common + step)
        log.info("%s finished in %.1fs (exit %d)", step[0], time.perf_counter() - started, code)
        if code != EXIT_OK:
            raise RuntimeError(f"step '{step[0]}' failed with exit code {code}")
    return read_map_row(out / "ap_table.csv")


def main() -> int:
    parser = argparse.ArgumentParser(description="End-to-end toy run")
    parser.add_argument("--out", type=Path, default=ROOT / "runs" / "toy")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="[%(name)s] %(message)s")

    maps = toy_run(args.out, args.jobs, args.seed)
    ok = maps[0.5] >= MAP_TARGET and maps[0.1] >= maps[0.5]
    print(f"mAP(0.1)={maps[0.1]:.4f}  mAP(0.5)={maps[0.5]:.4f}  {'OK' if ok else 'FAIL'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
