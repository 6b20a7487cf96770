"""
cli/commands.py — Corpo de cada subcomando.

Cada função recebe (args, cfg) já resolvidos por cli/app.py e devolve 0.
Erros sobem como SkelBoxError / OSError; a tradução para exit code fica no app.
"""
from __future__ import annotations

import csv
import json
import logging
from argparse import Namespace
from pathlib import Path
from typing import Optional

from core import config as run_config
from core import presets
from core.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from core.dataset import (Item, build_sample, load_dataset, load_labels, load_skeletons,
                          read_detections, write_dataset, write_detections)
from core.encoding import (DEFAULT_JOINT_ORDER, DatasetStats, compute_dataset_stats,
                           encode_for_detector, save_action_image)
from core.errors import ConfigError, ValidationError
from core.evaluation import evaluate
from core.network import SkeletonNet, image_to_input
from core.postprocess import Detection, decode_detections, nms
from core.priors import iter_prior_records
from core.skeleton_io import SkeletonSequence, generate_synthetic
from core.training import EpochRecord, TrainResult, train
from core.workers import map_ordered
from i18n import t

log = logging.getLogger(__name__)


# ── Helpers ───────────────────────────────────────────────────────────────────

def _write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    tmp.replace(path)


def _read_stats(path: Path) -> DatasetStats:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
            return DatasetStats(float(data["c_min"]), float(data["c_max"]))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise ValidationError(f"{path}: not a stats file ({e})") from e


def _stats_to_list(stats: Optional[DatasetStats]) -> Optional[list[float]]:
    return None if stats is None else [stats.c_min, stats.c_max]


def _stats_from_list(values: Optional[list]) -> Optional[DatasetStats]:
    return None if values is None else DatasetStats(float(values[0]), float(values[1]))


def _resolve_stats(cfg: dict, sequences: list[SkeletonSequence],
                   stats_file: Optional[Path]) -> Optional[DatasetStats]:
    if run_config.encode_mode(cfg) == "invariant":
        return None
    if stats_file is not None:
        return _read_stats(stats_file)
    return compute_dataset_stats(sequences)


# ── synth ─────────────────────────────────────────────────────────────────────

def cmd_synth(args: Namespace, cfg: dict) -> int:
    sc = run_config.synth_config(cfg)
    data = generate_synthetic(sc)
    num_train = int(cfg["synth"]["num_train"])
    out = Path(args.out)
    n = write_dataset(out / "train", data[:num_train])
    n += write_dataset(out / "test", data[num_train:])
    print(t("done_synth", n=n, out=out))
    return 0


# ── encode ────────────────────────────────────────────────────────────────────

def cmd_encode(args: Namespace, cfg: dict) -> int:
    sequences = load_skeletons(Path(args.input), float(cfg["synth"]["frame_rate"]))
    stats = _resolve_stats(cfg, sequences, args.stats)
    width = int(cfg["encode"]["width"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if stats is not None:
        _write_text(out / "stats.json",
                    json.dumps({"c_min": stats.c_min, "c_max": stats.c_max}, indent=2, sort_keys=True) + "\n")

    def encode_one(seq: SkeletonSequence) -> Path:
        img = encode_for_detector(seq, width, DEFAULT_JOINT_ORDER, stats)
        return save_action_image(img, out / f"{seq.source_id}.png")

    written = map_ordered(encode_one, sequences, args.jobs, name="Encode")
    print(t("done_encode", n=len(written), out=out))
    return 0


# ── priors ────────────────────────────────────────────────────────────────────

def cmd_priors(args: Namespace, cfg: dict) -> int:
    prior_cfg = presets.net_config(cfg).prior_config()
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    n = 0
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["layer", "row", "col", "ratio", "cx", "cy", "w", "h"])
        for layer, row, col, ratio, cx, cy, w, h in iter_prior_records(prior_cfg):
            writer.writerow([layer, row, col, repr(ratio), repr(cx), repr(cy), repr(w), repr(h)])
            n += 1
    tmp.replace(path)
    print(t("done_priors", n=n, out=path))
    return 0


# ── train ─────────────────────────────────────────────────────────────────────

def _write_loss_log(path: Path, records: list[EpochRecord]) -> None:
    lines = ["epoch,loss,lr"] + [f"{r.epoch},{r.loss!r},{r.lr!r}" for r in records]
    _write_text(path, "\n".join(lines) + "\n")


def cmd_train(args: Namespace, cfg: dict) -> int:
    tc = run_config.train_config(cfg)
    items = load_dataset(Path(args.data), float(cfg["synth"]["frame_rate"]))

    resumed: Optional[Checkpoint] = None
    if args.resume is not None:
        resumed = load_checkpoint(args.resume)
        print(t("resume_from", path=args.resume, epoch=resumed.epoch))
        net = resumed.build_net()
        encode = dict(resumed.encode)
        stats = _stats_from_list(encode.get("stats"))
    else:
        net = SkeletonNet(presets.net_config(cfg), seed=tc.seed)
        stats = _resolve_stats(cfg, [it.seq for it in items], args.stats)
        encode = {"mode": run_config.encode_mode(cfg), "width": int(cfg["encode"]["width"]),
                  "stats": _stats_to_list(stats)}

    num_labels = max((seg.label for it in items for seg in it.segments), default=-1) + 1
    if num_labels > net.config.num_actions:
        raise ConfigError(f"dataset has {num_labels} classes but the network has "
                          f"{net.config.num_actions} (set net.num_actions)")

    def to_sample(item: Item):
        return build_sample(item, net.config, DEFAULT_JOINT_ORDER, stats)[0]

    samples = map_ordered(to_sample, items, args.jobs, name="Encode")
    start_epoch = resumed.epoch if resumed else 0
    if start_epoch >= tc.max_epochs:
        print(t("nothing_to_train", epoch=start_epoch))

    earlier = resumed.loss_log if resumed else []
    loss_path = Path(args.loss_log) if args.loss_log else Path(args.out).with_suffix(".loss.csv")

    def save_state(state: TrainResult) -> list[EpochRecord]:
        loss_log = earlier + state.loss_log
        save_checkpoint(Checkpoint(net.config, state.net.params, state.epochs_done, tc,
                                   state.velocity, state.schedule, loss_log, encode), args.out)
        _write_loss_log(loss_path, loss_log)
        return loss_log

    # checkpoint a cada época; o último é regravado idêntico no fim
    result = train(samples, net, tc, jobs=args.jobs,
                   velocity=resumed.velocity if resumed else None,
                   schedule=resumed.schedule if resumed else None,
                   start_epoch=start_epoch, on_epoch=save_state)
    loss_log = save_state(result)

    last = loss_log[-1].loss if loss_log else float("nan")
    print(t("done_train", out=args.out, epoch=result.epochs_done, loss=last))
    return 0


# ── detect ────────────────────────────────────────────────────────────────────

def cmd_detect(args: Namespace, cfg: dict) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    net = ckpt.build_net()
    priors = net.priors()
    stats = _stats_from_list(ckpt.encode.get("stats"))
    width = net.config.input_shape[1]
    inf = cfg["inference"]
    sequences = load_skeletons(Path(args.data), float(cfg["synth"]["frame_rate"]))

    def detect_one(seq: SkeletonSequence) -> list[Detection]:
        img = encode_for_detector(seq, width, DEFAULT_JOINT_ORDER, stats)
        loc, conf = net.predict(image_to_input(img, net.config))
        dets = decode_detections(loc, conf, priors, img, float(inf["conf_threshold"]),
                                 int(inf["top_k"]))
        return nms(dets, float(inf["nms_iou"]))

    per_video = map_ordered(detect_one, sequences, args.jobs, name="Detect")
    n = write_detections(Path(args.out), [d for dets in per_video for d in dets])
    print(t("done_detect", n=n, out=args.out))
    return 0


# ── eval ──────────────────────────────────────────────────────────────────────

def cmd_eval(args: Namespace, cfg: dict) -> int:
    dets = read_detections(Path(args.detections))
    labels = load_labels(Path(args.labels))
    gts = [seg for vid in sorted(labels) for seg in labels[vid]]
    thetas = [float(x) for x in cfg["eval"]["thetas"]]
    if not thetas:
        raise ConfigError("eval.thetas is empty")
    table = evaluate(dets, gts, thetas)
    print(table.to_text(), end="")
    if args.out:
        _write_text(Path(args.out), table.to_csv())
        print(t("done_eval", out=args.out))
    return 0
