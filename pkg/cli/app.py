"""
cli/app.py — Parser e despacho dos subcomandos.

    python main.py [--config F | --preset NOME] [--seed N] [--jobs N] [--lang pt]
                   [--dump-config] <synth|encode|priors|train|detect|eval> ...

Exit codes: 0 sucesso, 1 erro de validação, 2 erro de E/S.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

import i18n
from cli import commands
from core import config as run_config
from core.errors import ConfigError, SkelBoxError
from core.presets import load_preset, save_preset
from i18n import t

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

Handler = Callable[[argparse.Namespace, dict], int]


class _Parser(argparse.ArgumentParser):
    """Erros de uso viram ConfigError (exit 1) em vez de SystemExit(2)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise ConfigError(t("err_usage", e=message))


# ── Parser ────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skelbox", description=t("prog_desc"))
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--config", type=Path, help=t("help_config"))
    source.add_argument("--preset", help=t("help_preset"))
    parser.add_argument("--dump-config", action="store_true", help=t("help_dump"))
    parser.add_argument("--save-preset", metavar="NAME", help=t("help_save_preset"))
    parser.add_argument("--seed", type=int, help=t("help_seed"))
    parser.add_argument("--jobs", type=int, default=1, help=t("help_jobs"))
    parser.add_argument("--lang", choices=i18n.LANGS, help=t("help_lang"))
    parser.add_argument("-v", "--verbose", action="store_true", help=t("help_verbose"))

    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help=t("help_synth"))
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--num-train", type=int, dest="synth.num_train")
    p.add_argument("--num-test", type=int, dest="synth.num_test")
    p.add_argument("--classes", type=int, dest="synth.num_classes")
    p.set_defaults(handler=commands.cmd_synth)

    p = sub.add_parser("encode", help=t("help_encode"))
    p.add_argument("input", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--mode", choices=run_config.ENCODE_MODES, dest="encode.mode")
    p.add_argument("--width", type=int, dest="encode.width")
    p.add_argument("--stats", type=Path)
    p.set_defaults(handler=commands.cmd_encode)

    p = sub.add_parser("priors", help=t("help_priors"))
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(handler=commands.cmd_priors)

    p = sub.add_parser("train", help=t("help_train"))
    p.add_argument("data", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--loss-log", type=Path)
    p.add_argument("--resume", type=Path)
    p.add_argument("--stats", type=Path)
    p.add_argument("--epochs", type=int, dest="train.max_epochs")
    p.add_argument("--lr", type=float, dest="train.lr")
    p.add_argument("--batch-size", type=int, dest="train.batch_size")
    p.set_defaults(handler=commands.cmd_train)

    p = sub.add_parser("detect", help=t("help_detect"))
    p.add_argument("data", type=Path)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--conf-threshold", type=float, dest="inference.conf_threshold")
    p.add_argument("--top-k", type=int, dest="inference.top_k")
    p.add_argument("--nms-iou", type=float, dest="inference.nms_iou")
    p.set_defaults(handler=commands.cmd_detect)

    p = sub.add_parser("eval", help=t("help_eval"))
    p.add_argument("detections", type=Path)
    p.add_argument("labels", type=Path)
    p.add_argument("--theta", type=float, nargs="+", dest="eval.thetas")
    p.add_argument("--out", type=Path)
    p.set_defaults(handler=commands.cmd_eval)
    return parser


# ── Configuração resolvida ────────────────────────────────────────────────────

def resolve_config(args: argparse.Namespace) -> dict:
    """Padrão → arquivo/preset → flags."""
    if args.preset:
        cfg = load_preset(args.preset)
    else:
        cfg = run_config.load(args.config)
    if args.seed is not None:
        run_config.set_value(cfg, "synth.seed", args.seed)
        run_config.set_value(cfg, "train.seed", args.seed)
    for key, value in vars(args).items():
        if "." in key and value is not None:
            run_config.set_value(cfg, key, list(value) if isinstance(value, list) else value)
    # --classes descreve o dataset e a rede ao mesmo tempo
    classes = getattr(args, "synth.num_classes", None)
    if classes is not None:
        run_config.set_value(cfg, "net.num_actions", classes)
    return cfg


# ── Entrada ───────────────────────────────────────────────────────────────────

def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.lang:
            i18n.set_lang(args.lang)
        if args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")

        cfg = resolve_config(args)
        if args.save_preset:
            path = save_preset(args.save_preset, cfg)
            print(t("done_preset", name=args.save_preset, out=path))
        if args.dump_config:
            sys.stdout.write(run_config.dumps(cfg))
            return EXIT_OK
        handler: Optional[Handler] = getattr(args, "handler", None)
        if handler is None:
            if args.save_preset:
                return EXIT_OK
            raise ConfigError(t("err_no_command"))
        return handler(args, cfg)
    except SkelBoxError as e:
        print(t("err_validation", e=e), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(t("err_io", e=e), file=sys.stderr)
        return EXIT_IO
    except SystemExit as e:
        # --help / --version
        return int(e.code or 0)
