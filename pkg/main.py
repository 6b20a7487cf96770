"""
main.py — Ponto de entrada do SkelBox.

Configura o logging (stderr, formato "[modulo] mensagem"), o idioma padrão
e delega ao CLI. Execute com:
    python main.py --help
    python main.py synth --out data
"""
import logging
import os
import sys

import i18n
from cli.app import run


def _setup_logging() -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(name)s] %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)


def main() -> None:
    _setup_logging()
    # ── Idioma ─────────────────────────────────────────────────────
    # SKELBOX_LANG define o padrão; --lang sobrescreve.
    i18n.set_lang(os.environ.get("SKELBOX_LANG", "en"))
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
