"""
i18n.py — Mensagens do CLI do SkelBox.

Idiomas suportados: "en" (English — padrão) e "pt" (Português).

Uso básico:
    from i18n import t, set_lang

    set_lang("pt")
    print(t("done_synth", n=200, out="data"))

Logs de biblioteca (core/) ficam em inglês; só o que o usuário lê no
terminal passa por aqui.
"""

_lang: str = "en"

LANGS = ("en", "pt")


def set_lang(lang: str) -> None:
    global _lang
    _lang = lang.lower() if lang.lower() in LANGS else "en"


def get_lang() -> str:
    return _lang


def t(key: str, **kw) -> str:
    """Return the translated string for *key*, formatted with **kw."""
    table = _PT if _lang == "pt" else _EN
    s = table.get(key, _EN.get(key, key))
    if kw:
        try:
            s = s.format(**kw)
        except (KeyError, IndexError):
            pass
    return s


# ── Português ─────────────────────────────────────────────────────────────────

_PT: dict[str, str] = {
    # Parser
    "prog_desc":        "Detecção de ações em sequências de esqueleto (imagens de ação + detector single-shot).",
    "help_config":      "arquivo JSON de configuração (mesclado sobre o padrão)",
    "help_preset":      "nome de um preset da pasta presets/",
    "help_dump":        "imprime a configuração resolvida e sai",
    "help_save_preset": "grava a configuração resolvida como preset (só as diferenças do padrão)",
    "help_seed":        "semente (sobrescreve synth.seed e train.seed)",
    "help_jobs":        "número de threads de trabalho",
    "help_lang":        "idioma das mensagens (en, pt)",
    "help_verbose":     "logs de depuração",
    "help_synth":       "gera um dataset sintético (train/ e test/)",
    "help_encode":      "codifica esqueletos como imagens de ação (PNG + JSON)",
    "help_priors":      "exporta as default boxes da rede como CSV",
    "help_train":       "treina o detector e grava checkpoint + log de loss",
    "help_detect":      "roda o detector e grava o CSV de detecções",
    "help_eval":        "avalia detecções contra labels (AP por classe e mAP)",

    # Resultados
    "done_synth":       "{n} sequências gravadas em {out}",
    "done_encode":      "{n} imagens gravadas em {out}",
    "done_priors":      "{n} priors gravados em {out}",
    "done_train":       "Checkpoint gravado em {out} (época {epoch}, loss {loss:.6f})",
    "done_detect":      "{n} detecções gravadas em {out}",
    "done_eval":        "Tabela de AP gravada em {out}",
    "done_preset":      "Preset '{name}' gravado em {out}",
    "resume_from":      "Retomando de {path} (época {epoch})",
    "nothing_to_train": "Checkpoint já está na época {epoch}; nada a treinar",

    # Erros
    "err_validation":   "Erro: {e}",
    "err_io":           "Erro de E/S: {e}",
    "err_no_command":   "Nenhum subcomando informado (use --help)",
    "err_usage":        "Uso inválido: {e}",
}


# ── English ───────────────────────────────────────────────────────────────────

_EN: dict[str, str] = {
    # Parser
    "prog_desc":        "Action detection in skeleton sequences (action images + single-shot detector).",
    "help_config":      "JSON config file (merged over the defaults)",
    "help_preset":      "name of a preset in the presets/ folder",
    "help_dump":        "print the resolved configuration and exit",
    "help_save_preset": "save the resolved configuration as a preset (only the differences from the defaults)",
    "help_seed":        "seed (overrides synth.seed and train.seed)",
    "help_jobs":        "number of worker threads",
    "help_lang":        "message language (en, pt)",
    "help_verbose":     "debug logging",
    "help_synth":       "generate a synthetic dataset (train/ and test/)",
    "help_encode":      "encode skeletons as action images (PNG + JSON)",
    "help_priors":      "export the network's default boxes as CSV",
    "help_train":       "train the detector and write checkpoint + loss log",
    "help_detect":      "run the detector and write the detections CSV",
    "help_eval":        "score detections against labels (per-class AP and mAP)",

    # Results
    "done_synth":       "{n} sequences written to {out}",
    "done_encode":      "{n} images written to {out}",
    "done_priors":      "{n} priors written to {out}",
    "done_train":       "Checkpoint written to {out} (epoch {epoch}, loss {loss:.6f})",
    "done_detect":      "{n} detections written to {out}",
    "done_eval":        "AP table written to {out}",
    "done_preset":      "Preset '{name}' written to {out}",
    "resume_from":      "Resuming from {path} (epoch {epoch})",
    "nothing_to_train": "Checkpoint is already at epoch {epoch}; nothing to train",

    # Errors
    "err_validation":   "Error: {e}",
    "err_io":           "I/O error: {e}",
    "err_no_command":   "No subcommand given (see --help)",
    "err_usage":        "Invalid usage: {e}",
}
