# Pacote core — Lógica do SkelBox (sem dependência de CLI)
