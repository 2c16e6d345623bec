"""Bundled task corpus: three training problems and a held-out evaluation set."""

from pathlib import Path

_HERE = Path(__file__).parent


def corpus_dir() -> Path:
    return _HERE


def training_task_paths() -> list[Path]:
    return [_HERE / name for name in ("e1.json", "e2.json", "e3.json")]


def eval_task_paths() -> list[Path]:
    return sorted(p for p in _HERE.glob("eval_*.json"))
