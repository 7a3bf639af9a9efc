"""Run configuration: one structured document plus command-line overrides.

Precedence is flag > config file > built-in default. Every threshold and
budget knob is range-checked at load so bad values fail before any
backend traffic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from maple.backend import HashEmbedder, OpenAIBackend, ReplayBackend, Transcript
from maple.errors import ConfigError
from maple.memory import MemoryStore, RetrievalConfig
from maple.orchestrator import EngineConfig, RunMode


@dataclass
class RunConfig:
    # backend
    backend: str = "openai"                  # openai | replay
    base_url: str = "http://localhost:8000/v1"
    chat_model: str = "default"
    embed_model: str = ""
    transcript: str = ""                     # replay source
    # embedder
    embedder: str = "hash"                   # hash | openai
    embedding_dim: int = 256
    # retrieval; delta_solver=None picks 0.3 for QA datasets and 0.5 for
    # fact verification at run time
    k: int = 5
    k_min: int = 2
    delta_solver: float | None = None
    delta_archiver: float = 0.7
    # budgets
    max_inner_steps: int = 5
    max_outer_rounds: int = 5
    backend_retries: int = 2
    # run
    mode: str = "inference"                  # inference | memory_building
    dataset: str = ""
    dataset_format: str = "normalized_jsonl"
    store: str = ""                          # load if existing; save target in memory building
    output_dir: str = "runs/latest"
    workers: int = 1

    def __post_init__(self):
        if self.backend not in ("openai", "replay"):
            raise ConfigError(f"backend must be openai or replay, got {self.backend!r}")
        if self.embedder not in ("hash", "openai"):
            raise ConfigError(f"embedder must be hash or openai, got {self.embedder!r}")
        if self.mode not in ("inference", "memory_building"):
            raise ConfigError(f"mode must be inference or memory_building, got {self.mode!r}")
        if self.backend == "replay" and not self.transcript:
            raise ConfigError("replay backend needs a transcript path")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.embedding_dim < 1:
            raise ConfigError("embedding_dim must be >= 1")
        try:
            self.retrieval_config()
            self.engine_config()
        except (ValueError, ConfigError) as exc:
            raise ConfigError(str(exc)) from exc

    def resolve_delta_solver(self, task_kinds=()) -> float:
        if self.delta_solver is not None:
            return self.delta_solver
        kinds = set(task_kinds)
        return 0.5 if kinds and kinds <= {"fact_verification"} else 0.3

    def retrieval_config(self, task_kinds=()) -> RetrievalConfig:
        return RetrievalConfig(
            k=self.k,
            k_min=self.k_min,
            delta_solver=self.resolve_delta_solver(task_kinds),
            delta_archiver=self.delta_archiver,
        )

    def engine_config(self, task_kinds=()) -> EngineConfig:
        return EngineConfig(
            retrieval=self.retrieval_config(task_kinds),
            max_inner_steps=self.max_inner_steps,
            max_outer_rounds=self.max_outer_rounds,
            backend_retries=self.backend_retries,
        )

    def run_mode(self) -> RunMode:
        return RunMode(self.mode)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_run_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional YAML/JSON document plus overrides."""
    data: dict = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a mapping")
        data.update(loaded)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def make_embedder(cfg: RunConfig):
    if cfg.embedder == "hash":
        return HashEmbedder(dim=cfg.embedding_dim)
    if not cfg.embed_model:
        raise ConfigError("openai embedder needs embed_model")
    return OpenAIBackend(
        base_url=cfg.base_url,
        chat_model=cfg.chat_model,
        embed_model=cfg.embed_model,
        embedding_dim=cfg.embedding_dim,
    )


def make_chat_backend(cfg: RunConfig):
    if cfg.backend == "replay":
        return ReplayBackend(Transcript.load(cfg.transcript))
    return OpenAIBackend(
        base_url=cfg.base_url,
        chat_model=cfg.chat_model,
        embed_model=cfg.embed_model or None,
        embedding_dim=cfg.embedding_dim,
    )


def make_store(cfg: RunConfig, embedder, clock=None) -> MemoryStore:
    if cfg.store and Path(cfg.store).exists():
        return MemoryStore.load(cfg.store, embedder, clock=clock)
    return MemoryStore(embedder, clock=clock)
