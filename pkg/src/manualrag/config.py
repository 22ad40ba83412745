"""Service configuration: TOML loading and validation."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .embedding import DEFAULT_HASH_DIM, EmbedderKind, EmbedderSpec
from .errors import ConfigInvalid
from .llm import LlmSpec

ALLOWED_CHUNK_SIZES = (400, 800, 1000)


@dataclass
class ServiceConfig:
    listen_address: str = "127.0.0.1:8080"
    corpus_dir: Optional[Path] = None
    corpus_format: str = "xml"
    index_path: Optional[Path] = None
    chunk_size: int = 400
    allow_any_chunk_size: bool = False
    k: int = 4
    concurrency_limit: int = 2
    request_timeout: float = 120.0
    eval_dir: Path = Path("eval_runs")
    embedder: EmbedderSpec = field(
        default_factory=lambda: EmbedderSpec(
            kind=EmbedderKind.DETERMINISTIC_HASH, dim=DEFAULT_HASH_DIM
        )
    )
    llm: LlmSpec = field(
        default_factory=lambda: LlmSpec(
            endpoint="stub:echo-first-source", model_name="stub-echo-first-source"
        )
    )
    judges: tuple[LlmSpec, ...] = ()

    def validate(self) -> None:
        if self.chunk_size not in ALLOWED_CHUNK_SIZES and not self.allow_any_chunk_size:
            raise ConfigInvalid(
                f"chunk_size {self.chunk_size} outside {ALLOWED_CHUNK_SIZES}; "
                "set allow_any_chunk_size = true to override"
            )
        if self.chunk_size < 50:
            raise ConfigInvalid(f"chunk_size must be >= 50, got {self.chunk_size}")
        if self.k < 1:
            raise ConfigInvalid(f"k must be >= 1, got {self.k}")
        if self.concurrency_limit < 1:
            raise ConfigInvalid("concurrency_limit must be >= 1")
        for judge_spec in self.judges:
            if judge_spec.model_name == self.llm.model_name:
                raise ConfigInvalid(
                    f"judge {judge_spec.model_name!r} duplicates the answering model"
                )


def _llm_spec_from(table: dict, where: str) -> LlmSpec:
    try:
        return LlmSpec(
            endpoint=table["endpoint"],
            model_name=table["model_name"],
            top_p=float(table.get("top_p", 0.9)),
            temperature=(
                float(table["temperature"]) if "temperature" in table else None
            ),
            timeout=float(table.get("timeout", 120.0)),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigInvalid(f"bad [{where}] section: {exc}") from exc


def _embedder_spec_from(table: dict) -> EmbedderSpec:
    try:
        return EmbedderSpec(
            kind=EmbedderKind(table.get("kind", "deterministic_hash")),
            dim=table.get("dim"),
            endpoint=table.get("endpoint"),
            model_name=table.get("model_name"),
        )
    except ValueError as exc:
        raise ConfigInvalid(f"bad [embedder] section: {exc}") from exc


def load_config(path: Union[str, Path]) -> ServiceConfig:
    """Parse and validate a TOML service configuration file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc

    service = data.get("service", {})
    config = ServiceConfig()
    if "listen_address" in service:
        config.listen_address = service["listen_address"]
    if "corpus_dir" in service:
        config.corpus_dir = Path(service["corpus_dir"])
    if "corpus_format" in service:
        config.corpus_format = service["corpus_format"]
    if "index_path" in service:
        config.index_path = Path(service["index_path"])
    if "chunk_size" in service:
        config.chunk_size = int(service["chunk_size"])
    if "allow_any_chunk_size" in service:
        config.allow_any_chunk_size = bool(service["allow_any_chunk_size"])
    if "k" in service:
        config.k = int(service["k"])
    if "concurrency_limit" in service:
        config.concurrency_limit = int(service["concurrency_limit"])
    if "request_timeout" in service:
        config.request_timeout = float(service["request_timeout"])
    if "eval_dir" in service:
        config.eval_dir = Path(service["eval_dir"])
    if "embedder" in data:
        config.embedder = _embedder_spec_from(data["embedder"])
    if "llm" in data:
        config.llm = _llm_spec_from(data["llm"], "llm")
    if "judges" in data:
        config.judges = tuple(
            _llm_spec_from(j, "judges") for j in data["judges"]
        )
    config.validate()
    return config
