"""Pipeline configuration files: agents, demo bank, guidelines, retry budget."""
from __future__ import annotations

import json
from pathlib import Path

from ..agents import AgentConfig, AgentRole, BackendHandle, GenerationParams
from ..errors import SchemaError
from ..factcheck import GuidelineSet, default_guidelines, load_guidelines
from ..pipeline import PipelineConfig
from ..prompting.demos import DemoBank, load_bank

CONFIG_SCHEMA_VERSION = "pipelineconfig/v1"


def _backend_from_json(doc: dict, base_dir: Path) -> BackendHandle:
    kind = doc.get("kind")
    if kind == "scripted":
        table_path = doc.get("script_path")
        if table_path is None:
            table = doc.get("script_table", {})
        else:
            path = Path(table_path)
            if not path.is_absolute():
                path = base_dir / path
            table = json.loads(path.read_text(encoding="utf-8"))
        return BackendHandle(
            kind="scripted",
            script_table=table,
            latency_ms=doc.get("latency_ms", 0),
        )
    if kind == "http":
        return BackendHandle(
            kind="http",
            endpoint_url=doc["endpoint_url"],
            timeout_ms=doc.get("timeout_ms", 30_000),
            max_retries=doc.get("max_retries", 2),
            retry_backoff_ms=doc.get("retry_backoff_ms", 250),
        )
    raise SchemaError(f"unknown backend kind {kind!r}", pointer="/agents")


def _agent_from_json(role: AgentRole, doc: dict, base_dir: Path) -> AgentConfig:
    params = doc.get("params", {})
    return AgentConfig(
        role=role,
        backend=_backend_from_json(doc["backend"], base_dir),
        model_name=doc.get("model_name", "unknown"),
        params=GenerationParams(
            temperature=params.get("temperature", 0.0),
            max_tokens=params.get("max_tokens", 1024),
            seed=params.get("seed"),
        ),
        vision=doc.get("vision", role is AgentRole.T2F),
    )


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"cannot read pipeline config: {exc}") from exc
    if doc.get("schema_version") != CONFIG_SCHEMA_VERSION:
        raise SchemaError(
            f"expected schema_version {CONFIG_SCHEMA_VERSION!r}, got {doc.get('schema_version')!r}",
            pointer="/schema_version",
        )
    base_dir = path.parent

    agents: dict[AgentRole, AgentConfig] = {}
    for key, agent_doc in doc.get("agents", {}).items():
        role = AgentRole(key)
        agents[role] = _agent_from_json(role, agent_doc, base_dir)

    bank_ref = doc.get("demo_bank")
    if bank_ref is None:
        bank = DemoBank(demos=())
    else:
        bank_path = Path(bank_ref)
        if not bank_path.is_absolute():
            bank_path = base_dir / bank_path
        bank = load_bank(bank_path)

    guidelines_ref = doc.get("guidelines")
    if guidelines_ref is None:
        guidelines: GuidelineSet = default_guidelines()
    else:
        guide_path = Path(guidelines_ref)
        if not guide_path.is_absolute():
            guide_path = base_dir / guide_path
        guidelines = load_guidelines(guide_path)

    return PipelineConfig(
        agents=agents,
        demo_bank=bank,
        guidelines=guidelines,
        max_factcheck_retries=doc.get("max_factcheck_retries", 2),
        demo_seed=doc.get("demo_seed", 0),
        demos_per_prompt=doc.get("demos_per_prompt", 3),
        created_at_override=doc.get("created_at_override"),
    )
