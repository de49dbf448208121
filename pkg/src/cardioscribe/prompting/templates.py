"""Per-role prompt templates, loaded from the packaged data file."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..agents import AgentRole
from ..errors import TemplateMissing
from ..util import load_packaged_json


@dataclass(frozen=True)
class PromptTemplate:
    role: AgentRole
    system_text: str
    response_skeleton: str
    item_marker: str


@lru_cache(maxsize=1)
def load_templates() -> dict[AgentRole, PromptTemplate]:
    raw = load_packaged_json("prompt_templates.json")
    templates: dict[AgentRole, PromptTemplate] = {}
    for key, spec in raw["templates"].items():
        role = AgentRole(key)
        templates[role] = PromptTemplate(
            role=role,
            system_text=spec["system_text"],
            response_skeleton=spec["response_skeleton"],
            item_marker=spec["item_marker"],
        )
    for role in AgentRole:
        if role not in templates:
            raise TemplateMissing(f"no prompt template for role {role.value}")
    return templates


def template_for(role: AgentRole) -> PromptTemplate:
    templates = load_templates()
    if role not in templates:
        raise TemplateMissing(f"no prompt template for role {role.value}")
    return templates[role]
