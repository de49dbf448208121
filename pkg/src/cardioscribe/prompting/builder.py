"""Prompt assembly: role instructions + subgroup-matched demos + patient payload."""
from __future__ import annotations

from ..agents import AgentRole, ChatMessage, ImagePart, Part, Role, TextPart
from ..domain.types import FindingItem, PatientBundle
from .demos import Demo
from .rendering import (
    render_biostatistics,
    render_guideline_citations,
    render_metrics,
    render_numbered_findings,
    render_tracing_captions,
)
from .templates import template_for


def _demo_message(demo: Demo) -> ChatMessage:
    text = f"Example case:\n{demo.input_excerpt}\n\n{demo.adjudicated_output}"
    return ChatMessage.text(Role.USER, text)


def patient_payload_text(
    role: AgentRole,
    bundle: PatientBundle,
    upstream: tuple[FindingItem, ...] | None = None,
    guidelines=None,
) -> str:
    """The role-specific input rendering, shared with dataset export."""
    bio = render_biostatistics(bundle.biostatistics)
    if role is AgentRole.M2F:
        return f"Patient information:\n{bio}\n\n{render_metrics(bundle.metrics)}"
    if role is AgentRole.T2F:
        return f"Patient information:\n{bio}\n\n{render_tracing_captions(bundle.tracings)}"
    if role is AgentRole.F2I:
        if upstream is None:
            raise ValueError("the interpretation agent needs upstream findings")
        sections = [f"Patient information:\n{bio}", render_numbered_findings(upstream)]
        if guidelines is not None:
            sections.append(render_guideline_citations(guidelines.rules))
        return "\n\n".join(sections)
    raise ValueError(f"unknown role {role!r}")


def build_prompt(
    role: AgentRole,
    bundle: PatientBundle,
    demos: tuple[Demo, ...] | list[Demo] = (),
    upstream: tuple[FindingItem, ...] | None = None,
    guidelines=None,
) -> list[ChatMessage]:
    """[system] + one user message per demo + the patient payload.

    The tracings agent gets one image part per tracing, in tracing order,
    appended to the payload message.
    """
    template = template_for(role)
    messages = [ChatMessage.text(Role.SYSTEM, template.system_text)]
    messages.extend(_demo_message(d) for d in demos)

    payload = patient_payload_text(role, bundle, upstream=upstream, guidelines=guidelines)
    payload += f"\n\nRespond in exactly this format:\n{template.response_skeleton}"
    if role is AgentRole.T2F and bundle.tracings:
        parts: list[Part] = [TextPart(payload)]
        parts.extend(ImagePart(t.image_ref) for t in bundle.tracings)
        messages.append(ChatMessage(role=Role.USER, parts=tuple(parts)))
    else:
        messages.append(ChatMessage.text(Role.USER, payload))
    return messages


REPROMPT_INSTRUCTION = "Your previous response was not parseable. Respond only in the itemized format:"


def reprompt_messages(messages: list[ChatMessage], skeleton: str) -> list[ChatMessage]:
    """One bounded self-repair attempt after a FormatError."""
    return messages + [ChatMessage.text(Role.USER, f"{REPROMPT_INSTRUCTION}\n{skeleton}")]
