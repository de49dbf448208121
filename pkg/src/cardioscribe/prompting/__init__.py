from .builder import REPROMPT_INSTRUCTION, build_prompt, patient_payload_text, reprompt_messages
from .demos import (
    DEMOBANK_SCHEMA_VERSION,
    Demo,
    DemoBank,
    DemoSelection,
    SelectedDemo,
    bank_from_json,
    bank_to_json,
    demo_rank,
    load_bank,
    matches_at_level,
    select_demos,
)
from .itemized import (
    ItemizedParse,
    extract_parameters,
    extract_tags,
    infer_modality,
    parse_itemized,
    render_itemized,
)
from .rendering import (
    render_biostatistics,
    render_guideline_citations,
    render_metrics,
    render_numbered_findings,
    render_tracing_captions,
)
from .templates import PromptTemplate, load_templates, template_for

__all__ = [
    "DEMOBANK_SCHEMA_VERSION",
    "Demo",
    "DemoBank",
    "DemoSelection",
    "ItemizedParse",
    "PromptTemplate",
    "REPROMPT_INSTRUCTION",
    "SelectedDemo",
    "bank_from_json",
    "bank_to_json",
    "build_prompt",
    "demo_rank",
    "extract_parameters",
    "extract_tags",
    "infer_modality",
    "load_bank",
    "load_templates",
    "matches_at_level",
    "parse_itemized",
    "patient_payload_text",
    "render_biostatistics",
    "render_guideline_citations",
    "render_itemized",
    "render_metrics",
    "render_numbered_findings",
    "render_tracing_captions",
    "reprompt_messages",
    "select_demos",
    "template_for",
]
