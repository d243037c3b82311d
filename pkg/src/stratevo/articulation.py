"""Mutation prompting: diagnose, direct, implement.

Builds the single structured prompt that asks the model to diagnose the
parent program, state a strategy direction, and implement a new candidate.
Retrieved inspirations are rendered as strategy descriptions plus fitness
only; their source code is deliberately withheld so the model reasons at the
level of algorithmic ideas. The diagnosis section of the response is
transient: only the strategy description and the program persist downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from string import Template
from typing import Protocol, TYPE_CHECKING

from .parsing import ParseFailure, extract_tagged_section, strip_fences
from .strategy_space import InspirationSet

if TYPE_CHECKING:
    from .archive import ArchiveEntry
    from .navigation import LandscapeGuidance
    from .providers import ChatExchange

UNDESCRIBED_SENTINEL = "UNDESCRIBED CANDIDATE"

_ROLE_GLOSSES = {
    "best": "current best program",
    "diverse": "most complementary to the current best",
    "intra": "same strategy family as the parent",
    "cross": "a different strategy family",
}

_templates: dict[str, Template] = {}


class ChatFn(Protocol):
    def complete(self, system: str, user: str) -> "ChatExchange": ...


def load_template(name: str) -> Template:
    if name not in _templates:
        text = (
            resources.files("stratevo").joinpath("templates", name).read_text("utf-8")
        )
        _templates[name] = Template(text)
    return _templates[name]


@dataclass
class SaResponse:
    """Parsed mutation response; diagnosis is never archived."""

    diagnosis: str
    strategy: str
    program: str


def _inspiration_block(inspirations: InspirationSet) -> str:
    picks = [p for p in inspirations.picks if p.entry.id != inspirations.parent.id]
    if not picks:
        return ""
    lines = ["## Inspirations (strategy summaries only)"]
    for i, pick in enumerate(picks, start=1):
        gloss = _ROLE_GLOSSES.get(pick.role, pick.role)
        lines.append(f"### Inspiration {i} (role: {pick.role}, {gloss})")
        lines.append(f"Fitness: {pick.entry.fitness!r}")
        lines.append(f"Strategy: {pick.entry.strategy_description}")
        lines.append("")
    return "\n".join(lines) + "\n"


def _guidance_block(guidance: "LandscapeGuidance | None") -> str:
    if guidance is None:
        return ""
    return (
        f"## Strategy landscape guidance (refreshed at generation "
        f"{guidance.refreshed_at})\n"
        f"Effective directions (exploit further): {guidance.effective}\n"
        f"Saturated directions (avoid these): {guidance.saturated}\n"
        f"Underexplored directions (consider these): {guidance.underexplored}\n"
        f"Concrete guidance: {guidance.concrete}\n"
        "Respect this guidance: avoid the saturated strategy families and "
        "consider the underexplored alternatives.\n\n"
    )


def build_sa_prompt(
    parent: "ArchiveEntry",
    inspirations: InspirationSet,
    guidance: "LandscapeGuidance | None",
    task_brief: str,
) -> str:
    """Render the diagnose/direct/implement prompt.

    The parent appears with full source; every other pick appears only as
    (role, fitness, strategy description).
    """
    if inspirations.parent.id != parent.id:
        raise ValueError("inspiration set was built for a different parent")
    return load_template("sa_prompt.txt").substitute(
        task_brief=task_brief,
        parent_fitness=repr(parent.fitness),
        parent_strategy=parent.strategy_description,
        parent_program=parent.program_source,
        inspiration_block=_inspiration_block(inspirations),
        guidance_block=_guidance_block(guidance),
    )


def parse_sa_response(text: str) -> SaResponse:
    """Extract the three tagged sections; chatter outside the fences is fine.

    Diagnosis may be absent or empty. A missing or empty STRATEGY or PROGRAM
    section raises :class:`ParseFailure`.
    """
    diagnosis = extract_tagged_section(text, "DIAGNOSIS") or ""
    strategy = extract_tagged_section(text, "STRATEGY")
    program = extract_tagged_section(text, "PROGRAM")
    if strategy is None or not strategy.strip():
        raise ParseFailure("response has no non-empty STRATEGY section")
    if program is None or not program.strip():
        raise ParseFailure("response has no non-empty PROGRAM section")
    return SaResponse(
        diagnosis=diagnosis.strip(), strategy=strategy.strip(), program=program
    )


def render_sa_response(response: SaResponse) -> str:
    """Canonical well-formed response text (used by mocks and round-trip tests)."""
    return (
        f"```DIAGNOSIS\n{response.diagnosis}\n```\n\n"
        f"```STRATEGY\n{response.strategy}\n```\n\n"
        f"```PROGRAM\n{response.program}\n```\n"
    )


def build_describe_prompt(program: str, task_brief: str) -> str:
    return load_template("describe_prompt.txt").substitute(
        task_brief=task_brief, program=program
    )


def describe_program(program: str, task_brief: str, chat: ChatFn) -> str:
    """One chat call producing a concise strategy description for a program.

    The response is returned stripped of any code fences; an empty response
    maps to a fixed sentinel so the entry remains embeddable.
    """
    if not program:
        raise ValueError("cannot describe an empty program")
    prompt = build_describe_prompt(program, task_brief)
    exchange = chat.complete(
        system="You explain what algorithms do, concisely and precisely.",
        user=prompt,
    )
    text = strip_fences(exchange.response_text)
    return text if text else UNDESCRIBED_SENTINEL
