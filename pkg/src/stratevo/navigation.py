"""Archive-level landscape summaries on a fixed generation schedule.

Every ``delta`` generations the whole archive's (generation, fitness,
strategy description) triples are summarized by one chat call into four
fields: effective families, saturated families, underexplored directions,
and concrete guidance for the next mutations. The summary stays active until
the next scheduled refresh; a failed refresh keeps the previous one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .archive import Archive
from .articulation import load_template
from .parsing import ParseFailure, extract_tagged_section

DEFAULT_ENTRY_CAP = 200

_SECTION_TAGS = {
    "effective": "EFFECTIVE",
    "saturated": "SATURATED",
    "underexplored": "UNEXPLORED",
    "concrete": "GUIDANCE",
}


@dataclass
class LandscapeGuidance:
    """Four-part strategy-landscape summary, valid until the next refresh."""

    effective: str
    saturated: str
    underexplored: str
    concrete: str
    refreshed_at: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "refreshed_at": self.refreshed_at,
            "effective": self.effective,
            "saturated": self.saturated,
            "underexplored": self.underexplored,
            "concrete": self.concrete,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "LandscapeGuidance":
        return cls(
            effective=data["effective"],
            saturated=data["saturated"],
            underexplored=data["underexplored"],
            concrete=data["concrete"],
            refreshed_at=int(data["refreshed_at"]),
        )


def should_refresh(t: int, delta: int) -> bool:
    """True on the fixed schedule: every ``delta``-th generation."""
    if t < 1:
        raise ValueError(f"generation must be >= 1, got {t}")
    if delta < 1:
        raise ValueError(f"refresh interval must be >= 1, got {delta}")
    return t % delta == 0


def _entry_line(generation: int, fitness: float, description: str) -> str:
    flat = " ".join(description.split())
    return f"- generation {generation} | fitness {fitness!r} | strategy: {flat}"


def build_sln_prompt(archive: Archive, entry_cap: int = DEFAULT_ENTRY_CAP) -> str:
    """List (generation, fitness, strategy) for every live entry, oldest first.

    Beyond ``entry_cap`` entries only the most recent ones are listed and a
    leading line counts the omitted older entries. Program source never
    appears here.
    """
    if len(archive) == 0:
        raise ValueError("cannot summarize an empty archive")
    entries = sorted(archive.live(), key=lambda e: (e.generation, e.id))
    lines: list[str] = []
    if len(entries) > entry_cap:
        omitted = len(entries) - entry_cap
        lines.append(f"({omitted} older entries omitted)")
        entries = entries[-entry_cap:]
    lines.extend(
        _entry_line(e.generation, e.fitness, e.strategy_description) for e in entries
    )
    return load_template("sln_prompt.txt").substitute(entries_block="\n".join(lines))


def parse_guidance(text: str, t: int) -> LandscapeGuidance:
    """Extract the four tagged sections; any missing or empty section fails."""
    values: dict[str, str] = {}
    for field, tag in _SECTION_TAGS.items():
        section = extract_tagged_section(text, tag)
        if section is None or not section.strip():
            raise ParseFailure(f"response has no non-empty {tag} section")
        values[field] = section.strip()
    return LandscapeGuidance(refreshed_at=t, **values)


def render_guidance_response(
    effective: str, saturated: str, underexplored: str, concrete: str
) -> str:
    """Canonical well-formed refresh response (used by mocks and tests)."""
    return (
        f"```EFFECTIVE\n{effective}\n```\n\n"
        f"```SATURATED\n{saturated}\n```\n\n"
        f"```UNEXPLORED\n{underexplored}\n```\n\n"
        f"```GUIDANCE\n{concrete}\n```\n"
    )
