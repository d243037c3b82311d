"""Extraction of tagged fenced sections from LLM responses.

Responses are expected to carry their payload in triple-backtick fences whose
info string is an uppercase tag (e.g. ``DIAGNOSIS``). Fences survive
conversational chatter around them, unlike JSON, and program text full of
braces cannot break them.
"""

from __future__ import annotations

import re


class ParseFailure(Exception):
    """Response text does not contain the required tagged sections."""


def extract_tagged_section(text: str, tag: str) -> str | None:
    """Inner text of the first ```TAG fence, or None when absent."""
    pattern = re.compile(
        r"```" + re.escape(tag) + r"[ \t]*\n(.*?)\n?```",
        re.DOTALL,
    )
    match = pattern.search(text)
    if match is None:
        return None
    return match.group(1)


def first_fence(text: str) -> str | None:
    """Inner text of the first fenced block of any tag (``python``, bare, ...)."""
    match = re.search(r"```[^\n`]*\n(.*?)\n?```", text, re.DOTALL)
    if match is None:
        return None
    return match.group(1)


def strip_fences(text: str) -> str:
    """Drop fence marker lines, keeping the content between and around them."""
    lines = [line for line in text.splitlines() if not line.lstrip().startswith("```")]
    return "\n".join(lines).strip()
