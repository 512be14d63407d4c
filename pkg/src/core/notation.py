"""Wreath-recursion text such as ``a=(a,1,1)(1 2); b=(1,1,b)(2 3)``."""
import re
from typing import List, Optional, Sequence

from src.core.errors import ArgumentError
from src.core.wreath_core import Permutation, RecursionMachine, State

_RECURSION = re.compile(r"^\s*([^=\s]+)\s*=\s*(?:1|(\([^()]*,[^()]*\))?\s*((?:\([^()]*\))*))\s*$")


def format_state(machine: RecursionMachine, state: State) -> str:
    names = machine.names
    children = ["1" if c is None else names[c] for c in state.children]
    body = ""
    if any(c is not None for c in state.children):
        body = "(" + ",".join(children) + ")"
    if not state.root.is_identity():
        body += str(state.root)
    return f"{state.name}={body or '1'}"


def format_machine(machine: RecursionMachine, names: Optional[Sequence[str]] = None) -> str:
    """States joined by '; ', optionally only the listed ones in that order"""
    states = machine.states if names is None else [machine.states[machine.index(n)] for n in names]
    return "; ".join(format_state(machine, s) for s in states)


def parse_machine(text: str, degree: int = 3) -> RecursionMachine:
    """Inverse of format_machine; the section tuple and the cycles are both optional"""
    rows = []
    for chunk in re.split(r"[;\n]", text):
        chunk = chunk.strip()
        if not chunk:
            continue
        match = _RECURSION.match(chunk)
        if not match:
            raise ArgumentError(f"cannot read recursion {chunk!r}")
        name, sections, cycles = match.groups()
        if sections:
            children: List[Optional[str]] = [c.strip() for c in sections[1:-1].split(",")]
            if len(children) != degree:
                raise ArgumentError(f"{name} needs {degree} sections, got {len(children)}")
        else:
            children = [None] * degree
        root = Permutation.parse(degree, cycles or "()")
        rows.append((name, root, children))
    return RecursionMachine.from_recursions(degree, rows)
