"""Reader and writer for the line-oriented ``.scenario`` format.

Sections are introduced by ``[name]`` headers; every other non-blank line is
``key = value``.  ``#`` starts a comment.  Unknown sections and keys are
rejected.  See ``data/paper.scenario`` for the reference experiment.
"""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path

from .errors import ParseError, ValidationError
from .fuzzy import INPUT_LABELS
from .scenario import (
    ControllerConfig,
    MacConfig,
    NodeSpec,
    ScenarioSpec,
    TimelineEvent,
)

SECTIONS = ("run", "nodes", "routes", "timeline", "mac", "controller")

_RUN_KEYS = {"scheme": str, "seed": int, "end_time": float, "feedback": str}
_MAC_KEYS = {f.name: f.type for f in dataclasses.fields(MacConfig)}
_CTRL_SCALARS = {"setpoint": float, "t_flc": float, "h_init": float, "h_min": float,
                 "h_max": float, "defuzz_resolution": int}
_CTRL_PEAKS = ("e_peaks", "de_peaks", "dh_peaks")
_ACTIONS = {"on": "activate", "off": "deactivate"}


def paper_scenario_path() -> Path:
    return Path(str(resources.files("flcqm") / "data" / "paper.scenario"))


def _number(text: str, kind, line: int, key: str):
    try:
        if kind in (int, "int"):
            return int(text)
        return float(text)
    except ValueError:
        raise ParseError(f"expected a number, got {text!r}", line, key) from None


def _tokenize(text: str):
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]", lineno)
            if section in seen:
                raise ParseError(f"section [{section}] appears twice", lineno)
            seen.add(section)
            continue
        if section is None:
            raise ParseError("key/value line before any section header", lineno)
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        yield lineno, section, key, value


def parse_config(source: str | Path, *, text: str | None = None) -> ScenarioSpec:
    """Parse and validate a scenario file (or ``text`` if given)."""
    if text is None:
        text = Path(source).read_text()
    run, mac, ctrl = {}, {}, {}
    nodes, routes, timeline = [], [], []
    rule_rows: dict[str, tuple[str, ...]] = {}
    seen_keys: set[tuple[str, str]] = set()

    for lineno, section, key, value in _tokenize(text):
        if (section, key) in seen_keys:
            raise ParseError(f"duplicate key in [{section}]", lineno, key)
        seen_keys.add((section, key))

        if section == "run":
            if key not in _RUN_KEYS:
                raise ParseError("unknown key in [run]", lineno, key)
            kind = _RUN_KEYS[key]
            run[key] = value if kind is str else _number(value, kind, lineno, key)
        elif section == "mac":
            if key not in _MAC_KEYS:
                raise ParseError("unknown key in [mac]", lineno, key)
            mac[key] = _number(value, _MAC_KEYS[key], lineno, key)
        elif section == "controller":
            if key in _CTRL_SCALARS:
                ctrl[key] = _number(value, _CTRL_SCALARS[key], lineno, key)
            elif key in _CTRL_PEAKS:
                ctrl[key] = tuple(_number(v, float, lineno, key) for v in value.split())
            elif key.startswith("rule.") and key[5:] in INPUT_LABELS:
                rule_rows[key[5:]] = tuple(value.split())
            else:
                raise ParseError("unknown key in [controller]", lineno, key)
        elif section == "nodes":
            parts = value.split()
            if not parts or len(parts) > 2:
                raise ParseError("expected '<kind> [period]'", lineno, key)
            period = _number(parts[1], float, lineno, key) if len(parts) == 2 else None
            nodes.append(NodeSpec(key, parts[0], period))
        elif section == "routes":
            hops = [h.strip() for h in value.split("->")]
            if any(not h for h in hops):
                raise ParseError("empty hop in route", lineno, key)
            routes.append((key, *hops))
        elif section == "timeline":
            for item in value.split(","):
                parts = item.split()
                if len(parts) != 2 or parts[0] not in _ACTIONS:
                    raise ParseError(f"expected 'on <time>' or 'off <time>', got {item.strip()!r}",
                                     lineno, key)
                timeline.append(TimelineEvent(_number(parts[1], float, lineno, key),
                                              key, _ACTIONS[parts[0]]))

    if rule_rows:
        ctrl["rules"] = tuple(rule_rows.items())
    try:
        return ScenarioSpec(
            nodes=tuple(nodes),
            routes=tuple(routes),
            mac=MacConfig(**mac),
            timeline=tuple(sorted(timeline, key=lambda ev: ev.time)),
            controller=ControllerConfig(**ctrl),
            **run,
        )
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def _num(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def dump_config(spec: ScenarioSpec) -> str:
    out = ["[run]"]
    for key in _RUN_KEYS:
        out.append(f"{key} = {_num(getattr(spec, key))}")
    out += ["", "[nodes]"]
    for n in spec.nodes:
        out.append(f"{n.name} = {n.kind}" + (f" {_num(n.period)}" if n.period is not None else ""))
    out += ["", "[routes]"]
    for r in spec.routes:
        out.append(f"{r[0]} = {' -> '.join(r[1:])}")
    out += ["", "[timeline]"]
    by_node: dict[str, list[str]] = {}
    for ev in spec.timeline:
        word = "on" if ev.action == "activate" else "off"
        by_node.setdefault(ev.node, []).append(f"{word} {_num(ev.time)}")
    for name, items in by_node.items():
        out.append(f"{name} = {', '.join(items)}")
    out += ["", "[mac]"]
    for key in _MAC_KEYS:
        out.append(f"{key} = {_num(getattr(spec.mac, key))}")
    out += ["", "[controller]"]
    c = spec.controller
    for key in _CTRL_SCALARS:
        out.append(f"{key} = {_num(getattr(c, key))}")
    for key in _CTRL_PEAKS:
        out.append(f"{key} = {' '.join(_num(p) for p in getattr(c, key))}")
    for label, row in c.rules:
        out.append(f"rule.{label} = {' '.join(row)}")
    return "\n".join(out) + "\n"
