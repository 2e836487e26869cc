"""Readers and writers for graphs, step graphons, configurations and results."""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

from .model import GRAPH, GRAPHON, ChipConfig, FiniteGraph, ModelError, StepGraphon
from .rationals import format_fraction, to_fraction


class ParseError(ValueError):
    """Malformed input; the message names the offending location."""

    def __init__(self, source: str, where: str, message: str):
        super().__init__(f"{source}: {where}: {message}")
        self.source = source
        self.where = where


def parse_graph(text: str, source: str = "<graph>") -> FiniteGraph:
    lines = [(no, ln.split("#", 1)[0].strip()) for no, ln in enumerate(text.splitlines(), 1)]
    lines = [(no, ln) for no, ln in lines if ln]
    if not lines:
        raise ParseError(source, "line 1", "missing vertex count")
    no, first = lines[0]
    try:
        n = int(first)
    except ValueError:
        raise ParseError(source, f"line {no}", f"vertex count {first!r} is not an integer") from None
    if n < 1:
        raise ParseError(source, f"line {no}", "vertex count must be positive")
    edges = []
    for no, ln in lines[1:]:
        parts = ln.split()
        if len(parts) not in (2, 3):
            raise ParseError(source, f"line {no}", f"expected 'u v [mult]', got {ln!r}")
        try:
            nums = [int(p) for p in parts]
        except ValueError:
            raise ParseError(source, f"line {no}", f"non-integer field in {ln!r}") from None
        u, v = nums[0], nums[1]
        if not (0 <= u < n and 0 <= v < n):
            raise ParseError(source, f"line {no}", f"vertex out of range 0..{n - 1}")
        if u == v:
            raise ParseError(source, f"line {no}", "self-loops are not allowed")
        if len(nums) == 3 and nums[2] < 0:
            raise ParseError(source, f"line {no}", "multiplicity must be nonnegative")
        edges.append(tuple(nums))
    return FiniteGraph.from_edges(n, edges)


def format_graph(g: FiniteGraph) -> str:
    out = [str(g.n)]
    e = g.multiplicities
    for u in range(g.n):
        for v in range(u + 1, g.n):
            m = int(e[u, v])
            if m == 1:
                out.append(f"{u} {v}")
            elif m > 1:
                out.append(f"{u} {v} {m}")
    return "\n".join(out) + "\n"


def _rational(value, source, where) -> Fraction:
    if isinstance(value, float):
        raise ParseError(source, where, "rationals must be strings like '1/3' or integers")
    try:
        return to_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ParseError(source, where, f"bad rational {value!r} ({exc})") from None


def _load_json(text, source):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(source, f"line {exc.lineno} column {exc.colno}", exc.msg) from None


def parse_graphon(text: str, source: str = "<graphon>") -> StepGraphon:
    obj = _load_json(text, source)
    if not isinstance(obj, dict) or "measures" not in obj or "kernel" not in obj:
        raise ParseError(source, "top level", "expected an object with 'measures' and 'kernel'")
    meas, kern = obj["measures"], obj["kernel"]
    if not isinstance(meas, list) or not meas:
        raise ParseError(source, "measures", "expected a nonempty list")
    k = len(meas)
    m = [_rational(v, source, f"measures[{i}]") for i, v in enumerate(meas)]
    if not isinstance(kern, list) or len(kern) != k:
        raise ParseError(source, "kernel", f"expected {k} rows")
    rows = []
    for i, row in enumerate(kern):
        if not isinstance(row, list) or len(row) != k:
            raise ParseError(source, f"kernel[{i}]", f"expected a row of {k} entries")
        rows.append([_rational(v, source, f"kernel[{i}][{j}]") for j, v in enumerate(row)])
    try:
        return StepGraphon(tuple(m), tuple(tuple(r) for r in rows))
    except ModelError as exc:
        raise ParseError(source, "graphon", str(exc)) from None


def format_graphon(w: StepGraphon) -> str:
    obj = {
        "measures": [format_fraction(m) for m in w.measures],
        "kernel": [[format_fraction(v) for v in row] for row in w.kernel],
    }
    return json.dumps(obj, indent=1) + "\n"


def parse_config(text: str, source: str = "<config>", default_context: str | None = None) -> ChipConfig:
    """Accepts {"context": ..., "values": [...]} or a bare list of rationals."""
    obj = _load_json(text, source)
    if isinstance(obj, list):
        values, context = obj, default_context or GRAPH
    elif isinstance(obj, dict) and "values" in obj:
        values = obj["values"]
        context = obj.get("context", default_context or GRAPH)
        if not isinstance(values, list):
            raise ParseError(source, "values", "expected a list")
    else:
        raise ParseError(source, "top level", "expected a list or an object with 'values'")
    if context not in (GRAPH, GRAPHON):
        raise ParseError(source, "context", f"unknown context {context!r}")
    vals = [_rational(v, source, f"values[{i}]") for i, v in enumerate(values)]
    try:
        return ChipConfig(tuple(vals), context)
    except ModelError as exc:
        raise ParseError(source, "values", str(exc)) from None


def format_config(sigma: ChipConfig) -> str:
    obj = {"context": sigma.context, "values": [format_fraction(v) for v in sigma.values]}
    return json.dumps(obj) + "\n"


def activity_to_dict(est) -> dict:
    d = {"kind": est.kind}
    if est.kind == "exact":
        d["value"] = None if est.value is None else format_fraction(est.value)
        if not est.uniform:
            d["component_values"] = [format_fraction(v) for v in est.component_values]
            d["uniform"] = False
    d["lower"] = format_fraction(est.lower)
    d["upper"] = None if est.upper is None else format_fraction(est.upper)
    d["period"] = est.period
    d["transient"] = est.transient
    d["steps_used"] = est.steps_used
    return d


def trace_csv(states) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "part", "config_value", "odometer"])
    for st in states:
        for i, (v, u) in enumerate(zip(st.config.values, st.odometer)):
            w.writerow([st.step, i, format_fraction(v), u])
    return buf.getvalue()


def looks_like_graphon(text: str) -> bool:
    return text.lstrip().startswith("{")


def load_model(text: str, source: str):
    if looks_like_graphon(text):
        return parse_graphon(text, source)
    return parse_graph(text, source)


def default_context_for(model) -> str:
    return GRAPHON if isinstance(model, StepGraphon) else GRAPH
