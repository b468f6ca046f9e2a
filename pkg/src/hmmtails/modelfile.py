"""JSON model documents.

::

    {
      "states": ["calm", "wild"],
      "P": [[0.9, 0.1], [0.5, 0.5]],
      "laws": {
        "calm": {"q_law": {"type": "two_sided_pareto", "alpha0": 1.5},
                 "m_law": {"type": "constant", "value": 0.5},
                 "coupling": {"type": "independent"}},
        ...
      },
      "alpha_hint": 1.5
    }

An order-k model replaces ``P`` by ``"order": k`` and ``"kernel"``, an object
keyed by the k-word (symbols joined with ``|``) whose values are probability
rows over ``states``; the word states of the lift are then used everywhere.
Every validation error names the offending JSON path.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .errors import BadChain, BadLaw, ModelError, ModelFileError, NotCChain
from .model import (
    BoundedUniform,
    ChainSpec,
    CoefficientLaw,
    Constant,
    DegenerateLine,
    Independent,
    InducedModel,
    LogUniform,
    SignedLogUniform,
    TwoPoint,
    TwoSidedPareto,
)

# type tag -> (class, required fields, optional fields)
Q_TYPES = {
    "two_sided_pareto": (TwoSidedPareto, ("alpha0",), ("t0", "q_plus", "q_minus", "core_lo", "core_hi")),
    "constant": (Constant, ("value",), ()),
    "bounded_uniform": (BoundedUniform, ("lo", "hi"), ()),
}
M_TYPES = {
    "constant": (Constant, ("value",), ()),
    "two_point": (TwoPoint, ("a", "b", "p"), ()),
    "log_uniform": (LogUniform, ("lo", "hi"), ()),
    "signed_log_uniform": (SignedLogUniform, ("lo", "hi", "s"), ()),
}
COUPLINGS = {
    "independent": (Independent, (), ()),
    "degenerate_line": (DegenerateLine, ("c",), ()),
}
TOP_KEYS = {"states", "P", "laws", "alpha_hint", "order", "kernel"}
LAW_KEYS = {"q_law", "m_law", "coupling"}


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ModelFileError(path, f"expected a finite number, got {value!r}")
    return float(value)


def _object(value, path):
    if not isinstance(value, dict):
        raise ModelFileError(path, f"expected an object, got {type(value).__name__}")
    return value


def _tagged(doc, path, table):
    doc = _object(doc, path)
    tag = doc.get("type")
    if tag not in table:
        raise ModelFileError(f"{path}.type", f"expected one of {sorted(table)}, got {tag!r}")
    cls, required, optional = table[tag]
    unknown = set(doc) - {"type", *required, *optional}
    if unknown:
        raise ModelFileError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    kwargs = {}
    for name in required:
        if name not in doc:
            raise ModelFileError(f"{path}.{name}", "missing required field")
        kwargs[name] = _number(doc[name], f"{path}.{name}")
    for name in optional:
        if name in doc and doc[name] is not None:
            kwargs[name] = _number(doc[name], f"{path}.{name}")
    try:
        return cls(**kwargs)
    except BadLaw as exc:
        raise ModelFileError(path, str(exc)) from None


def parse_law(doc, path) -> CoefficientLaw:
    doc = _object(doc, path)
    unknown = set(doc) - LAW_KEYS
    if unknown:
        raise ModelFileError(f"{path}.{sorted(unknown)[0]}", "unknown field")
    if "m_law" not in doc:
        raise ModelFileError(f"{path}.m_law", "missing required field")
    m_law = _tagged(doc["m_law"], f"{path}.m_law", M_TYPES)
    coupling = _tagged(doc.get("coupling", {"type": "independent"}), f"{path}.coupling", COUPLINGS)
    q_doc = doc.get("q_law")
    if q_doc is None:
        if isinstance(coupling, Independent):
            raise ModelFileError(f"{path}.q_law", "required unless coupling is degenerate_line")
        q_law = None
    else:
        q_law = _tagged(q_doc, f"{path}.q_law", Q_TYPES)
    try:
        return CoefficientLaw(q_law, m_law, coupling)
    except BadLaw as exc:
        raise ModelFileError(path, str(exc)) from None


def _matrix(doc, path):
    if not isinstance(doc, list) or not doc:
        raise ModelFileError(path, "expected a nonempty array of rows")
    rows = []
    for i, row in enumerate(doc):
        if not isinstance(row, list):
            raise ModelFileError(f"{path}[{i}]", "expected an array")
        rows.append([_number(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    return rows


def model_from_dict(doc: dict) -> InducedModel:
    from .simulate import lift_order_k

    doc = _object(doc, "$")
    unknown = set(doc) - TOP_KEYS
    if unknown:
        raise ModelFileError(f"$.{sorted(unknown)[0]}", "unknown field")
    states = doc.get("states")
    if not isinstance(states, list) or not states or not all(isinstance(s, str) for s in states):
        raise ModelFileError("$.states", "expected a nonempty array of strings")
    if len(set(states)) != len(states):
        raise ModelFileError("$.states", "state ids must be distinct")
    laws_doc = _object(doc.get("laws"), "$.laws")
    for key in laws_doc:
        if key not in states:
            raise ModelFileError(f"$.laws.{key}", "law given for an unknown state")
    laws = {}
    for s in states:
        if s not in laws_doc:
            raise ModelFileError(f"$.laws.{s}", "missing law for state")
        laws[s] = parse_law(laws_doc[s], f"$.laws.{s}")
    hint = doc.get("alpha_hint")
    if hint is not None:
        hint = _number(hint, "$.alpha_hint")
        if hint <= 0:
            raise ModelFileError("$.alpha_hint", "must be positive")

    order = doc.get("order", 1)
    if isinstance(order, bool) or not isinstance(order, int) or order < 1:
        raise ModelFileError("$.order", "expected a positive integer")
    if order > 1 or "kernel" in doc:
        if "P" in doc:
            raise ModelFileError("$.P", "give either P or order/kernel, not both")
        kernel_doc = _object(doc.get("kernel"), "$.kernel")
        kernel = {}
        for word, row in kernel_doc.items():
            key = tuple(word.split("|"))
            if len(key) != order or any(sym not in states for sym in key):
                raise ModelFileError(f"$.kernel.{word}", f"expected a word of {order} known symbols joined by '|'")
            if not isinstance(row, list) or len(row) != len(states):
                raise ModelFileError(f"$.kernel.{word}", f"expected {len(states)} probabilities")
            kernel[key] = [_number(v, f"$.kernel.{word}[{j}]") for j, v in enumerate(row)]
        if len(kernel) != len(states) ** order:
            raise ModelFileError("$.kernel", f"expected {len(states) ** order} words")
        try:
            lifted = lift_order_k(states, order, kernel, laws).lifted
        except (BadChain, NotCChain) as exc:
            raise ModelFileError("$.kernel", str(exc)) from None
        return InducedModel(lifted.chain, lifted.laws, hint)

    P = _matrix(doc.get("P"), "$.P")
    try:
        chain = ChainSpec(tuple(states), P)
    except BadChain as exc:
        raise ModelFileError("$.P", str(exc)) from None
    return InducedModel(chain, laws, hint)


def load_model(path) -> InducedModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError("$", f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise ModelError(f"cannot read model file {path}: {exc}") from None
    return model_from_dict(doc)


# -- serialization -------------------------------------------------------------

def _law_doc(obj, table) -> dict:
    for tag, (cls, required, optional) in table.items():
        if type(obj) is cls:
            out = {"type": tag}
            for name in required + optional:
                value = getattr(obj, name)
                if value is not None:
                    out[name] = value
            return out
    raise TypeError(f"cannot serialize {obj!r}")


def model_to_dict(model: InducedModel) -> dict:
    laws = {}
    for s, law in zip(model.chain.states, model.ordered_laws):
        entry = {"m_law": _law_doc(law.m_law, M_TYPES), "coupling": _law_doc(law.coupling, COUPLINGS)}
        if law.q_law is not None:
            entry["q_law"] = _law_doc(law.q_law, Q_TYPES)
        laws[str(s)] = entry
    doc = {"states": [str(s) for s in model.chain.states], "P": model.chain.P.tolist(), "laws": laws}
    if model.exponent_hint is not None:
        doc["alpha_hint"] = model.exponent_hint
    return doc
