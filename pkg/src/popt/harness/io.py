"""JSON and plain-text readers/writers for auction instances and grid specs.

JSON instance::

    {"n_agents": 2, "n_goods": 1, "supplies": [1], "k": 1,
     "valuations": [[2.0], [1.0]]}

``valuations`` may instead be ``{"entries": [[agent, bundle, value], ...]}``
(missing entries are 0). Bundles follow the canonical order of
:func:`popt.auction.enumerate_k_bundles`. A grid spec is ``{"grid": {...}}``
with :class:`popt.spectrum.GridSpec` field names.

Plain text instance: line 1 ``N G k``, line 2 the ``G`` supplies, then one
``agent bundle value`` triple per line. A grid spec is the word ``grid``
followed by ``key=value`` tokens. ``#`` starts a comment.
"""

import json
from dataclasses import fields
from pathlib import Path

import numpy as np

from ..auction import AuctionInstance, bundle_count
from ..errors import InputError
from ..spectrum import GridSpec

FORMATS = ("json", "text")
_GRID_FIELDS = {f.name: f.type for f in fields(GridSpec)}


def detect_format(path) -> str:
    return "json" if str(path).lower().endswith(".json") else "text"


def parse_input(path, format=None):
    """Read an :class:`AuctionInstance` or :class:`GridSpec` from ``path``."""
    fmt = format or detect_format(path)
    if fmt not in FORMATS:
        raise InputError(f"unknown format {fmt!r}", field="format")
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    return parse_json(text) if fmt == "json" else parse_text(text)


def _int(value, field, line=None, minimum=1):
    try:
        v = int(value)
        if v != float(value):
            raise ValueError
    except (TypeError, ValueError):
        raise InputError(f"expected an integer, got {value!r}", field=field, line=line) from None
    if v < minimum:
        raise InputError(f"must be at least {minimum}, got {v}", field=field, line=line)
    return v


def _float(value, field, line=None):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InputError(f"expected a number, got {value!r}", field=field, line=line) from None
    if not np.isfinite(v) or v < 0:
        raise InputError(f"must be finite and non-negative, got {v}", field=field, line=line)
    return v


def _grid(d: dict, line=None) -> GridSpec:
    kw = {}
    for key, value in d.items():
        if key not in _GRID_FIELDS:
            raise InputError(f"unknown grid parameter {key!r}", field=key, line=line)
        if key == "utility_model":
            kw[key] = str(value)
        elif key in ("mu", "lam"):
            kw[key] = _float(value, key, line)
        else:
            kw[key] = _int(value, key, line, minimum=0)
    try:
        return GridSpec(**kw)
    except ValueError as e:
        raise InputError(str(e), field="grid", line=line) from None


def _build(n, g, k, supplies, valuations):
    try:
        return AuctionInstance(n, g, np.array(supplies), k, valuations)
    except ValueError as e:
        raise InputError(str(e)) from None


def instance_from_dict(d: dict) -> AuctionInstance:
    for key in ("n_agents", "n_goods", "supplies", "k", "valuations"):
        if key not in d:
            raise InputError("missing field", field=key)
    n = _int(d["n_agents"], "n_agents")
    g = _int(d["n_goods"], "n_goods")
    k = _int(d["k"], "k")
    sup = d["supplies"]
    if not isinstance(sup, list) or len(sup) != g:
        raise InputError(f"expected a list of {g} integers", field="supplies")
    sup = [_int(v, "supplies") for v in sup]
    nb = bundle_count(g, k)
    val = d["valuations"]
    u = np.zeros((n, nb))
    if isinstance(val, dict):
        entries = val.get("entries")
        if not isinstance(entries, list):
            raise InputError("sparse valuations need an 'entries' list", field="valuations.entries")
        for t, e in enumerate(entries):
            f = f"valuations.entries[{t}]"
            if not isinstance(e, list) or len(e) != 3:
                raise InputError("expected [agent, bundle, value]", field=f)
            i = _int(e[0], f, minimum=0)
            b = _int(e[1], f, minimum=0)
            if i >= n or b >= nb:
                raise InputError(f"index out of range (agents {n}, bundles {nb})", field=f)
            u[i, b] = _float(e[2], f)
    elif isinstance(val, list):
        if len(val) != n:
            raise InputError(f"expected {n} rows", field="valuations")
        for i, row in enumerate(val):
            if not isinstance(row, list) or len(row) != nb:
                raise InputError(f"expected {nb} values", field=f"valuations[{i}]")
            u[i] = [_float(v, f"valuations[{i}]") for v in row]
    else:
        raise InputError("expected a list of rows or {'entries': [...]}", field="valuations")
    return _build(n, g, k, sup, u)


def parse_json(text: str):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    if not isinstance(d, dict):
        raise InputError("top level must be an object")
    if "grid" in d:
        if not isinstance(d["grid"], dict):
            raise InputError("expected an object", field="grid")
        return _grid(d["grid"])
    return instance_from_dict(d)


def parse_text(text: str):
    lines = [(no, ln.split("#", 1)[0].split()) for no, ln in enumerate(text.splitlines(), 1)]
    lines = [(no, toks) for no, toks in lines if toks]
    if not lines:
        raise InputError("empty input")
    if lines[0][1][0].lower() == "grid":
        kw = {}
        for no, toks in lines:
            for tok in (toks[1:] if no == lines[0][0] else toks):
                if "=" not in tok:
                    raise InputError(f"expected key=value, got {tok!r}", line=no)
                key, value = tok.split("=", 1)
                kw[key] = (no, value)
        d = {key: value for key, (_, value) in kw.items()}
        last = max((no for no, _ in kw.values()), default=lines[0][0])
        return _grid(d, line=last if len(kw) else None)

    no, head = lines[0]
    if len(head) != 3:
        raise InputError("header must be 'N G k'", line=no)
    n = _int(head[0], "N", no)
    g = _int(head[1], "G", no)
    k = _int(head[2], "k", no)
    if len(lines) < 2:
        raise InputError("missing supplies line", field="supplies")
    no, sup = lines[1]
    if len(sup) != g:
        raise InputError(f"expected {g} supplies", field="supplies", line=no)
    sup = [_int(v, "supplies", no) for v in sup]
    nb = bundle_count(g, k)
    u = np.zeros((n, nb))
    for no, toks in lines[2:]:
        if len(toks) != 3:
            raise InputError("expected 'agent bundle value'", line=no)
        i = _int(toks[0], "agent", no, minimum=0)
        b = _int(toks[1], "bundle", no, minimum=0)
        if i >= n:
            raise InputError(f"agent index must be < {n}", field="agent", line=no)
        if b >= nb:
            raise InputError(f"bundle index must be < {nb}", field="bundle", line=no)
        u[i, b] = _float(toks[2], "value", no)
    return _build(n, g, k, sup, u)


def _num(v: float):
    return int(v) if float(v).is_integer() else float(v)


def serialize(obj, format: str = "json") -> str:
    """Canonical text of an instance or grid spec; ``parse`` inverts it exactly."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    if isinstance(obj, GridSpec):
        d = obj.to_dict()
        if format == "json":
            return json.dumps({"grid": d}, indent=2, sort_keys=True) + "\n"
        return "grid " + " ".join(f"{k}={d[k]!r}" if isinstance(d[k], float) else f"{k}={d[k]}"
                                  for k in sorted(d)) + "\n"
    if not isinstance(obj, AuctionInstance):
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if format == "json":
        d = {"n_agents": obj.n_agents, "n_goods": obj.n_goods,
             "supplies": [int(s) for s in obj.supplies], "k": obj.k,
             "valuations": [[_num(v) for v in row] for row in obj.valuations]}
        return json.dumps(d, indent=1) + "\n"
    out = [f"{obj.n_agents} {obj.n_goods} {obj.k}", " ".join(str(int(s)) for s in obj.supplies)]
    for i, b in zip(*np.nonzero(obj.valuations)):
        out.append(f"{i} {b} {_num(obj.valuations[i, b])!r}")
    return "\n".join(out) + "\n"


def write(obj, path, format=None):
    Path(path).write_text(serialize(obj, format or detect_format(path)))
