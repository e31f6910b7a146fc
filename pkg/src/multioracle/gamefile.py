"""Reading and writing game definition files.

Game files are YAML (plain JSON is accepted too)::

    players: 2
    zero_sum: true
    spaces:
      - {type: box, lower: [-1], upper: [1]}
      - {type: box, lower: [-1], upper: [1]}
    utilities:
      - type: polynomial
        terms:
          - {coef: 2, powers: [[1], [2]]}
      - type: builtin
        name: torus
        params: {player: 1, phi: 0.39, alpha: 1.5}

Polymatrix utilities list ``edges``; each edge names an ``opponent`` (0-based)
and carries either polynomial ``terms`` over ``[own, opponent]`` blocks or a
``builtin`` name with ``params``. Validation errors carry the line number of
the offending node.
"""

from __future__ import annotations

import numpy as np
import yaml

from .catalog import BUILTINS, builtin
from .game import BlackBox, ContinuousGame, Polynomial, PolymatrixSum
from .spaces import Box, Circle, Finite, Simplex, StrategySpace

__all__ = ["GameFileError", "loads", "load", "dumps", "dump", "to_document", "from_document"]


class GameFileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class _Map(dict):
    line: int | None = None
    key_lines: dict


class _Seq(list):
    line: int | None = None
    item_lines: list


_SCALARS = yaml.SafeLoader("")


def _convert(node):
    line = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = _Map()
        out.line, out.key_lines = line, {}
        for k, v in node.value:
            key = _convert(k)
            if key in out:
                raise GameFileError(f"duplicate key {key!r}", k.start_mark.line + 1)
            out[key] = _convert(v)
            out.key_lines[key] = k.start_mark.line + 1
        return out
    if isinstance(node, yaml.SequenceNode):
        out = _Seq(_convert(v) for v in node.value)
        out.line, out.item_lines = line, [v.start_mark.line + 1 for v in node.value]
        return out
    return _SCALARS.construct_object(node, deep=True)


def _line(obj, key=None):
    if isinstance(obj, _Map) and key is not None and key in obj.key_lines:
        return obj.key_lines[key]
    return getattr(obj, "line", None)


def _fields(obj, where, required, optional=()):
    if not isinstance(obj, dict):
        raise GameFileError(f"{where}: expected a mapping", _line(obj))
    for k in obj:
        if k not in required and k not in optional:
            raise GameFileError(f"{where}: unknown field {k!r}", _line(obj, k))
    for k in required:
        if k not in obj:
            raise GameFileError(f"{where}: missing field {k!r}", _line(obj))


def _seq(obj, where, parent=None, key=None):
    if not isinstance(obj, list):
        raise GameFileError(f"{where}: expected a list", _line(parent, key) if parent else _line(obj))
    return obj


def _number(x, where, line):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise GameFileError(f"{where}: expected a number, got {x!r}", line)
    return float(x)


def _vector(obj, where, parent, key):
    seq = obj if isinstance(obj, list) else [obj]
    return [_number(v, where, _line(parent, key)) for v in seq]


def _parse_space(obj, where) -> StrategySpace:
    if not isinstance(obj, dict) or "type" not in obj:
        raise GameFileError(f"{where}: space needs a 'type'", _line(obj))
    kind = obj["type"]
    try:
        if kind == "box":
            _fields(obj, where, ("type", "lower", "upper"))
            return Box(_vector(obj["lower"], where, obj, "lower"), _vector(obj["upper"], where, obj, "upper"))
        if kind == "simplex":
            _fields(obj, where, ("type", "dim"))
            return Simplex(int(obj["dim"]))
        if kind == "circle":
            _fields(obj, where, ("type",), ("metric",))
            return Circle(obj.get("metric", "arc"))
        if kind == "finite":
            _fields(obj, where, ("type", "points"))
            pts = _seq(obj["points"], where, obj, "points")
            return Finite([_vector(p, where, obj, "points") for p in pts])
    except GameFileError:
        raise
    except ValueError as exc:
        raise GameFileError(f"{where}: {exc}", _line(obj)) from None
    raise GameFileError(f"{where}: unknown space type {kind!r}", _line(obj, "type"))


def _parse_terms(terms, where, dims, parent, key) -> Polynomial:
    _seq(terms, where, parent, key)
    out = []
    for t, term in enumerate(terms):
        here = f"{where}.terms[{t}]"
        _fields(term, here, ("coef", "powers"))
        coef = _number(term["coef"], here, _line(term, "coef"))
        powers = _seq(term["powers"], here, term, "powers")
        if len(powers) != len(dims):
            raise GameFileError(
                f"{here}: {len(powers)} exponent blocks, expected {len(dims)}", _line(term, "powers"))
        blocks = []
        for b, (block, d) in enumerate(zip(powers, dims)):
            block = block if isinstance(block, list) else [block]
            if len(block) != d:
                raise GameFileError(
                    f"{here}: exponent block {b} has length {len(block)}, expected {d}",
                    _line(term, "powers"))
            if any(isinstance(e, bool) or not isinstance(e, int) or e < 0 for e in block):
                raise GameFileError(f"{here}: exponents must be nonnegative integers",
                                    _line(term, "powers"))
            blocks.append(block)
        out.append((coef, blocks))
    return Polynomial(out, dims)


def _parse_builtin(obj, where, name_key="name"):
    name = obj[name_key]
    if name not in BUILTINS:
        raise GameFileError(f"{where}: unknown builtin {name!r}", _line(obj, name_key))
    params = obj.get("params", {}) or {}
    if not isinstance(params, dict):
        raise GameFileError(f"{where}: params must be a mapping", _line(obj, "params"))
    try:
        return builtin(name, **dict(params))
    except (KeyError, TypeError, ValueError) as exc:
        raise GameFileError(f"{where}: bad params for builtin {name!r}: {exc}", _line(obj)) from None


def _parse_utility(obj, where, i, dims):
    if not isinstance(obj, dict) or "type" not in obj:
        raise GameFileError(f"{where}: utility needs a 'type'", _line(obj))
    kind = obj["type"]
    if kind == "polynomial":
        _fields(obj, where, ("type", "terms"))
        return _parse_terms(obj["terms"], where, dims, obj, "terms")
    if kind == "builtin":
        _fields(obj, where, ("type", "name"), ("params",))
        return _parse_builtin(obj, where)
    if kind == "polymatrix":
        _fields(obj, where, ("type", "edges"))
        edges = {}
        for e, edge in enumerate(_seq(obj["edges"], where, obj, "edges")):
            here = f"{where}.edges[{e}]"
            _fields(edge, here, ("opponent",), ("terms", "builtin", "params"))
            k = edge["opponent"]
            if not isinstance(k, int) or not 0 <= k < len(dims) or k == i:
                raise GameFileError(f"{here}: invalid opponent {k!r}", _line(edge, "opponent"))
            if k in edges:
                raise GameFileError(f"{here}: duplicate edge to player {k}", _line(edge, "opponent"))
            if ("terms" in edge) == ("builtin" in edge):
                raise GameFileError(f"{here}: give exactly one of 'terms' or 'builtin'", _line(edge))
            if "terms" in edge:
                edges[k] = _parse_terms(edge["terms"], here, [dims[i], dims[k]], edge, "terms")
            else:
                edges[k] = _parse_builtin(edge, here, "builtin")
        return PolymatrixSum(i, edges)
    raise GameFileError(f"{where}: unknown utility type {kind!r}", _line(obj, "type"))


def from_document(doc) -> ContinuousGame:
    _fields(doc, "game", ("players", "spaces", "utilities"), ("zero_sum", "name"))
    n = doc["players"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise GameFileError("players must be a positive integer", _line(doc, "players"))
    spaces = _seq(doc["spaces"], "spaces", doc, "spaces")
    utils = _seq(doc["utilities"], "utilities", doc, "utilities")
    if len(spaces) != n:
        raise GameFileError(f"expected {n} spaces, found {len(spaces)}", _line(doc, "spaces"))
    if len(utils) != n:
        raise GameFileError(f"expected {n} utilities, found {len(utils)}", _line(doc, "utilities"))
    parsed_spaces = [_parse_space(s, f"spaces[{k}]") for k, s in enumerate(spaces)]
    dims = [s.dim for s in parsed_spaces]
    parsed_utils = [_parse_utility(u, f"utilities[{k}]", k, dims) for k, u in enumerate(utils)]
    zero_sum = doc.get("zero_sum", False)
    if not isinstance(zero_sum, bool):
        raise GameFileError("zero_sum must be true or false", _line(doc, "zero_sum"))
    try:
        return ContinuousGame(parsed_spaces, parsed_utils, zero_sum=zero_sum,
                              name=str(doc.get("name", "")))
    except ValueError as exc:
        raise GameFileError(str(exc), _line(doc)) from None


def loads(text: str) -> ContinuousGame:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise GameFileError(f"syntax error: {exc.problem}", mark.line + 1 if mark else None) from None
    if node is None:
        raise GameFileError("empty game file", 1)
    return from_document(_convert(node))


def load(path) -> ContinuousGame:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def _plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def _space_doc(s: StrategySpace) -> dict:
    if s.kind == "box":
        return {"type": "box", "lower": s.lower.tolist(), "upper": s.upper.tolist()}
    if s.kind == "simplex":
        return {"type": "simplex", "dim": s.dim}
    if s.kind == "circle":
        return {"type": "circle", "metric": s.metric}
    return {"type": "finite", "points": s.points.tolist()}


def _terms_doc(p: Polynomial) -> list:
    return [{"coef": c, "powers": blocks} for c, blocks in p.terms]


def _blackbox_doc(u: BlackBox) -> dict:
    if u.name is None:
        raise ValueError("black-box utility without a builtin name cannot be serialized")
    return _plain(u.params)


def _utility_doc(u) -> dict:
    if isinstance(u, Polynomial):
        return {"type": "polynomial", "terms": _terms_doc(u)}
    if isinstance(u, BlackBox):
        return {"type": "builtin", "name": u.name, "params": _blackbox_doc(u)}
    edges = []
    for k, term in u.terms.items():
        if isinstance(term, Polynomial):
            edges.append({"opponent": k, "terms": _terms_doc(term)})
        else:
            edges.append({"opponent": k, "builtin": term.name, "params": _blackbox_doc(term)})
    return {"type": "polymatrix", "edges": edges}


def to_document(game: ContinuousGame) -> dict:
    doc = {"players": game.n_players}
    if game.name:
        doc["name"] = game.name
    doc["zero_sum"] = bool(game.zero_sum)
    doc["spaces"] = [_space_doc(s) for s in game.spaces]
    doc["utilities"] = [_utility_doc(u) for u in game.utilities]
    return doc


def dumps(game: ContinuousGame) -> str:
    return yaml.safe_dump(to_document(game), sort_keys=False, default_flow_style=None)


def dump(game: ContinuousGame, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(game))
