"""JSON spec files: one document describes one PDB.

Layout::

    {"schema": [{"name": "R", "arity": 1}],
     "universe_tags": ["int"],
     "model": {"kind": "ti", "facts": [{"fact": {"rel": "R", "args": [1]}, "p": "1/2"}]}}

Probabilities and rates are exact ``"num/den"`` strings. Fact arguments are
JSON integers, JSON strings, ``{"q": "num/den"}`` for rationals or
``{"real": x}`` for reals. Inside tail templates ``{"index": true}`` marks
the slot filled by the running index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Optional, Union

import jsonschema

from .bid import BidPdb, Block, BlockTail, validate_bid
from .combinators import SuperposedPdb, lambda_completion_check, superpose, ti_completion
from .continuous import Piece, PiecewiseIntensity
from .core import ExplicitWorldPdb, BagInstance, Fact, Schema, elem_tag
from .errors import LambdaCapExceeded, SpecError
from .factspace import INDEX, FactFamily, FactTemplate, GeometricTail
from .poisson import PoissonPdb, validate_poisson
from .ti import TiPdb, validate_ti

TAG_NAMES = {0: "int", 1: "text", 2: "rational", 3: "real"}
ALL_TAGS = tuple(TAG_NAMES.values())

_RATIONAL = {"type": "string", "pattern": r"^-?[0-9]+(/[0-9]+)?$"}

FILE_SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "universe_tags", "model"],
    "additionalProperties": False,
    "properties": {
        "schema": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "arity"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "arity": {"type": "integer", "minimum": 0},
                },
            },
        },
        "universe_tags": {"type": "array", "items": {"enum": list(ALL_TAGS)}, "uniqueItems": True},
        "model": {"$ref": "#/$defs/model"},
    },
    "$defs": {
        "rational": _RATIONAL,
        "elem": {
            "oneOf": [
                {"type": "integer"},
                {"type": "string"},
                {"type": "object", "required": ["q"], "additionalProperties": False,
                 "properties": {"q": {"$ref": "#/$defs/rational"}}},
                {"type": "object", "required": ["real"], "additionalProperties": False,
                 "properties": {"real": {"type": "number"}}},
            ]
        },
        "slot": {
            "oneOf": [
                {"$ref": "#/$defs/elem"},
                {"type": "object", "required": ["index"], "additionalProperties": False,
                 "properties": {"index": {"const": True}}},
            ]
        },
        "fact": {
            "type": "object",
            "required": ["rel", "args"],
            "additionalProperties": False,
            "properties": {"rel": {"type": "string", "minLength": 1},
                           "args": {"type": "array", "items": {"$ref": "#/$defs/elem"}}},
        },
        "template": {
            "type": "object",
            "required": ["rel", "args"],
            "additionalProperties": False,
            "properties": {"rel": {"type": "string", "minLength": 1},
                           "args": {"type": "array", "items": {"$ref": "#/$defs/slot"}}},
        },
        "weighted": {
            "type": "object",
            "required": ["fact", "p"],
            "additionalProperties": False,
            "properties": {"fact": {"$ref": "#/$defs/fact"}, "p": {"$ref": "#/$defs/rational"}},
        },
        "tail": {
            "type": "object",
            "required": ["template", "first", "ratio"],
            "additionalProperties": False,
            "properties": {
                "template": {"$ref": "#/$defs/template"},
                "first": {"$ref": "#/$defs/rational"},
                "ratio": {"$ref": "#/$defs/rational"},
                "start": {"type": "integer"},
            },
        },
        "family": {
            "type": "object",
            "required": ["facts"],
            "additionalProperties": False,
            "properties": {
                "facts": {"type": "array", "items": {"$ref": "#/$defs/weighted"}},
                "tail": {"$ref": "#/$defs/tail"},
            },
        },
        "model": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": ["ti", "bid", "poisson", "explicit", "superposition",
                                             "completion", "continuous"]}},
            "allOf": [
                {"if": {"properties": {"kind": {"const": "ti"}}},
                 "then": {"additionalProperties": False, "required": ["facts"],
                          "properties": {"kind": {}, "facts": {"$ref": "#/$defs/family/properties/facts"},
                                         "tail": {"$ref": "#/$defs/tail"}}}},
                {"if": {"properties": {"kind": {"const": "bid"}}},
                 "then": {"additionalProperties": False, "required": ["blocks"],
                          "properties": {
                              "kind": {},
                              "blocks": {"type": "array",
                                         "items": {"type": "array", "items": {"$ref": "#/$defs/weighted"}}},
                              "tail": {
                                  "type": "object",
                                  "required": ["templates", "weights", "first", "ratio"],
                                  "additionalProperties": False,
                                  "properties": {
                                      "templates": {"type": "array", "minItems": 1,
                                                    "items": {"$ref": "#/$defs/template"}},
                                      "weights": {"type": "array", "items": {"$ref": "#/$defs/rational"}},
                                      "first": {"$ref": "#/$defs/rational"},
                                      "ratio": {"$ref": "#/$defs/rational"},
                                      "start": {"type": "integer"},
                                  },
                              }}}},
                {"if": {"properties": {"kind": {"const": "poisson"}}},
                 "then": {"additionalProperties": False, "required": ["rates"],
                          "properties": {
                              "kind": {},
                              "rates": {"type": "array", "items": {
                                  "type": "object", "required": ["fact", "rate"], "additionalProperties": False,
                                  "properties": {"fact": {"$ref": "#/$defs/fact"},
                                                 "rate": {"$ref": "#/$defs/rational"}}}},
                              "tail": {"$ref": "#/$defs/tail"}}}},
                {"if": {"properties": {"kind": {"const": "explicit"}}},
                 "then": {"additionalProperties": False, "required": ["worlds"],
                          "properties": {
                              "kind": {},
                              "worlds": {"type": "array", "minItems": 1, "items": {
                                  "type": "object", "required": ["facts", "p"], "additionalProperties": False,
                                  "properties": {
                                      "p": {"$ref": "#/$defs/rational"},
                                      "facts": {"type": "array", "items": {
                                          "type": "object", "required": ["fact"], "additionalProperties": False,
                                          "properties": {"fact": {"$ref": "#/$defs/fact"},
                                                         "mult": {"type": "integer", "minimum": 1}}}}}}}}}},
                {"if": {"properties": {"kind": {"const": "superposition"}}},
                 "then": {"additionalProperties": False, "required": ["components"],
                          "properties": {"kind": {},
                                         "components": {"type": "array", "items": {"$ref": "#/$defs/model"}},
                                         "tail": {"$ref": "#/$defs/tail"}}}},
                {"if": {"properties": {"kind": {"const": "completion"}}},
                 "then": {"additionalProperties": False, "required": ["base", "extension"],
                          "properties": {"kind": {}, "base": {"$ref": "#/$defs/model"},
                                         "extension": {"$ref": "#/$defs/family"},
                                         "lambda_cap": {"$ref": "#/$defs/rational"}}}},
                {"if": {"properties": {"kind": {"const": "continuous"}}},
                 "then": {"additionalProperties": False, "required": ["pieces"],
                          "properties": {
                              "kind": {},
                              "relation": {"type": "string", "minLength": 1},
                              "pieces": {"type": "array", "items": {
                                  "type": "object", "required": ["lo", "hi", "density"],
                                  "additionalProperties": False,
                                  "properties": {"lo": {"$ref": "#/$defs/rational"},
                                                 "hi": {"$ref": "#/$defs/rational"},
                                                 "density": {"$ref": "#/$defs/rational"}}}}}}},
            ],
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(FILE_SCHEMA)


@dataclass
class PdbSpec:
    schema: Schema
    universe_tags: tuple
    model: Any
    kind: str


# -- decoding ---------------------------------------------------------------------------


def _rat(text: str) -> Fraction:
    try:
        return Fraction(text)
    except ZeroDivisionError:
        raise SpecError(f"rational {text!r} has a zero denominator") from None


def _elem(raw):
    if isinstance(raw, dict):
        if "q" in raw:
            return _rat(raw["q"])
        return float(raw["real"])
    return raw


def _slot(raw):
    return INDEX if isinstance(raw, dict) and "index" in raw else _elem(raw)


class _Decoder:
    def __init__(self, schema: Schema, tags: tuple):
        self.schema = schema
        self.tags = set(tags)

    def _check_args(self, rel: str, args: tuple) -> None:
        try:
            self.schema.check(Fact(rel, tuple(0 if a is INDEX else a for a in args)))
        except Exception as e:
            raise SpecError(str(e)) from None
        for a in args:
            name = "int" if a is INDEX else TAG_NAMES[elem_tag(a)]
            if name not in self.tags:
                raise SpecError(f"{rel}: argument {a!r} has tag {name!r}, not among universe_tags")

    def fact(self, raw) -> Fact:
        args = tuple(_elem(a) for a in raw["args"])
        self._check_args(raw["rel"], args)
        return Fact(raw["rel"], args)

    def template(self, raw) -> FactTemplate:
        args = tuple(_slot(a) for a in raw["args"])
        self._check_args(raw["rel"], args)
        try:
            return FactTemplate(raw["rel"], args)
        except (TypeError, ValueError) as e:
            raise SpecError(str(e)) from None

    def tail(self, raw) -> Optional[GeometricTail]:
        if raw is None:
            return None
        try:
            return GeometricTail(self.template(raw["template"]), _rat(raw["first"]), _rat(raw["ratio"]),
                                 raw.get("start", 1))
        except ValueError as e:
            raise SpecError(str(e)) from None

    def family(self, pairs: Iterable, tail_raw, value_key: str, bounded: bool) -> FactFamily:
        prefix = [(self.fact(e["fact"]), _rat(e[value_key])) for e in pairs]
        return FactFamily(prefix, self.tail(tail_raw), bounded)

    def model(self, raw):
        kind = raw["kind"]
        if kind == "ti":
            return validate_ti(self.family(raw["facts"], raw.get("tail"), "p", True))
        if kind == "bid":
            blocks = [Block((self.fact(e["fact"]), _rat(e["p"])) for e in block) for block in raw["blocks"]]
            t = raw.get("tail")
            tail = None
            if t is not None:
                try:
                    tail = BlockTail([self.template(x) for x in t["templates"]], [_rat(w) for w in t["weights"]],
                                     _rat(t["first"]), _rat(t["ratio"]), t.get("start", 1))
                except ValueError as e:
                    raise SpecError(str(e)) from None
            return validate_bid(blocks, tail)
        if kind == "poisson":
            return validate_poisson(self.family(raw["rates"], raw.get("tail"), "rate", False))
        if kind == "explicit":
            worlds = []
            for w in raw["worlds"]:
                counts: dict[Fact, int] = {}
                for e in w["facts"]:
                    f = self.fact(e["fact"])
                    counts[f] = counts.get(f, 0) + e.get("mult", 1)
                worlds.append((BagInstance(counts), _rat(w["p"])))
            return ExplicitWorldPdb(worlds)
        if kind == "superposition":
            return superpose([self.model(c) for c in raw["components"]], self.tail(raw.get("tail")))
        if kind == "completion":
            base = self.model(raw["base"])
            if not isinstance(base, TiPdb):
                raise SpecError("a completion base must be a ti model")
            ext = self.family(raw["extension"]["facts"], raw["extension"].get("tail"), "p", True)
            result = ti_completion(base, ext)
            if "lambda_cap" in raw:
                cap = _rat(raw["lambda_cap"])
                if not lambda_completion_check(base, ext, cap):
                    raise LambdaCapExceeded(f"an extension marginal exceeds the cap {cap}")
            return result
        if kind == "continuous":
            rel = raw.get("relation", "X")
            if "real" not in self.tags:
                raise SpecError("continuous models need the 'real' universe tag")
            if self.schema.relations.get(rel) != 1:
                raise SpecError(f"continuous relation {rel!r} must be declared unary")
            try:
                return PiecewiseIntensity([Piece(_rat(p["lo"]), _rat(p["hi"]), _rat(p["density"]))
                                           for p in raw["pieces"]], rel)
            except ValueError as e:
                raise SpecError(str(e)) from None
        raise SpecError(f"unknown model kind {kind!r}")


def validate_document(doc) -> None:
    """Structural check against :data:`FILE_SCHEMA`; raises SpecError."""
    err = jsonschema.exceptions.best_match(_VALIDATOR.iter_errors(doc))
    if err is not None:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise SpecError(f"{where}: {err.message}")


def load_document(doc) -> PdbSpec:
    validate_document(doc)
    try:
        schema = Schema.from_pairs((r["name"], r["arity"]) for r in doc["schema"])
    except ValueError as e:
        raise SpecError(str(e)) from None
    tags = tuple(doc["universe_tags"])
    model = _Decoder(schema, tags).model(doc["model"])
    return PdbSpec(schema, tags, model, doc["model"]["kind"])


def load_spec(path: Union[str, Path]) -> PdbSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SpecError(f"not valid JSON: {e}") from None
    return load_document(doc)


# -- encoding ---------------------------------------------------------------------------


def rat_text(x) -> str:
    return str(Fraction(x))


def elem_json(e):
    if e is INDEX:
        return {"index": True}
    tag = elem_tag(e)
    if tag == 2:
        return {"q": rat_text(e)}
    if tag == 3:
        return {"real": e}
    return e


def fact_json(f: Fact) -> dict:
    return {"rel": f.relation, "args": [elem_json(a) for a in f.args]}


def _template_json(t: FactTemplate) -> dict:
    return {"rel": t.relation, "args": [elem_json(a) for a in t.args]}


def _tail_json(t: GeometricTail) -> dict:
    return {"template": _template_json(t.template), "first": rat_text(t.first),
            "ratio": rat_text(t.ratio), "start": t.start}


def family_json(fam: FactFamily, value_key: str = "p") -> dict:
    out: dict = {"facts": [{"fact": fact_json(f), value_key: rat_text(p)} for f, p in fam.prefix]}
    if fam.tail is not None:
        out["tail"] = _tail_json(fam.tail)
    return out


def model_json(model) -> dict:
    if isinstance(model, TiPdb):
        return {"kind": "ti", **family_json(model.family)}
    if isinstance(model, BidPdb):
        out: dict = {"kind": "bid", "blocks": [[{"fact": fact_json(f), "p": rat_text(p)} for f, p in b.facts]
                                               for b in model.blocks]}
        if model.tail is not None:
            t = model.tail
            out["tail"] = {"templates": [_template_json(x) for x in t.templates],
                           "weights": [rat_text(w) for w in t.weights],
                           "first": rat_text(t.first), "ratio": rat_text(t.ratio), "start": t.start}
        return out
    if isinstance(model, PoissonPdb):
        fam = family_json(model.rates, "rate")
        return {"kind": "poisson", "rates": fam["facts"], **({"tail": fam["tail"]} if "tail" in fam else {})}
    if isinstance(model, ExplicitWorldPdb):
        return {"kind": "explicit", "worlds": [
            {"p": rat_text(p), "facts": [{"fact": fact_json(f), "mult": m} for f, m in w.items()]}
            for w, p in model.worlds]}
    if isinstance(model, SuperposedPdb):
        out = {"kind": "superposition", "components": [model_json(m) for m in model.models]}
        if model.tail is not None:
            out["tail"] = _tail_json(model.tail)
        return out
    if isinstance(model, PiecewiseIntensity):
        return {"kind": "continuous", "relation": model.relation,
                "pieces": [{"lo": rat_text(p.lo), "hi": rat_text(p.hi), "density": rat_text(p.density)}
                           for p in model.pieces]}
    raise TypeError(f"cannot serialize {model!r}")


def schema_json(schema: Schema) -> list:
    return [{"name": n, "arity": a} for n, a in sorted(schema.relations.items())]


def dump_document(spec: PdbSpec) -> dict:
    return {"schema": schema_json(spec.schema), "universe_tags": list(spec.universe_tags),
            "model": model_json(spec.model)}


def merge_headers(specs: Iterable[PdbSpec]) -> tuple[Schema, tuple]:
    """Union of schemas (arities must agree) and of universe tags."""
    rels: dict[str, int] = {}
    tags: list[str] = []
    for s in specs:
        for name, arity in s.schema.relations.items():
            if rels.setdefault(name, arity) != arity:
                raise SpecError(f"relation {name!r} has arity {rels[name]} and {arity} in different specs")
        tags += [t for t in s.universe_tags if t not in tags]
    return Schema(rels), tuple(tags)


__all__ = [
    "ALL_TAGS", "FILE_SCHEMA", "PdbSpec", "load_spec", "load_document", "validate_document",
    "dump_document", "model_json", "family_json", "fact_json", "elem_json", "rat_text", "merge_headers",
]
