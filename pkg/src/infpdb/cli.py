"""Command-line front end.

Every subcommand prints JSON (``sample`` prints one JSON object per line).
Exit codes: 0 success, 2 invalid spec or PDB, 3 query parse/check error,
4 world budget exceeded, 5 mode mismatch.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import combinators
from .bid import BidPdb
from .combinators import SuperposedPdb, substream
from .continuous import PiecewiseIntensity, count_statistics, sample_flat
from .core import BagInstance, ExplicitWorldPdb
from .errors import ModeMismatch, PdbError, QueryError, SpecError, WorldBudgetExceeded
from .poisson import PoissonPdb
from .pqe import MC_CHUNK, PqeResult, approx_pqe, exact_pqe, mc_pqe
from .query import parse_query
from .specfile import family_json, load_document, load_spec, merge_headers, model_json, rat_text
from .ti import DEFAULT_DELTA, TiPdb

EXIT_OK, EXIT_INVALID, EXIT_PARSE, EXIT_BUDGET, EXIT_MODE = 0, 2, 3, 4, 5


def _exit_code(err: PdbError) -> int:
    if isinstance(err, QueryError):
        return EXIT_PARSE
    if isinstance(err, WorldBudgetExceeded):
        return EXIT_BUDGET
    if isinstance(err, ModeMismatch):
        return EXIT_MODE
    return EXIT_INVALID


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _number(x) -> dict:
    """An exact rational as text next to its float value."""
    x = Fraction(x)
    return {"exact": rat_text(x), "float": float(x)}


def _bound(mb) -> dict:
    if mb.upper is None:
        return {"lower": rat_text(mb.lower), "upper": None}
    if mb.is_exact:
        return _number(mb.lower)
    # Brackets of infinite products have huge denominators; round outward.
    return {"lower": math.nextafter(float(mb.lower), -math.inf), "upper": math.nextafter(float(mb.upper), math.inf)}


def summarize(model) -> dict:
    if isinstance(model, TiPdb):
        fam = model.family
        return {"facts": len(fam.prefix) if fam.is_finite else "infinite", "xi": _bound(fam.total_mass())}
    if isinstance(model, BidPdb):
        return {"blocks": len(model.blocks) if model.is_finite else "infinite",
                "nonempty_mass": _bound(model.nonempty_family().total_mass())}
    if isinstance(model, PoissonPdb):
        return {"facts": len(model.rates.prefix) if model.is_finite else "infinite",
                "total_rate": _bound(model.total_rate())}
    if isinstance(model, ExplicitWorldPdb):
        return {"worlds": len(model), "expected_size": _number(model.expected_size())}
    if isinstance(model, SuperposedPdb):
        return {"components": len(model.components), "single_fact_tail": model.tail is not None,
                "nonempty_prob": _bound(combinators.nonempty_prob(model))}
    if isinstance(model, PiecewiseIntensity):
        return {"pieces": len(model.pieces), "total": _number(model.total)}
    return {}


def world_json(world: BagInstance) -> dict:
    return {repr(f): m for f, m in world.items()}


def _result_json(res: PqeResult, mode: str) -> dict:
    out: dict = {"mode": mode, "error_kind": res.error_kind}
    if isinstance(res.value, Fraction):
        out["value"] = rat_text(res.value)
        out["value_float"] = float(res.value)
    else:
        out["value"] = res.value
    cert = {}
    for k, v in res.certificate.items():
        cert[k] = rat_text(v) if isinstance(v, Fraction) else v
    if res.error_kind == "additive":
        cert["eps"] = rat_text(res.eps)
        cert["worlds_enumerated"] = res.worlds_enumerated
    elif res.error_kind == "hoeffding":
        cert.update(half_width=res.eps, confidence=res.confidence, samples=res.samples_drawn)
    else:
        cert["worlds_enumerated"] = res.worlds_enumerated
    out["certificate"] = cert
    return out


# -- subcommands -------------------------------------------------------------------------


def cmd_validate(args) -> int:
    spec = load_spec(args.spec)
    _emit({"valid": True, "kind": spec.kind, **summarize(spec.model)})
    return EXIT_OK


def cmd_sample(args) -> int:
    spec = load_spec(args.spec)
    if args.count < 0:
        raise SpecError("--count must be non-negative")
    for i, start in enumerate(range(0, args.count, MC_CHUNK)):
        n = min(MC_CHUNK, args.count - start)
        for world in combinators.sample_many(spec.model, substream(args.seed, i), n, args.delta):
            sys.stdout.write(json.dumps(world_json(world), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_pqe(args) -> int:
    spec = load_spec(args.spec)
    if args.mode == "approx" and not isinstance(spec.model, TiPdb):
        raise ModeMismatch(f"approx mode needs a ti spec, got {spec.kind}")
    q = parse_query(args.query, spec.schema)
    if args.mode == "exact":
        res = exact_pqe(spec.model, q, args.budget, args.workers)
    elif args.mode == "approx":
        res = approx_pqe(spec.model, q, Fraction(args.eps), args.budget, args.workers)
    else:
        res = mc_pqe(spec.model, q, args.samples, args.confidence, np.random.default_rng(args.seed), args.workers)
    _emit(_result_json(res, args.mode))
    return EXIT_OK


def cmd_combine(args) -> int:
    if args.superpose:
        specs = [load_spec(p) for p in args.superpose]
        schema, tags = merge_headers(specs)
        model = {"kind": "superposition", "components": [model_json(s.model) for s in specs]}
    else:
        base_path, ext_path = args.complete
        base, ext = load_spec(base_path), load_spec(ext_path)
        if not isinstance(ext.model, TiPdb):
            raise SpecError("the extension spec must be a ti model")
        schema, tags = merge_headers([base, ext])
        model = {"kind": "completion", "base": model_json(base.model), "extension": family_json(ext.model.family)}
        if args.lambda_cap is not None:
            model["lambda_cap"] = rat_text(Fraction(args.lambda_cap))
    doc = {"schema": [{"name": n, "arity": a} for n, a in sorted(schema.relations.items())],
           "universe_tags": list(tags), "model": model}
    built = load_document(doc)  # eager validation
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    _emit({"ok": True, "out": str(args.out), "kind": built.kind, **summarize(built.model)})
    return EXIT_OK


def _parse_window(text: str) -> tuple[Fraction, Fraction]:
    lo, sep, hi = text.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"window {text!r} is not LO:HI")
    return Fraction(lo), Fraction(hi)


def cmd_stats(args) -> int:
    from .plotting import plot_window_pmf

    spec = load_spec(args.spec)
    if not isinstance(spec.model, PiecewiseIntensity):
        raise ModeMismatch(f"stats needs a continuous spec, got {spec.kind}")
    intensity = spec.model
    windows = args.window
    if not windows:
        lo, hi = intensity.pieces[0].lo, intensity.pieces[-1].hi
        mid = (lo + hi) / 2
        windows = [(lo, mid), (mid, hi)]
    sizes, pts = sample_flat(intensity, np.random.default_rng(args.seed), args.count)
    report = count_statistics(np.split(pts, np.cumsum(sizes)[:-1]) if args.count else [], windows,
                              intensity, args.alpha)
    out = report.to_dict()
    out.update(fits=report.fits(), independent=report.independent())
    if args.figure_dir:
        figs = []
        for i, ws in enumerate(report.windows):
            figs.append(str(plot_window_pmf(ws, Path(args.figure_dir) / f"window_{i}.png", args.alpha)))
        out["figures"] = figs
    _emit(out)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infpdb", description="Countable and continuous probabilistic databases.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check that a spec describes a valid PDB")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sample", help="draw instances as newline-delimited JSON")
    p.add_argument("spec")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="total-variation tolerance for infinite models")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("pqe", help="probability that a Boolean query holds")
    p.add_argument("spec")
    p.add_argument("--query", required=True)
    p.add_argument("--mode", choices=["exact", "approx", "mc"], default="exact")
    p.add_argument("--eps", default="1/100", help="additive error for approx mode (rational)")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--budget", type=int, default=None, help="world budget (default from INFPDB_WORLD_BUDGET or 2**24)")
    p.set_defaults(func=cmd_pqe)

    p = sub.add_parser("combine", help="build a superposition or completion spec")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--superpose", nargs="+", metavar="SPEC")
    g.add_argument("--complete", nargs=2, metavar=("BASE", "EXT"))
    p.add_argument("--lambda-cap", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("stats", help="window count statistics of a continuous spec")
    p.add_argument("spec")
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=_parse_window, action="append", metavar="LO:HI")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--figure-dir", default=None)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PdbError as e:
        _emit({"valid": False, "error": type(e).__name__, "reason": e.reason, "message": str(e)})
        return _exit_code(e)
    except (ValueError, ZeroDivisionError) as e:
        _emit({"valid": False, "error": type(e).__name__, "reason": "invalid-argument", "message": str(e)})
        return EXIT_INVALID
    except OSError as e:
        _emit({"valid": False, "error": type(e).__name__, "reason": "io-error", "message": str(e)})
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
