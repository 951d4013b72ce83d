"""Command-line entry point.

Exit codes: 0 when every check passes, 2 when a mathematical check fails,
1 for usage, I/O and schema errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .analysis import (
    concatenated_grid_sequence,
    eventually_constant,
    extract_cauchy_subsequence,
    finite_prefix,
    inverse_sequence,
    is_cauchy_diversity,
    is_cauchy_metric,
)
from .conformity import (
    ConformityBase,
    compare_uniformities,
    filter_base_from_json,
    functor_diagram_check,
    pointwise_conformity,
    validate_conformity,
)
from .core import (
    TOL,
    DiversityError,
    GroundSet,
    cardinality_function,
    check_axioms,
    function_from_values,
)
from .metrization import NestedBase, random_nested_base, refine_nested_base, verify_metrization
from .power import generation_check, uc_test_pseudodiversity, validate_power_conformity
from .zoo import (
    PointCloud,
    WeightedGraph,
    diameter_diversity,
    euclidean_diameter,
    euclidean_steiner,
    format_table,
    graph_steiner_diversity,
    grid_experiment,
)

DEFAULT_SEED = 0
MAX_GRID_N = 100


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Input parsing


def parse_n(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError("--n needs at least one value")
    return out


def read_input(path: str | None) -> tuple[object, bytes]:
    if path is None:
        raise UsageError("--input is required")
    try:
        raw = sys.stdin.buffer.read() if path == "-" else open(path, "rb").read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    try:
        return json.loads(raw.decode("utf-8")), raw
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    except UnicodeDecodeError:
        raise UsageError(f"{path}: input is not UTF-8") from None


def diversity_from_json(obj, seed: int = DEFAULT_SEED):
    """(δ, ground) from a diversity description."""
    if not isinstance(obj, dict) or "kind" not in obj:
        raise UsageError("diversity description needs a 'kind'")
    kind = obj["kind"]
    try:
        if kind == "diameter":
            cloud = PointCloud(obj["points"], obj.get("labels"))
            return diameter_diversity(cloud.metric()), cloud.labels
        if kind == "random-diameter":
            rng = np.random.default_rng(seed)
            n, dim = int(obj.get("n", 5)), int(obj.get("dim", 2))
            cloud = PointCloud(rng.random((n, dim)))
            return diameter_diversity(cloud.metric()), cloud.labels
        if kind == "steiner-graph":
            g = WeightedGraph(obj["vertices"], obj["edges"])
            return graph_steiner_diversity(g), g.vertices
        if kind == "random-steiner-graph":
            rng = np.random.default_rng(seed)
            n = int(obj.get("n", 6))
            edges = [(i, i + 1, float(rng.integers(1, 10))) for i in range(n - 1)]
            for i in range(n):
                for j in range(i + 2, n):
                    if rng.random() < 0.4:
                        edges.append((i, j, float(rng.integers(1, 10))))
            g = WeightedGraph(range(n), edges)
            return graph_steiner_diversity(g), g.vertices
        if kind == "cardinality":
            X = GroundSet(obj["ground"])
            return cardinality_function(X), X
        if kind == "table":
            X = GroundSet(obj["ground"])
            vals = {tuple(e["set"]): float(e["value"]) for e in obj["values"]}
            return function_from_values(X, vals, obj.get("name", "table")), X
    except (KeyError, TypeError) as e:
        raise UsageError(f"malformed '{kind}' description: missing or bad field {e}") from None
    raise UsageError(f"unknown diversity kind {kind!r}")


def sequence_from_json(obj):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise UsageError("sequence description needs a 'kind'")
    kind = obj["kind"]
    pt = lambda p: tuple(float(v) for v in (p if isinstance(p, list) else [p]))  # noqa: E731
    try:
        if kind == "grid-concat":
            return concatenated_grid_sequence()
        if kind == "inverse":
            return inverse_sequence()
        if kind == "eventually-constant":
            return eventually_constant([pt(p) for p in obj.get("prefix", [])], pt(obj["constant"]))
        if kind == "finite-prefix":
            return finite_prefix([pt(p) for p in obj["prefix"]], obj.get("period"))
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"malformed '{kind}' sequence: {e}") from None
    raise UsageError(f"unknown sequence kind {kind!r}")


DEMOS = {
    "grid-concat": {"kind": "grid-concat"},
    "inverse": {"kind": "inverse"},
    "constant": {"kind": "eventually-constant", "prefix": [[0.0], [1.0]], "constant": [0.5]},
    "alternating": {"kind": "finite-prefix", "prefix": [[0.0], [1.0]], "period": 2},
}


# ---------------------------------------------------------------------------
# Commands; each returns (result, passed)


def pointwise_demo(seed: int) -> dict:
    """Five random step functions on [0, 1] sampled at three points."""
    rng = np.random.default_rng(seed)
    return {"kind": "pointwise", "sample_points": [0.0, 0.5, 1.0],
            "functions": {f"f{k}": [float(v) for v in rng.integers(0, 5, 3) / 4] for k in range(5)}}


def cmd_grid(args):
    ns = parse_n(args.n or "2..12")
    if any(n < 1 or n > MAX_GRID_N for n in ns):
        raise UsageError(f"grid sizes must lie in 1..{MAX_GRID_N}")
    table = grid_experiment(ns, tol=args.tol)
    return table.to_json(), table.passed


def cmd_axioms(args, obj):
    delta, X = diversity_from_json(obj, args.seed)
    rep = check_axioms(delta, X, mode=args.mode, samples=args.samples, seed=args.seed, tol=args.tol)
    return rep.to_json(), rep.passed


def cmd_cauchy(args, obj):
    s = sequence_from_json(obj)
    dim = 3 if s.kind == "grid-concat" else len(s.element(1))
    which = getattr(args, "diversity", "steiner")
    delta = euclidean_steiner(dim) if which == "steiner" else euclidean_diameter()
    metric = is_cauchy_metric(s)
    div = is_cauchy_diversity(s, delta)
    result = {"sequence": s.to_json(), "metric": metric.to_json(),
              "diversity": {"name": delta.name, **div.to_json()}}
    passed = True
    if args.extract_subsequence:
        sub = extract_cauchy_subsequence(s, euclidean_diameter())
        result["subsequence"] = sub.to_json()
        passed = sub.passed
    return result, passed


def _conformity(obj) -> ConformityBase:
    base = filter_base_from_json(obj)
    out = validate_conformity(base)
    if not isinstance(out, ConformityBase):
        raise UsageError(f"input is not a conformity: {json.dumps(out.to_json(), sort_keys=True)}")
    return out


def cmd_conformity(args, obj):
    action = args.action
    if action == "validate" and isinstance(obj, dict) and obj.get("kind") == "pointwise":
        if not isinstance(obj.get("functions"), dict):
            raise UsageError("pointwise input needs a 'functions' object")
        c = pointwise_conformity(obj["functions"])
        return {"input": obj, "base_size": len(c.families), **c.to_json(), "passed": True}, True
    if action == "validate":
        out = validate_conformity(filter_base_from_json(obj))
        return out.to_json() | {"passed": out.passed}, out.passed
    if action == "metrize":
        if obj is None:
            b = random_nested_base(args.seed)
        elif isinstance(obj, dict) and "levels" in obj:
            b = NestedBase.from_json(obj)
        else:
            b = refine_nested_base(_conformity(obj))
        rep = verify_metrization(b, tol=args.tol)
        return {"base": b.to_json(), **rep.to_json()}, rep.passed
    if action == "uc-test":
        c = _conformity(obj)
        if "diversity" not in obj:
            raise UsageError("uc-test input needs a 'diversity' description")
        delta, X = diversity_from_json(obj["diversity"], args.seed)
        if X != c.ground:
            raise UsageError("diversity and conformity use different grounds")
        rep = uc_test_pseudodiversity(delta, c, obj.get("eps"), tol=args.tol)
        return rep.to_json(), rep.passed
    if action == "power":
        rep = validate_power_conformity(_conformity(obj))
        return rep.to_json(), rep.passed
    if action == "generation":
        rep = generation_check(_conformity(obj))
        return rep.to_json(), rep.passed
    raise UsageError(f"unknown conformity action {action!r}")


def cmd_functors(args, obj):
    delta, X = diversity_from_json(obj, args.seed)
    diag = functor_diagram_check(delta, X)
    cmp = compare_uniformities([delta], X)
    result = {"diagram": diag.to_json(), "uniformities": cmp.to_json()}
    return result, diag.passed and cmp.holds


# ---------------------------------------------------------------------------
# Output


def _text(result, indent=0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(result, dict):
        if "columns" in result and "rows" in result:
            cols = result["columns"]
            lines.append(format_table(cols, [[r[c] for c in cols] for r in result["rows"]]).rstrip("\n"))
            result = {k: v for k, v in result.items() if k not in ("columns", "rows")}
        for k, v in result.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.append(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {json.dumps(v, sort_keys=True)}")
    elif isinstance(result, list):
        for v in result:
            lines.append(f"{pad}- {json.dumps(v, sort_keys=True, ensure_ascii=False)}")
    else:
        lines.append(f"{pad}{result}")
    return "\n".join(lines)


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False,
                          default=_default) + "\n"
    return _text(json.loads(json.dumps(report, default=_default))) + "\n"


def _default(o):
    if hasattr(o, "item"):
        return o.item()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="JSON input file, or - for stdin")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--tol", type=float, default=TOL)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--format", choices=("json", "text"), default="json")

    p = argparse.ArgumentParser(prog="diversities", description="Diversities and conformities toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid", parents=[common], help="MST and Steiner bounds on the cube grids G_n")
    g.add_argument("--n", help="sizes, e.g. 2..12 or 2,5,10")

    a = sub.add_parser("axioms", parents=[common], help="check D1, D2 and monotonicity")
    a.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    a.add_argument("--samples", type=int, default=2000)

    c = sub.add_parser("conformity", parents=[common], help="conformity tools")
    c.add_argument("action", choices=("validate", "metrize", "uc-test", "power", "generation"))
    c.add_argument("--demo", choices=("pointwise",), help="sampled pointwise-convergence conformity")

    q = sub.add_parser("cauchy", parents=[common], help="Cauchy verdicts for a sequence")
    q.add_argument("--demo", choices=sorted(DEMOS))
    q.add_argument("--diversity", choices=("steiner", "diameter"), default="steiner")
    q.add_argument("--extract-subsequence", action="store_true")

    sub.add_parser("functors", parents=[common], help="diversity/uniformity/topology diagram check")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        obj, raw = None, b""
        if args.command == "cauchy" and args.demo:
            obj = DEMOS[args.demo]
            raw = json.dumps(obj, sort_keys=True).encode()
        elif args.command == "conformity" and args.demo:
            if args.action != "validate":
                raise UsageError("--demo pointwise only applies to 'conformity validate'")
            obj = pointwise_demo(args.seed)
            raw = json.dumps(obj, sort_keys=True).encode()
        elif args.input is not None:
            obj, raw = read_input(args.input)
        elif args.command in ("axioms", "functors") or (
            args.command == "conformity" and args.action != "metrize"
        ) or args.command == "cauchy":
            raise UsageError("--input is required" + (" (or --demo)" if args.command == "cauchy" else ""))
        if args.command == "grid":
            raw = (args.n or "2..12").encode()
            result, passed = cmd_grid(args)
        elif args.command == "axioms":
            result, passed = cmd_axioms(args, obj)
        elif args.command == "conformity":
            if obj is None:
                raw = f"random-nested-base:{args.seed}".encode()
            result, passed = cmd_conformity(args, obj)
        elif args.command == "cauchy":
            result, passed = cmd_cauchy(args, obj)
        else:
            result, passed = cmd_functors(args, obj)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DiversityError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    report = {
        "tool": "diversities",
        "version": __version__,
        "command": args.command if args.command != "conformity" else f"conformity {args.action}",
        "seed": args.seed,
        "tol": args.tol,
        "input_sha256": hashlib.sha256(raw).hexdigest(),
        "passed": bool(passed),
        "result": result,
    }
    text = render(report, args.format)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8", newline="\n") as f:
                f.write(text)
        except OSError as e:
            print(f"error: cannot write {args.output}: {e.strerror}", file=sys.stderr)
            return 1
    else:
        sys.stdout.write(text)
    return 0 if passed else 2


if __name__ == "__main__":
    sys.exit(main())
