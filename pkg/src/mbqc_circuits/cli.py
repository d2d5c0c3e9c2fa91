"""Command-line front end.

Exit status: 0 success, 1 unreadable or malformed input, 2 the graph has no
gflow, 3 a verification or identity check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

from mbqc_circuits.acausal import rewrite_acausal_to_ordinary, spt_gflow
from mbqc_circuits.corpus import gflow_corpus
from mbqc_circuits.flow import find_max_delayed_gflow
from mbqc_circuits.graph import LoadedGraph, load_graph, validate_open_graph
from mbqc_circuits.identities import run_identity_suite
from mbqc_circuits.pathcover import build_path_cover
from mbqc_circuits.simulator import circuit_unitary, pattern_map, phase_fit
from mbqc_circuits.translator import MeasurementPattern, parallelize_j, translate_gflow_pattern

if TYPE_CHECKING:
    from collections.abc import Sequence

    from mbqc_circuits.circuit import Circuit
    from mbqc_circuits.graph import OpenGraph

EXIT_OK, EXIT_PARSE, EXIT_NO_GFLOW, EXIT_VERIFY = 0, 1, 2, 3
COMMANDS = ("gflow", "pathcover", "translate", "acausal", "verify", "identities")


class CliError(Exception):
    def __init__(self, code: int, message: str) -> None:
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class RunConfig:
    """Parsed command line."""

    command: str
    input: str | None
    output: str | None
    route: str = "surgery"
    parallelize_j: bool = False
    tolerance: float = 1e-9
    seed: int = 0
    corpus: int | None = None
    fmt: str = "json"

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


# pipeline pieces ------------------------------------------------------------------------


def _read_graph(path: str | None) -> LoadedGraph:
    if path is None:
        raise CliError(EXIT_PARSE, "an input graph file is required")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc.strerror}") from None
    try:
        loaded = load_graph(text)
    except ValueError as exc:
        raise CliError(EXIT_PARSE, f"invalid graph file: {exc}") from None
    report = validate_open_graph(loaded.graph)
    if not report.ok:
        raise CliError(EXIT_PARSE, "invalid graph: " + "; ".join(report.violations))
    return loaded


def _pattern(loaded: LoadedGraph) -> MeasurementPattern:
    g = loaded.graph
    missing = sorted(g.non_outputs - set(loaded.angles))
    if missing:
        names = ", ".join(loaded.symbols.name_of(v) for v in missing)
        raise CliError(EXIT_PARSE, f"missing angles for {names}")
    _require_gflow(g)
    return MeasurementPattern.with_gflow(g, {v: loaded.angles[v] for v in sorted(g.non_outputs)})


def _require_gflow(g: OpenGraph) -> None:
    if find_max_delayed_gflow(g) is None:
        raise CliError(EXIT_NO_GFLOW, "graph has no gflow")


def _route_circuit(p: MeasurementPattern, route: str, parallel: bool) -> Circuit:
    if route == "surgery":
        c = translate_gflow_pattern(p)
    else:
        c = rewrite_acausal_to_ordinary(spt_gflow(p), p.graph)
    return parallelize_j(c).to_circuit() if parallel else c


def verify_pattern(p: MeasurementPattern, tol: float, parallel: bool = False) -> dict[str, Any]:
    """Compare both translation routes against the pattern's dense map.

    A route passes when its unitary matches ``pattern_map`` up to a global
    phase with scale ``2^{-|O^C|/2}``, both within ``tol``.
    """
    target = pattern_map(p.graph, p.angles)
    want = 2.0 ** (-len(p.graph.non_outputs) / 2)
    routes = {}
    for route in ("surgery", "acausal"):
        c = _route_circuit(p, route, parallel)
        theta, s, err = phase_fit(target, circuit_unitary(c))
        scale_err = abs(s - want)
        routes[route] = {
            "gates": len(c.gates),
            "phase": theta,
            "scale": s,
            "scale_error": scale_err,
            "max_error": err,
            "pass": bool(err < tol and scale_err < tol),
        }
    return {"expected_scale": want, "routes": routes, "pass": all(r["pass"] for r in routes.values())}


# commands ------------------------------------------------------------------------------


def _names(loaded: LoadedGraph, ids: Sequence[int]) -> list[str]:
    return [loaded.symbols.name_of(v) for v in ids]


def _cmd_gflow(cfg: RunConfig) -> tuple[str, int]:
    loaded = _read_graph(cfg.input)
    gf = find_max_delayed_gflow(loaded.graph)
    if gf is None:
        raise CliError(EXIT_NO_GFLOW, "graph has no gflow")
    layers = [_names(loaded, sorted(layer)) for layer in gf.layers]
    g = {loaded.symbols.name_of(v): _names(loaded, sorted(s)) for v, s in gf.g.items()}
    if cfg.fmt == "text":
        lines = [f"depth {gf.depth}"]
        lines += [f"layer {k}: {' '.join(layer)}" for k, layer in enumerate(layers)]
        lines += [f"g({v}) = {{{', '.join(s)}}}" for v, s in g.items()]
        return "\n".join(lines) + "\n", EXIT_OK
    return json.dumps({"depth": gf.depth, "layers": layers, "g": g}) + "\n", EXIT_OK


def _cmd_pathcover(cfg: RunConfig) -> tuple[str, int]:
    loaded = _read_graph(cfg.input)
    _require_gflow(loaded.graph)
    paths = [_names(loaded, p) for p in build_path_cover(loaded.graph).paths]
    if cfg.fmt == "text":
        return "".join(f"w{w}: {' -> '.join(p)}\n" for w, p in enumerate(paths)), EXIT_OK
    return json.dumps({"paths": paths}) + "\n", EXIT_OK


def _wire_legend(loaded: LoadedGraph, paths: Sequence[Sequence[int]] | None) -> str:
    if paths is None:
        return ""
    return "".join(f"w{w}: {' -> '.join(_names(loaded, p))}\n" for w, p in enumerate(paths))


def _cmd_translate(cfg: RunConfig) -> tuple[str, int]:
    loaded = _read_graph(cfg.input)
    c = _route_circuit(_pattern(loaded), cfg.route, cfg.parallelize_j)
    if cfg.fmt == "text":
        return _wire_legend(loaded, c.paths) + "\n" + c.diagram(), EXIT_OK
    return c.to_jsonl(), EXIT_OK


def _cmd_acausal(cfg: RunConfig) -> tuple[str, int]:
    loaded = _read_graph(cfg.input)
    ac = spt_gflow(_pattern(loaded))
    if cfg.fmt == "text":
        flags = ac.flags()
        lines = [_wire_legend(loaded, ac.paths)]
        lines.append("J order: " + " ".join(_names(loaded, ac.schedule)) + "\n")
        for gate, ok in zip(ac.gates, flags):
            a, b = _names(loaded, gate.positions)
            lines.append(f"CZ({a}!, {b}!) {'same slice' if ok else 'acausal'}\n")
        return "".join(lines), EXIT_OK
    return ac.to_jsonl(), EXIT_OK


def _cmd_verify(cfg: RunConfig) -> tuple[str, int]:
    if cfg.corpus is not None:
        entries = gflow_corpus(cfg.seed, cfg.corpus)
        reports = []
        for e in entries:
            rep = verify_pattern(MeasurementPattern.with_gflow(e.graph, e.angles), cfg.tolerance, cfg.parallelize_j)
            reports.append({"index": e.index, "vertices": len(e.graph.vertices), **rep})
        worst = {
            route: max(r["routes"][route]["max_error"] for r in reports) for route in ("surgery", "acausal")
        }
        failed = [r["index"] for r in reports if not r["pass"]]
        doc: dict[str, Any] = {
            "seed": cfg.seed,
            "count": len(reports),
            "tolerance": cfg.tolerance,
            "worst_max_error": worst,
            "failed": failed,
            "pass": not failed,
        }
        if cfg.fmt == "text":
            lines = [f"{'PASS' if r['pass'] else 'FAIL'} graph {r['index']}" for r in reports]
            lines.append(f"worst max error: surgery {worst['surgery']:.3e}, acausal {worst['acausal']:.3e}")
            text = "\n".join(lines) + "\n"
        else:
            text = json.dumps(doc) + "\n"
        return text, EXIT_OK if doc["pass"] else EXIT_VERIFY
    loaded = _read_graph(cfg.input)
    rep = verify_pattern(_pattern(loaded), cfg.tolerance, cfg.parallelize_j)
    rep = {"tolerance": cfg.tolerance, **rep}
    if cfg.fmt == "text":
        lines = [f"expected scale {rep['expected_scale']:.12g}"]
        for route, r in rep["routes"].items():
            lines.append(
                f"{'PASS' if r['pass'] else 'FAIL'} {route}: scale {r['scale']:.12g} "
                f"phase {r['phase']:.12g} max error {r['max_error']:.3e}"
            )
        text = "\n".join(lines) + "\n"
    else:
        text = json.dumps(rep) + "\n"
    return text, EXIT_OK if rep["pass"] else EXIT_VERIFY


def _cmd_identities(cfg: RunConfig) -> tuple[str, int]:
    tol = min(cfg.tolerance, 1e-12)
    checks = run_identity_suite(seed=cfg.seed, tol=tol)
    ok = all(c.passed for c in checks)
    if cfg.fmt == "json":
        doc = {
            "tolerance": tol,
            "checks": [
                {"name": c.name, "family": c.family, "error": c.error if math.isfinite(c.error) else None, "pass": c.passed}
                for c in checks
            ],
            "pass": ok,
        }
        text = json.dumps(doc) + "\n"
    else:
        text = "".join(c.line() + "\n" for c in checks)
        text += f"{sum(c.passed for c in checks)}/{len(checks)} identities hold\n"
    return text, EXIT_OK if ok else EXIT_VERIFY


_HANDLERS = {
    "gflow": _cmd_gflow,
    "pathcover": _cmd_pathcover,
    "translate": _cmd_translate,
    "acausal": _cmd_acausal,
    "verify": _cmd_verify,
    "identities": _cmd_identities,
}


def run(cfg: RunConfig) -> tuple[str, int]:
    """Execute one command and return ``(output text, exit status)``.

    Errors are reported as :class:`CliError` with the exit status attached.
    """
    return _HANDLERS[cfg.command](cfg)


# argument parsing ----------------------------------------------------------------------


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError("must be a positive number")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write the result here instead of stdout")
    common.add_argument(
        "--format", dest="fmt", choices=("json", "text"), help="default: text for identities, json otherwise"
    )
    common.add_argument("--tolerance", type=_positive_float, default=1e-9)
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(
        prog="mbqc-circuits", description="Translate MBQC patterns with gflow into quantum circuits."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gflow", parents=[common], help="maximally delayed gflow").add_argument("input")
    sub.add_parser("pathcover", parents=[common], help="path cover from matching rounds").add_argument("input")
    tr = sub.add_parser("translate", parents=[common], help="ordinary circuit as JSON lines")
    tr.add_argument("input")
    tr.add_argument("--route", choices=("surgery", "acausal"), default="surgery")
    tr.add_argument("--parallelize-j", action="store_true")
    sub.add_parser("acausal", parents=[common], help="circuit with acausal CZ gates").add_argument("input")
    ve = sub.add_parser("verify", parents=[common], help="check both routes against the dense pattern map")
    ve.add_argument("input", nargs="?")
    ve.add_argument("--corpus", type=int, metavar="COUNT", help="verify COUNT seeded random graphs instead")
    ve.add_argument("--parallelize-j", action="store_true")
    sub.add_parser("identities", parents=[common], help="run the circuit identity suite")
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "verify" and (ns.input is None) == (ns.corpus is None):
        parser.error("verify needs exactly one of an input file or --corpus")
    return RunConfig(
        command=ns.command,
        input=getattr(ns, "input", None),
        output=ns.output,
        route=getattr(ns, "route", "surgery"),
        parallelize_j=getattr(ns, "parallelize_j", False),
        tolerance=ns.tolerance,
        seed=ns.seed,
        corpus=getattr(ns, "corpus", None),
        fmt=ns.fmt or ("text" if ns.command == "identities" else "json"),
    )


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    with open(output, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_PARSE
    try:
        text, code = run(cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    _emit(text, cfg.output)
    return code
