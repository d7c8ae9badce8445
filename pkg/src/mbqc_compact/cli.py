"""Command-line front end: ``mbqc-compact <command> --in FILE ...``.

Exit codes: 0 ok, 1 verification failure, 2 input error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mbqc_compact.circuit import (
    Circuit,
    CircuitError,
    SlicedCircuit,
    circuit_stats,
    extended_translation,
)
from mbqc_compact.compactify import CompactifyError, compactify
from mbqc_compact.flow import FlowError, find_flow, max_delayed_gflow, ssf_from_flow
from mbqc_compact.generators import random_circuit
from mbqc_compact.graph import GraphError, OpenGraph, grid_graph, path_graph
from mbqc_compact.pattern import (
    MeasurementPattern,
    PatternError,
    canonical,
    flow_pattern,
    pattern_depth,
    pattern_from_circuit,
    pauli_simplify,
    signal_shift,
    standardize,
)
from mbqc_compact.pipeline import OptimizeResult, PipelineError, optimize
from mbqc_compact.sim import SimulationError, circuit_output_unitary, equivalent_up_to_phase

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

STAGES = ("translate", "standardize", "shift", "pauli", "extend", "compactify")
OPTIONAL_STAGES = frozenset({"standardize", "pauli"})
INPUT_KINDS = ("circuit", "pattern", "graph", "extended")
BENCH_EXPONENT_LIMIT = 3.5


class InputError(ValueError):
    """Bad files or flags; maps to exit code 2."""


@dataclass
class PipelineConfig:
    input_path: Path | None
    input_kind: str | None = None
    stages: tuple[str, ...] = ()
    verify: bool = False
    seed: int | None = None
    out: Path | None = None
    trace_out: Path | None = None
    dump_dir: Path | None = None
    report: str = "text"

    def validate(self) -> None:
        if self.input_kind is not None and self.input_kind not in INPUT_KINDS:
            raise InputError(f"unknown input kind {self.input_kind!r}")
        idx = [STAGES.index(s) if s in STAGES else -1 for s in self.stages]
        if -1 in idx:
            raise InputError(f"unknown stage in {self.stages}")
        if idx != sorted(set(idx)):
            raise InputError("stages must be listed once each, in pipeline order")
        if idx:
            required = [s for s in STAGES[idx[0] : idx[-1] + 1] if s not in OPTIONAL_STAGES]
            missing = [s for s in required if s not in self.stages]
            if missing:
                raise InputError(f"stage list has a gap: missing {', '.join(missing)}")


@dataclass
class _Output:
    report: dict = field(default_factory=dict)
    text: list[str] = field(default_factory=list)


# -- I/O -----------------------------------------------------------------


def _read_json(path: Path | None):
    if path is None:
        raise InputError("--in is required")
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _detect_kind(data) -> str:
    if not isinstance(data, dict):
        raise InputError("top-level JSON value must be an object")
    if "kind" in data:
        return data["kind"]
    if "commands" in data:
        return "pattern"
    if "slots" in data:
        return "extended"
    if "gates" in data:
        return "circuit"
    if "vertices" in data:
        return "graph"
    raise InputError("cannot tell whether the input is a circuit, pattern or graph")


def _load(path: Path | None, kind: str | None, allowed: tuple[str, ...]):
    data = _read_json(path)
    kind = kind or _detect_kind(data)
    if kind not in allowed:
        raise InputError(f"expected {' or '.join(allowed)} input, got {kind}")
    body = data.get(kind, data) if isinstance(data.get(kind), dict) else data
    loaders = {
        "circuit": Circuit.from_dict,
        "pattern": MeasurementPattern.from_dict,
        "graph": OpenGraph.from_dict,
        "extended": SlicedCircuit.from_dict,
    }
    return kind, loaders[kind](body)


def _write_json(path: Path | None, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _emit(out: _Output, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(out.report, indent=2, sort_keys=True))
    else:
        for line in out.text:
            print(line)


# -- commands ------------------------------------------------------------


def _optimize_text(rep: dict) -> str:
    return (
        f"flow depth {rep['flow_depth']}, SSF depth {rep['ssf_depth']}, "
        f"wires {rep['extended_wires']} -> {rep['wires_after']}, "
        f"circuit depth {rep['circuit_depth_before']} -> {rep['circuit_depth_after']}, "
        f"J layers {rep['jlayers_after']}, deg(G) {rep['graph_degree']}"
    )


def _dump_state(res: OptimizeResult, where: Path) -> None:
    where.mkdir(parents=True, exist_ok=True)
    _write_json(where / "pattern.json", res.pattern.to_dict())
    _write_json(where / "flow.json", res.flow.to_dict())
    _write_json(where / "ssf.json", res.ssf.to_dict())
    _write_json(where / "shifted.json", res.shifted.to_dict())
    _write_json(where / "extended.json", res.extended.to_dict())
    _write_json(where / "compact.json", res.compact.to_dict())
    _write_json(where / "trace.json", res.trace.to_dict())


def _optimize_one(circ: Circuit, cfg: PipelineConfig, pauli: bool, out: _Output) -> bool:
    res = optimize(circ, pauli=pauli)
    rep = res.report()
    ok = True
    if cfg.verify:
        ok = res.verify()
        rep["verified"] = ok
    out.report = rep
    out.text.append(_optimize_text(rep))
    if cfg.verify:
        out.text.append("verify: " + ("ok" if ok else "MISMATCH"))
    if cfg.out is not None:
        _write_json(cfg.out, {**res.compact.to_dict(), "input_order": list(res.input_order)})
    if cfg.trace_out is not None:
        _write_json(cfg.trace_out, res.trace.to_dict())
    if cfg.dump_dir is not None:
        _dump_state(res, cfg.dump_dir)
    return ok


def cmd_optimize(cfg: PipelineConfig, pauli: bool = False) -> int:
    cfg.validate()
    _, circ = _load(cfg.input_path, cfg.input_kind, ("circuit",))
    out = _Output()
    ok = _optimize_one(circ, cfg, pauli, out)
    _emit(out, cfg.report)
    return EXIT_OK if ok else EXIT_VERIFY


def _layers_text(layers: dict[int, int]) -> str:
    by: dict[int, list[int]] = {}
    for v, k in layers.items():
        by.setdefault(k, []).append(v)
    return " | ".join(f"{k}: {sorted(vs)}" for k, vs in sorted(by.items()))


def cmd_gflow(cfg: PipelineConfig) -> int:
    _, g = _load(cfg.input_path, cfg.input_kind, ("graph",))
    out = _Output()
    fl = find_flow(g)
    mdg = max_delayed_gflow(g)
    rep: dict = {"flow": None, "ssf": None, "max_delayed_gflow": mdg.to_dict() if mdg else None}
    if fl is None:
        if mdg is None:
            out.text.append("no flow, no gflow")
        else:
            out.text.append(f"no flow; gflow layers: {_layers_text(mdg.layers)}")
    else:
        ssf = ssf_from_flow(fl, g)
        optimal = mdg is not None and ssf.partition() == mdg.partition()
        rep.update(flow=fl.to_dict(), ssf=ssf.to_dict(), optimal=optimal)
        out.text.append(f"flow: {dict(sorted(fl.f.items()))} (depth {fl.depth})")
        out.text.append(f"flow layers: {_layers_text(fl.layers)}")
        out.text.append("SSF correcting sets: " + ", ".join(f"{i}: {sorted(s)}" for i, s in sorted(ssf.g.items())))
        out.text.append(f"SSF layers: {_layers_text(ssf.layers)}")
        out.text.append(f"max-delayed gflow layers: {_layers_text(mdg.layers)}")
        out.text.append("optimal: " + ("yes" if optimal else "no"))
    out.report = rep
    _emit(out, cfg.report)
    if fl is not None and not rep["optimal"]:
        return EXIT_INTERNAL
    return EXIT_OK


def _shifted_pattern(cfg: PipelineConfig, pauli: bool):
    kind, obj = _load(cfg.input_path, cfg.input_kind, ("circuit", "pattern"))
    if kind == "circuit":
        p = pattern_from_circuit(obj)
        fl = find_flow(p.space)
        if fl is None:
            raise InputError("translated pattern has no flow")
        p = flow_pattern(fl, p.space, p.angles())
    else:
        p = standardize(obj)
        fl = find_flow(p.space)
        if fl is None:
            raise InputError("pattern has no flow; cannot signal shift")
    rng = random.Random(cfg.seed) if cfg.seed is not None else None
    shifted = signal_shift(p, fl, rng)
    if pauli:
        shifted = pauli_simplify(shifted)
    return canonical(shifted), fl


def cmd_shift(cfg: PipelineConfig, pauli: bool = False) -> int:
    p, fl = _shifted_pattern(cfg, pauli)
    if cfg.out is not None:
        _write_json(cfg.out, p.to_dict())
    out = _Output({"flow_depth": fl.depth, "depth": pattern_depth(p)})
    out.text.append(f"flow depth {fl.depth}, shifted depth {pattern_depth(p)}")
    if cfg.out is None:
        out.report["pattern"] = p.to_dict()
        out.text.append(json.dumps(p.to_dict()))
    _emit(out, cfg.report)
    return EXIT_OK


def cmd_extend(cfg: PipelineConfig, pauli: bool = False) -> int:
    kind, obj = _load(cfg.input_path, cfg.input_kind, ("circuit", "pattern"))
    if kind == "circuit" or pauli:
        p, fl = _shifted_pattern(cfg, pauli)
    else:
        p, fl = obj, find_flow(obj.space)
    ext = extended_translation(p, fl)
    if cfg.out is not None:
        _write_json(cfg.out, ext.to_dict())
    st = circuit_stats(ext.circuit())
    out = _Output({"stats": st.to_dict()})
    out.text.append(f"extended circuit: {st.wires} wires, {st.jgates} J gates, {st.jlayers} J layers, depth {st.depth}")
    if cfg.out is None:
        out.report["extended"] = ext.to_dict()
        out.text.append(json.dumps(ext.to_dict()))
    _emit(out, cfg.report)
    return EXIT_OK


def cmd_compactify(cfg: PipelineConfig, pauli: bool = False) -> int:
    _, ext = _load(cfg.input_path, cfg.input_kind, ("extended",))
    edges = [s.gate.qubits for s in ext.slots if s.gate.kind == "E"]
    ins = [w for w in ext.wires if ext.initial.get(w) == "input"]
    outs = [w for w in ext.wires if w not in ext.measured]
    g = OpenGraph.build(ext.wires, set(edges), ins, outs)
    fl = find_flow(g)
    if fl is None:
        raise InputError("the entangling gates of the extended circuit have no flow")
    try:
        compact, trace = compactify(ext, fl, None if pauli else ssf_from_flow(fl, g), pauli=pauli)
    except CompactifyError as exc:
        if not pauli and "pauli=True" in str(exc):
            raise InputError(f"{exc} (rerun with --pauli)") from None
        raise
    if cfg.out is not None:
        _write_json(cfg.out, compact.to_dict())
    if cfg.trace_out is not None:
        _write_json(cfg.trace_out, trace.to_dict())
    ok = True
    st = circuit_stats(compact)
    out = _Output({"stats": st.to_dict(), "aborts": trace.aborts()})
    out.text.append(f"compact circuit: {len(ext.wires)} -> {st.wires} wires, {st.jlayers} J layers, depth {st.depth}")
    if cfg.verify:
        ok = _same_map(ext.circuit(), compact, trace.origin)
        out.report["verified"] = ok
        out.text.append("verify: " + ("ok" if ok else "MISMATCH"))
    if cfg.out is None:
        out.report["compact"] = compact.to_dict()
        out.text.append(json.dumps(compact.to_dict()))
    _emit(out, cfg.report)
    return EXIT_OK if ok else EXIT_VERIFY


def _same_map(ext: Circuit, compact: Circuit, origin: dict[int, int]) -> bool:
    carrier = {i: o for o, i in origin.items()}
    ins = list(ext.inputs())
    try:
        u = circuit_output_unitary(ext, ins)
        v = circuit_output_unitary(compact, [carrier[i] for i in ins])
    except SimulationError:
        return False
    return equivalent_up_to_phase(u, v)


def cmd_verify(cfg: PipelineConfig, pauli: bool = False, count: int = 20) -> int:
    out = _Output()
    if cfg.input_path is not None:
        cfg.verify = True
        ok = _optimize_one(_load(cfg.input_path, cfg.input_kind, ("circuit",))[1], cfg, pauli, out)
        _emit(out, cfg.report)
        return EXIT_OK if ok else EXIT_VERIFY
    rng = random.Random(cfg.seed if cfg.seed is not None else 0)
    failures = []
    for n in range(count):
        circ = random_circuit(rng)
        if not optimize(circ, pauli=pauli).verify():
            failures.append({"index": n, "circuit": circ.to_dict()})
    out.report = {"checked": count, "failures": failures}
    out.text.append(f"checked {count} random circuits, {len(failures)} mismatches")
    _emit(out, cfg.report)
    return EXIT_OK if not failures else EXIT_VERIFY


def _bench_graph(family: str, n: int) -> OpenGraph:
    if family == "path":
        return path_graph(range(n), [0], [n - 1])
    side = max(2, round(n**0.5))
    return grid_graph(side, side)


def bench_ssf(sizes, family: str = "path", repeats: int = 3) -> tuple[list[float], float]:
    """Best-of-``repeats`` wall time of ``ssf_from_flow`` per size and the fitted log-log slope."""
    times = []
    for n in sizes:
        g = _bench_graph(family, n)
        fl = find_flow(g)
        if fl is None:
            raise FlowError(f"benchmark graph of size {n} has no flow")
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            ssf_from_flow(fl, g)
            best = min(best, time.perf_counter() - t0)
        times.append(best)
    xs = [len(_bench_graph(family, n).vertices) for n in sizes]
    slope = float(np.polyfit(np.log(xs), np.log(times), 1)[0])
    return times, slope


def cmd_bench(cfg: PipelineConfig, sizes=(50, 100, 200, 400), family: str = "path") -> int:
    times, slope = bench_ssf(sizes, family)
    ok = slope <= BENCH_EXPONENT_LIMIT
    out = _Output({"family": family, "sizes": list(sizes), "seconds": times, "exponent": slope, "ok": ok})
    for n, t in zip(sizes, times):
        out.text.append(f"n={n:5d}  {t * 1e3:9.3f} ms")
    out.text.append(f"fitted exponent {slope:.2f} (limit {BENCH_EXPONENT_LIMIT})")
    _emit(out, cfg.report)
    return EXIT_OK if ok else EXIT_VERIFY


# -- entry point ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="input", type=Path, help="input JSON file")
    common.add_argument("--kind", choices=INPUT_KINDS, help="input kind (detected when omitted)")
    common.add_argument("--out", type=Path, help="write the main result JSON here")
    common.add_argument("--verify", action="store_true", help="check equivalence by simulation")
    common.add_argument("--emit-trace", type=Path, help="write the rewrite trace JSON here")
    common.add_argument("--pauli", action="store_true", help="apply Pauli measurement simplification")
    common.add_argument("--seed", type=int, help="seed for randomized choices")
    common.add_argument("--report", choices=("json", "text"), default="text")
    common.add_argument("--dump-state", type=Path, help="directory for every intermediate stage")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="mbqc-compact", description="Measurement pattern depth and wire compaction.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="circuit -> compact circuit")
    sub.add_parser("gflow", parents=[common], help="flow, SSF and max-delayed gflow of a graph")
    sub.add_parser("shift", parents=[common], help="signal shift a flow pattern")
    sub.add_parser("extend", parents=[common], help="extended circuit of a shifted pattern")
    sub.add_parser("compactify", parents=[common], help="compact an extended circuit")
    v = sub.add_parser("verify", parents=[common], help="simulate and compare before/after")
    v.add_argument("--count", type=int, default=20, help="random circuits when --in is absent")
    b = sub.add_parser("bench", parents=[common], help="runtime scaling of the SSF construction")
    b.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    b.add_argument("--family", choices=("path", "grid"), default="path")
    return parser


def _config(args: argparse.Namespace) -> PipelineConfig:
    stages = {
        "optimize": ("translate", "shift", "extend", "compactify"),
        "shift": ("shift",),
        "extend": ("extend",),
        "compactify": ("compactify",),
        "verify": ("translate", "shift", "extend", "compactify"),
    }.get(args.command, ())
    if args.pauli and stages and "shift" in stages:
        stages = tuple(s for s in STAGES if s in stages or s == "pauli")
    return PipelineConfig(
        input_path=args.input,
        input_kind=args.kind,
        stages=stages,
        verify=args.verify,
        seed=args.seed,
        out=args.out,
        trace_out=args.emit_trace,
        dump_dir=args.dump_state,
        report=args.report,
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    cfg = _config(args)
    if args.pauli and args.command == "gflow":
        print("error: --pauli has no meaning for gflow", file=sys.stderr)
        return EXIT_INPUT
    try:
        cfg.validate()
        if args.command == "optimize":
            return cmd_optimize(cfg, args.pauli)
        if args.command == "gflow":
            return cmd_gflow(cfg)
        if args.command == "shift":
            return cmd_shift(cfg, args.pauli)
        if args.command == "extend":
            return cmd_extend(cfg, args.pauli)
        if args.command == "compactify":
            return cmd_compactify(cfg, args.pauli)
        if args.command == "verify":
            return cmd_verify(cfg, args.pauli, args.count)
        return cmd_bench(cfg, tuple(args.sizes), args.family)
    except (InputError, GraphError, CircuitError, PatternError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as exc:
        # a circuit whose translation has no flow is a bad input, not a bug
        code = EXIT_INPUT if "no flow" in str(exc) or "source circuit" in str(exc) else EXIT_INTERNAL
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (CompactifyError, FlowError, SimulationError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
