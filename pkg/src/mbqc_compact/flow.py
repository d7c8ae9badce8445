"""Causal flow, generalised flow, Z-path parities and the signal shifted flow."""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from mbqc_compact.graph import OpenGraph, neighbors, odd_neighborhood


class FlowError(RuntimeError):
    """Raised when a flow object is inconsistent with its graph."""


@dataclass(frozen=True)
class Flow:
    """Causal flow ``f`` with its layering (outputs sit at layer 0)."""

    f: Mapping[int, int]
    layers: Mapping[int, int]

    @property
    def depth(self) -> int:
        return max(self.layers.values(), default=0)

    def inverse(self) -> dict[int, int]:
        return {v: k for k, v in self.f.items()}

    def to_dict(self) -> dict:
        return {
            "f": {str(k): v for k, v in sorted(self.f.items())},
            "layers": {str(k): v for k, v in sorted(self.layers.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> Flow:
        return cls(
            {int(k): int(v) for k, v in data["f"].items()},
            {int(k): int(v) for k, v in data["layers"].items()},
        )


@dataclass(frozen=True)
class GFlow:
    """Set-valued correction function ``g`` with its layering."""

    g: Mapping[int, frozenset[int]]
    layers: Mapping[int, int]

    @property
    def depth(self) -> int:
        return max(self.layers.values(), default=0)

    def partition(self) -> list[frozenset[int]]:
        """Layers as vertex sets, index 0 holding the outputs."""
        out: list[set[int]] = [set() for _ in range(self.depth + 1)]
        for v, lv in self.layers.items():
            out[lv].add(v)
        return [frozenset(s) for s in out]

    def to_dict(self) -> dict:
        return {
            "g": {str(k): sorted(v) for k, v in sorted(self.g.items())},
            "layers": {str(k): v for k, v in sorted(self.layers.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> GFlow:
        return cls(
            {int(k): frozenset(int(x) for x in v) for k, v in data["g"].items()},
            {int(k): int(v) for k, v in data["layers"].items()},
        )


@dataclass(frozen=True)
class ZPathParityTable:
    """Parity of the number of Z-paths between measured vertices.

    ``masks[j]`` is a bitmask over ``sources`` (indexed by position) whose
    set bits are the sources ``i`` with an odd number of Z-paths to ``j``.
    """

    sources: tuple[int, ...]
    masks: Mapping[int, int]
    successors: Mapping[int, frozenset[int]] = field(repr=False)

    def parity(self, i: int, j: int) -> int:
        try:
            idx = self.sources.index(i)
        except ValueError:
            return 0
        return (self.masks.get(j, 0) >> idx) & 1

    def reached(self, i: int) -> frozenset[int]:
        """Vertices ``j`` with ``parity(i, j) == 1``."""
        idx = self.sources.index(i)
        return frozenset(j for j, m in self.masks.items() if (m >> idx) & 1)


@dataclass(frozen=True)
class InfluencingPath:
    vertices: tuple[int, ...]


def _layers_from_successors(vertices: Iterable[int], succ: Mapping[int, set[int]]) -> dict[int, int]:
    """Longest-path distance to a sink; sinks get 0."""
    memo: dict[int, int] = {}
    state: dict[int, int] = {}

    def visit(v: int) -> int:
        if v in memo:
            return memo[v]
        stack = [(v, iter(sorted(succ.get(v, ()))))]
        state[v] = 1
        while stack:
            node, it = stack[-1]
            advanced = False
            for w in it:
                if w in memo:
                    continue
                if state.get(w) == 1:
                    raise FlowError(f"cyclic order through {w}")
                state[w] = 1
                stack.append((w, iter(sorted(succ.get(w, ())))))
                advanced = True
                break
            if not advanced:
                memo[node] = max((memo[w] + 1 for w in succ.get(node, ())), default=0)
                state[node] = 2
                stack.pop()
        return memo[v]

    for v in vertices:
        visit(v)
    return memo


def flow_successors(g: OpenGraph, f: Mapping[int, int]) -> dict[int, set[int]]:
    """Relations forced by F1 and F2: ``i < f(i)`` and ``i < j`` for ``j`` in ``N(f(i))``."""
    succ: dict[int, set[int]] = {v: set() for v in g.vertices}
    for i, fi in f.items():
        succ[i].add(fi)
        succ[i].update(neighbors(g, fi) - {i})
    return succ


def flow_layers(g: OpenGraph, f: Mapping[int, int]) -> dict[int, int]:
    return _layers_from_successors(g.vertices, flow_successors(g, f))


def find_flow(g: OpenGraph) -> Flow | None:
    """Causal flow by back-to-front matching, or ``None`` if none exists."""
    out = set(g.outputs)
    correctors = set(g.outputs) - g.input_set
    f: dict[int, int] = {}
    while True:
        new_out: set[int] = set()
        used: set[int] = set()
        for v in sorted(correctors):
            cand = neighbors(g, v) - out
            if len(cand) == 1:
                (u,) = cand
                if u in new_out:
                    continue
                f[u] = v
                new_out.add(u)
                used.add(v)
        if not new_out:
            break
        out |= new_out
        correctors = (correctors - used) | (new_out - g.input_set)
    if out != set(g.vertices):
        return None
    return Flow(f, flow_layers(g, f))


def verify_flow(g: OpenGraph, fl: Flow) -> list[str]:
    """List every violated flow condition; empty when ``fl`` is a flow."""
    errs: list[str] = []
    lay = fl.layers
    if set(fl.f) != set(g.non_outputs):
        errs.append("domain: f must be defined exactly on non-outputs")
    seen: dict[int, int] = {}
    for i, fi in sorted(fl.f.items()):
        if fi in seen:
            errs.append(f"injectivity: f({seen[fi]}) = f({i}) = {fi}")
        seen[fi] = i
        if fi not in g.vertices or fi in g.input_set:
            errs.append(f"codomain: f({i}) = {fi} is not a non-input vertex")
            continue
        if not lay.get(i, 0) > lay.get(fi, 0):
            errs.append(f"F1 at {i}: not earlier than f({i}) = {fi}")
        for j in neighbors(g, fi):
            if j != i and not lay.get(i, 0) > lay.get(j, 0):
                errs.append(f"F2 at {i}: neighbour {j} of f({i}) is not later")
        if i not in neighbors(g, fi):
            errs.append(f"F3 at {i}: {i} is not adjacent to f({i}) = {fi}")
    return errs


def verify_gflow(g: OpenGraph, gf: GFlow) -> list[str]:
    """List every violated gflow condition; empty when ``gf`` is a gflow."""
    errs: list[str] = []
    lay = gf.layers
    if set(gf.g) != set(g.non_outputs):
        errs.append("domain: g must be defined exactly on non-outputs")
    for i, gi in sorted(gf.g.items()):
        if gi & g.input_set:
            errs.append(f"codomain: g({i}) contains inputs {sorted(gi & g.input_set)}")
        for j in sorted(gi):
            if not lay.get(i, 0) > lay.get(j, 0):
                errs.append(f"G1 at {i}: {j} in g({i}) is not later")
        odd = odd_neighborhood(g, gi)
        for j in sorted(odd - {i}):
            if not lay.get(i, 0) > lay.get(j, 0):
                errs.append(f"G2 at {i}: {j} in Odd(g({i})) is not later")
        if i not in odd:
            errs.append(f"G3 at {i}: {i} not in Odd(g({i}))")
    return errs


def zpath_successors(g: OpenGraph, fl: Flow) -> dict[int, frozenset[int]]:
    """Edges of the Z-dependency graph: ``i -> N(f(i)) minus i``."""
    return {i: neighbors(g, fi) - {i} for i, fi in fl.f.items()}


def zpath_parities(fl: Flow, g: OpenGraph) -> ZPathParityTable:
    """Z-path parities by dynamic programming over the Z-dependency DAG."""
    succ = zpath_successors(g, fl)
    sources = tuple(sorted(fl.f))
    index = {v: n for n, v in enumerate(sources)}
    indeg = {v: 0 for v in g.vertices}
    for targets in succ.values():
        for j in targets:
            indeg[j] += 1
    ready = sorted(v for v, d in indeg.items() if d == 0)
    masks = {v: (1 << index[v]) if v in index else 0 for v in g.vertices}
    done = 0
    while ready:
        k = ready.pop()
        done += 1
        for j in succ.get(k, ()):
            masks[j] ^= masks[k]
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if done != len(indeg):
        raise FlowError("Z-dependency graph has a cycle")
    return ZPathParityTable(sources, masks, succ)


@dataclass(frozen=True)
class SignalShiftedFlow(GFlow):
    """A gflow obtained by signal shifting, with its output Z-corrections."""

    z: Mapping[int, frozenset[int]] = field(default_factory=dict)


def ssf_from_flow(fl: Flow, g: OpenGraph, table: ZPathParityTable | None = None) -> SignalShiftedFlow:
    """Correcting sets and layering of the signal shifted flow."""
    if table is None:
        table = zpath_parities(fl, g)
    outs = g.output_set
    s: dict[int, set[int]] = {i: set() for i in fl.f}
    z: dict[int, set[int]] = {i: set() for i in fl.f}
    for j, mask in table.masks.items():
        while mask:
            low = mask & -mask
            i = table.sources[low.bit_length() - 1]
            mask ^= low
            if j in outs:
                z[i].add(j)
            else:
                if j not in fl.f:
                    raise FlowError(f"f undefined on {j}")
                s[i].add(fl.f[j])
    layers = {v: 0 for v in outs}
    # later vertices (lower flow layer) first so every s(i) member is resolved
    for i in sorted(fl.f, key=lambda v: (fl.layers[v], v)):
        try:
            layers[i] = 1 + max(layers[j] for j in s[i])
        except KeyError as exc:
            raise FlowError(f"correcting set of {i} is not resolvable") from exc
    return SignalShiftedFlow(
        {i: frozenset(v) for i, v in s.items()},
        layers,
        {i: frozenset(v) for i, v in z.items()},
    )


def _gf2_solve(rows: list[int], target: int, ncols: int) -> int | None:
    """Solve ``A x = b`` over GF(2).

    ``rows[r]`` holds row ``r`` of ``A`` as a column bitmask and ``target``
    holds ``b`` as a row bitmask. Returns ``x`` as a column bitmask with
    free variables set to zero, or ``None`` if inconsistent.
    """
    aug = [(rows[r], (target >> r) & 1) for r in range(len(rows))]
    pivots: list[tuple[int, int]] = []
    r = 0
    for c in range(ncols):
        bit = 1 << c
        piv = next((k for k in range(r, len(aug)) if aug[k][0] & bit), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        pr, pb = aug[r]
        for k in range(len(aug)):
            if k != r and aug[k][0] & bit:
                aug[k] = (aug[k][0] ^ pr, aug[k][1] ^ pb)
        pivots.append((c, r))
        r += 1
    if any(row == 0 and b for row, b in aug[r:]):
        return None
    x = 0
    for c, pr in pivots:
        if aug[pr][1]:
            x |= 1 << c
    return x


def _correctable_gf2(g: OpenGraph, out: set[int], u: int) -> frozenset[int] | None:
    cols = sorted(out - g.input_set)
    rest = sorted(set(g.vertices) - out)
    rows = []
    for v in rest:
        nv = neighbors(g, v)
        rows.append(sum(1 << c for c, w in enumerate(cols) if w in nv))
    sol = _gf2_solve(rows, 1 << rest.index(u), len(cols))
    if sol is None:
        return None
    return frozenset(w for c, w in enumerate(cols) if (sol >> c) & 1)


def _correctable_brute(g: OpenGraph, out: set[int], u: int) -> frozenset[int] | None:
    cols = sorted(out - g.input_set)
    rest = set(g.vertices) - out
    for size in range(len(cols) + 1):
        for k in itertools.combinations(cols, size):
            if odd_neighborhood(g, k) & rest == {u}:
                return frozenset(k)
    return None


def _peel(g: OpenGraph, solver) -> GFlow | None:
    out = set(g.outputs)
    layers = {v: 0 for v in out}
    gmap: dict[int, frozenset[int]] = {}
    k = 0
    while True:
        k += 1
        found: dict[int, frozenset[int]] = {}
        for u in sorted(set(g.vertices) - out):
            sol = solver(g, out, u)
            if sol is not None:
                found[u] = sol
        if not found:
            break
        for u, sol in found.items():
            gmap[u] = sol
            layers[u] = k
        out |= set(found)
    if out != set(g.vertices):
        return None
    return GFlow(gmap, layers)


def max_delayed_gflow(g: OpenGraph) -> GFlow | None:
    """Maximally delayed gflow by layer peeling with GF(2) linear systems."""
    return _peel(g, _correctable_gf2)


def max_delayed_gflow_bruteforce(g: OpenGraph) -> GFlow | None:
    """Same layer peeling, but correcting sets found by exhaustive subset search."""
    if len(g.vertices) - len(g.outputs) > 8:
        raise ValueError("brute-force enumeration is limited to 8 non-outputs")
    return _peel(g, _correctable_brute)


def reduced_open_graph(g: OpenGraph, ssf: GFlow, fl: Flow) -> tuple[OpenGraph, frozenset[int]]:
    """Drop the outputs fed by the last measured layer and promote that layer to outputs."""
    if set(ssf.g) != set(fl.f) or set(fl.f) != set(g.non_outputs):
        raise FlowError("flow and signal shifted flow do not match the graph")
    v1 = {v for v, lv in ssf.layers.items() if lv == 1}
    removed = frozenset(v for v in g.outputs if any(fl.f.get(u) == v for u in v1))
    verts = g.vertices - removed
    edges = [e for e in g.edges if e[0] not in removed and e[1] not in removed]
    outs = [v for v in g.outputs if v not in removed] + sorted(v1)
    return OpenGraph.build(verts, edges, g.inputs, outs), removed


def influencing_path(
    fl: Flow, ssf: GFlow, g: OpenGraph, i: int, j: int, table: ZPathParityTable | None = None
) -> InfluencingPath:
    """Stepwise influencing path from ``i`` to ``j``, built backwards from ``j``."""
    if j not in ssf.g.get(i, ()):
        raise FlowError(f"{j} is not in the correcting set of {i}")
    if table is None:
        table = zpath_parities(fl, g)
    finv = fl.inverse()
    x = finv[j]
    chain = [x]
    while x != i:
        preds = sorted(k for k, ts in table.successors.items() if x in ts and table.parity(i, k))
        if not preds:
            raise FlowError(f"no odd predecessor of {x} from {i}")
        x = preds[0]
        chain.append(x)
    chain.reverse()
    verts: list[int] = []
    for x in chain:
        verts += [x, fl.f[x]]
    return InfluencingPath(tuple(verts))
