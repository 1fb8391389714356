"""Thresholded biomarker correlation graphs: construction, pruning,
components, degree comparison, diffing, and deterministic export.

The default (signed) threshold keeps an edge only when its correlation
weight is at least alpha, dropping negative correlations outright; the
absolute mode thresholds |w| instead.
"""

import json
from collections import Counter
from dataclasses import dataclass
from xml.sax.saxutils import quoteattr

from .errors import DataError

GROUP_TAGS = ("combined", "case", "control")
MODES = ("signed", "absolute")


@dataclass(frozen=True)
class BiomarkerGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[int, int, float], ...]  # (i, j, weight) with i < j
    alpha: float
    mode: str = "signed"
    group_tag: str = "combined"

    def __post_init__(self):
        if self.mode not in MODES:
            raise DataError(f"unknown mode {self.mode!r}")
        if self.group_tag not in GROUP_TAGS:
            raise DataError(f"unknown group tag {self.group_tag!r}")
        seen = set()
        for i, j, _ in self.edges:
            if i == j:
                raise DataError("self-loops are not allowed")
            if not (0 <= i < j < len(self.nodes)):
                raise DataError("edge endpoints must satisfy 0 <= i < j < |nodes|")
            if (i, j) in seen:
                raise DataError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))

    def degrees(self) -> dict[str, int]:
        out = {name: 0 for name in self.nodes}
        for i, j, _ in self.edges:
            out[self.nodes[i]] += 1
            out[self.nodes[j]] += 1
        return out


@dataclass(frozen=True)
class ComponentSet:
    components: tuple[tuple[int, ...], ...]
    sizes: tuple[int, ...]


@dataclass(frozen=True)
class DegreeRow:
    name: str
    degree_case: int
    degree_control: int
    present_only_in_case: bool


@dataclass(frozen=True)
class GraphDiff:
    edges_gained: tuple  # (name_a, name_b, weight) present only in the second graph
    edges_lost: tuple  # present only in the first graph
    weight_deltas: tuple  # ((name_a, name_b), delta) on shared edges
    nodes_gained: tuple
    nodes_lost: tuple


def build_graph(corr, alpha: float, mode: str = "signed", group_tag: str = "combined") -> BiomarkerGraph:
    """Keep the edges whose correlation survives the threshold test."""
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must be in (0, 1), got {alpha}")
    if mode not in MODES:
        raise DataError(f"unknown mode {mode!r}")
    names = tuple(corr.names)
    p = len(names)
    edges = []
    for i in range(p):
        for j in range(i + 1, p):
            w = float(corr.r[i, j])
            keep = abs(w) >= alpha if mode == "absolute" else w >= alpha
            if keep:
                edges.append((i, j, w))
    return BiomarkerGraph(nodes=names, edges=tuple(edges), alpha=alpha, mode=mode, group_tag=group_tag)


def prune_isolated(g: BiomarkerGraph) -> BiomarkerGraph:
    """Drop degree-zero nodes; edges are unchanged."""
    degrees = g.degrees()
    keep = [i for i, name in enumerate(g.nodes) if degrees[name] > 0]
    remap = {old: new for new, old in enumerate(keep)}
    return BiomarkerGraph(
        nodes=tuple(g.nodes[i] for i in keep),
        edges=tuple((remap[i], remap[j], w) for i, j, w in g.edges),
        alpha=g.alpha,
        mode=g.mode,
        group_tag=g.group_tag,
    )


def connected_components(g: BiomarkerGraph) -> ComponentSet:
    """Undirected components of the non-isolated nodes, largest first
    (ties: smallest member index)."""
    adjacency: dict[int, list[int]] = {}
    for i, j, _ in g.edges:
        adjacency.setdefault(i, []).append(j)
        adjacency.setdefault(j, []).append(i)
    seen: set[int] = set()
    components = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        stack = [start]
        comp = set()
        while stack:
            node = stack.pop()
            if node in comp:
                continue
            comp.add(node)
            stack.extend(nb for nb in adjacency[node] if nb not in comp)
        seen |= comp
        components.append(tuple(sorted(comp)))
    components.sort(key=lambda c: (-len(c), c[0]))
    return ComponentSet(components=tuple(components), sizes=tuple(len(c) for c in components))


def degree_table(case: BiomarkerGraph, control: BiomarkerGraph) -> list[DegreeRow]:
    """Per-biomarker degrees across the two group graphs.

    A biomarker absent from one graph gets degree zero there; the flag marks
    nodes connected in the case graph only.
    """
    if case.alpha != control.alpha or case.mode != control.mode:
        raise DataError("degree_table: graphs must share alpha and mode")
    deg_case = case.degrees()
    deg_control = control.degrees()
    rows = []
    for name in sorted(set(deg_case) | set(deg_control)):
        dc = deg_case.get(name, 0)
        dn = deg_control.get(name, 0)
        rows.append(
            DegreeRow(
                name=name,
                degree_case=dc,
                degree_control=dn,
                present_only_in_case=dc > 0 and dn == 0,
            )
        )
    return rows


def degree_distribution(g: BiomarkerGraph) -> dict[int, int]:
    """Histogram degree -> node count; counts sum to the node count."""
    return dict(sorted(Counter(g.degrees().values()).items()))


def _edge_key_map(g: BiomarkerGraph) -> dict[tuple[str, str], float]:
    out = {}
    for i, j, w in g.edges:
        a, b = sorted((g.nodes[i], g.nodes[j]))
        out[(a, b)] = w
    return out


def diff_graphs(a: BiomarkerGraph, b: BiomarkerGraph) -> GraphDiff:
    """Structural changes observed moving from graph `a` to graph `b`:
    edges/nodes only in `b` are gained, only in `a` are lost."""
    if a.alpha != b.alpha or a.mode != b.mode:
        raise DataError("diff_graphs: graphs must share alpha and mode")
    ea = _edge_key_map(a)
    eb = _edge_key_map(b)
    gained = tuple((k[0], k[1], eb[k]) for k in sorted(set(eb) - set(ea)))
    lost = tuple((k[0], k[1], ea[k]) for k in sorted(set(ea) - set(eb)))
    deltas = tuple((k, eb[k] - ea[k]) for k in sorted(set(ea) & set(eb)))
    return GraphDiff(
        edges_gained=gained,
        edges_lost=lost,
        weight_deltas=deltas,
        nodes_gained=tuple(sorted(set(b.nodes) - set(a.nodes))),
        nodes_lost=tuple(sorted(set(a.nodes) - set(b.nodes))),
    )


def _canonical_order(g: BiomarkerGraph):
    """Nodes lexicographic; edges as index pairs in that order."""
    names = sorted(g.nodes)
    index = {name: i for i, name in enumerate(names)}
    edges = []
    for i, j, w in g.edges:
        a, b = sorted((index[g.nodes[i]], index[g.nodes[j]]))
        edges.append((a, b, w))
    edges.sort(key=lambda e: (e[0], e[1]))
    return names, edges


def export_graph(g: BiomarkerGraph, fmt: str, path) -> None:
    """Write the graph as graphml, dot, or json with deterministic ordering
    and 4-decimal edge weights."""
    names, edges = _canonical_order(g)
    if fmt == "json":
        doc = {
            "nodes": names,
            "edges": [{"a": names[i], "b": names[j], "w": round(w, 4)} for i, j, w in edges],
            "alpha": g.alpha,
            "mode": g.mode,
            "group": g.group_tag,
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    elif fmt == "dot":
        lines = [f"graph {g.group_tag} {{"]
        for name in names:
            lines.append(f'  "{name}";')
        for i, j, w in edges:
            lines.append(f'  "{names[i]}" -- "{names[j]}" [label="{w:.4f}", weight={w:.4f}];')
        lines.append("}")
        text = "\n".join(lines) + "\n"
    elif fmt == "graphml":
        lines = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            '<graphml xmlns="http://graphml.graphdrawing.org/xmlns"',
            '         xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"',
            '         xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns'
            ' http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">',
            '  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>',
            f'  <graph id={quoteattr(g.group_tag)} edgedefault="undirected">',
        ]
        for name in names:
            lines.append(f"    <node id={quoteattr(name)}/>")
        for i, j, w in edges:
            lines.append(
                f"    <edge source={quoteattr(names[i])} target={quoteattr(names[j])}>"
                f'<data key="weight">{w:.4f}</data></edge>'
            )
        lines.append("  </graph>")
        lines.append("</graphml>")
        text = "\n".join(lines) + "\n"
    else:
        raise DataError(f"unknown export format {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_graph_json(path) -> BiomarkerGraph:
    """Read a graph written by export_graph(..., "json", ...)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    names = tuple(doc["nodes"])
    index = {name: i for i, name in enumerate(names)}
    edges = []
    for e in doc["edges"]:
        i, j = sorted((index[e["a"]], index[e["b"]]))
        edges.append((i, j, float(e["w"])))
    return BiomarkerGraph(
        nodes=names,
        edges=tuple(sorted(edges, key=lambda e: (e[0], e[1]))),
        alpha=float(doc["alpha"]),
        mode=doc["mode"],
        group_tag=doc["group"],
    )
