"""Whole-KB well-formedness checks."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import MebnKb


@dataclass(frozen=True)
class Violation:
    condition: int  # 1: multiply resident, 2: never resident, 3: union cycle, 0: other
    message: str
    hypothesis_types: tuple[str, ...] = ()
    fragments: tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"[{self.condition}] {self.message}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def lines(self) -> list[str]:
        if self.ok:
            return ["OK: no violations"]
        return [str(v) for v in self.violations]


def graph_union(kb: MebnKb) -> dict[str, set[str]]:
    """Union of all fragment graphs with nodes merged by hypothesis type label.

    Returns an adjacency map ``label -> set of child labels`` covering every
    type that appears in some fragment.
    """
    adj: dict[str, set[str]] = {}
    for frag in kb.fragments.values():
        for n in frag.nodes:
            adj.setdefault(n.label, set())
        for p, c in frag.edges():
            adj[p].add(c)
    return adj


def find_cycle(adj: dict[str, set[str]]) -> list[str] | None:
    color: dict[str, int] = {}
    for start in sorted(adj):
        if start in color:
            continue
        stack = [(start, iter(sorted(adj[start])))]
        path = [start]
        color[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                path.pop()
            elif color.get(nxt) == 1:
                i = path.index(nxt)
                return path[i:] + [nxt]
            elif nxt not in color:
                color[nxt] = 1
                path.append(nxt)
                stack.append((nxt, iter(sorted(adj.get(nxt, ())))))
    return None


def validate_mebn(kb: MebnKb) -> ValidationReport:
    report = ValidationReport()
    resident_in: dict[str, list[str]] = {}
    appears_in: dict[str, list[str]] = {}
    for fid in sorted(kb.fragments):
        frag = kb.fragments[fid]
        for n in frag.nodes:
            appears_in.setdefault(n.label, []).append(fid)
            if not n.is_input:
                resident_in.setdefault(n.label, []).append(fid)
    for label in sorted(resident_in):
        fids = resident_in[label]
        if len(fids) > 1:
            report.violations.append(Violation(
                1, f"hypothesis type {label} is resident in more than one fragment: {', '.join(fids)}",
                (label,), tuple(fids)))
    for label in sorted(appears_in):
        if label not in resident_in:
            fids = appears_in[label]
            report.violations.append(Violation(
                2, f"hypothesis type {label} appears in {', '.join(fids)} but is resident in no fragment",
                (label,), tuple(fids)))
    adj = graph_union(kb)
    cycle = find_cycle(adj)
    if cycle:
        involved = sorted({fid for fid, f in kb.fragments.items()
                           if any((a, b) in set(f.edges()) for a, b in zip(cycle, cycle[1:]))})
        report.violations.append(Violation(
            3, f"graph union has a directed cycle {' -> '.join(cycle)} (fragments {', '.join(involved)})",
            tuple(cycle[:-1]), tuple(involved)))
    # association types sharing a label must agree on what they range over
    seen: dict[str, tuple] = {}
    for a in kb.association_types():
        sig = (a.entity_type, tuple(t for _, t in a.attributes))
        if a.label in seen and seen[a.label][0] != sig:
            report.violations.append(Violation(
                0, f"association {a.label} in {a.fragment_id} ranges over {sig}, "
                   f"but {seen[a.label][1]} declares {seen[a.label][0]}",
                (), (a.fragment_id, seen[a.label][1])))
        seen.setdefault(a.label, (sig, a.fragment_id))
    return report


def union_to_dot(kb: MebnKb) -> str:
    adj = graph_union(kb)
    lines = ["digraph mebn {"]
    for n in sorted(adj):
        lines.append(f'  "{n}";')
    for p in sorted(adj):
        for c in sorted(adj[p]):
            lines.append(f'  "{p}" -> "{c}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
