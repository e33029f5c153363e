"""Suggestors, nominations and candidate enumeration."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from ..kb.model import IdGenerator
from .gating import GatePolicy
from .situation import SituationModel, id_sort_key

SINGLE = "single"
MULTI = "multi"


@dataclass(frozen=True)
class AssociationPolicy:
    mode: str = SINGLE
    new_instance_allowed: bool = True

    def __post_init__(self):
        if self.mode not in (SINGLE, MULTI):
            raise ValueError(f"association mode must be {SINGLE!r} or {MULTI!r}, got {self.mode!r}")


@dataclass(frozen=True)
class Nomination:
    """One change proposed by a suggestor.

    ``kind`` is ``"instance"`` (new entity instance with features),
    ``"association"`` (candidate set for ``label(ident)``) or
    ``"evidence"`` (likelihood weights on ``node``).
    """

    suggestor: str
    kind: str
    entity_type: str = ""
    instance_id: str = ""
    features: tuple[tuple[str, Any], ...] = ()
    label: str = ""
    ident: tuple[str, ...] = ()
    candidates: tuple[str, ...] = ()
    committed: bool = False
    node: str = ""
    weights: tuple[tuple[str, float], ...] = ()

    def describe(self) -> str:
        if self.kind == "instance":
            return f"{self.suggestor}: new {self.entity_type} {self.instance_id}"
        if self.kind == "association":
            how = "=" if self.committed else " in "
            return f"{self.suggestor}: {self.label}({','.join(self.ident)}){how}{{{','.join(self.candidates)}}}"
        return f"{self.suggestor}: evidence {self.node}"


@dataclass(frozen=True)
class Suggestor:
    """``trigger(batch, situation)`` decides whether ``action(batch,
    situation, rng)`` runs; the action returns nominations and must not
    mutate the situation it is given."""

    name: str
    trigger: Callable[[Sequence[Any], SituationModel], bool]
    action: Callable[[Sequence[Any], SituationModel, random.Random], list[Nomination]]


def apply_nomination(situation: SituationModel, nom: Nomination) -> None:
    if nom.kind == "instance":
        situation.add_instance(nom.entity_type, nom.instance_id, **dict(nom.features))
    elif nom.kind == "association":
        situation.set_association(nom.label, nom.ident, nom.candidates, nom.committed)
    elif nom.kind == "evidence":
        situation.observe_likelihood(nom.node, dict(nom.weights))
    else:
        raise ValueError(f"unknown nomination kind {nom.kind!r}")


@dataclass
class FiringResult:
    nominations: list[Nomination] = field(default_factory=list)
    fired: list[str] = field(default_factory=list)


def fire_suggestors(
    situation: SituationModel,
    batch: Sequence[Any],
    suggestors: Sequence[Suggestor],
    seed: int = 0,
) -> FiringResult:
    """Run suggestors in order on a staged copy so later ones see earlier
    nominations.  The input situation is left untouched."""
    staged = situation.copy()
    rng = random.Random(seed)
    out = FiringResult()
    for s in suggestors:
        if not s.trigger(batch, staged):
            continue
        noms = s.action(batch, staged, rng)
        if noms:
            out.fired.append(s.name)
        for n in noms:
            apply_nomination(staged, n)
            out.nominations.append(n)
    return out


def enumerate_association_candidates(
    situation: SituationModel,
    entity_type: str,
    nominee: str | None,
    position: tuple[float, float] | None,
    gate: GatePolicy,
    policy: AssociationPolicy,
    id_generator: IdGenerator | None = None,
) -> list[str]:
    """Ordered candidate values for one association.

    Single mode returns just the nominee.  Multi mode returns live
    ``entity_type`` instances whose ``pos`` feature is within the gate,
    nearest first with id tie-break and capped at ``max_candidates``, then
    the id a new instance would receive when allowed (taken from
    ``id_generator`` if given, else the situation's).
    """
    if policy.mode == SINGLE:
        return [nominee] if nominee is not None else []
    found = []
    if position is not None:
        for i in situation.instances_of(entity_type):
            pos = situation.features.get(i, {}).get("pos")
            if pos is None:
                continue
            d = math.hypot(pos[0] - position[0], pos[1] - position[1])
            if d <= gate.radius:
                found.append((d, id_sort_key(i), i))
    found.sort()
    out = [i for _, _, i in found[: gate.max_candidates]]
    if policy.new_instance_allowed:
        out.append((id_generator or situation.id_generator).peek(entity_type))
    return out
