"""Seeded random request generation and the differential runner.

Random requests draw subjects, objects and actions uniformly from the store's
ontologies, purposes uniformly from the tree, presented attributes from the
certificates the registry knows about, and context values from the registry's
declared per-attribute ranges.  Everything is driven by one random.Random so a
seed reproduces the run byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .ontology import ConceptRef
from .oracle import oracle_decide
from .pdp import AccessRequest, Decision, PolicyStore, decide
from .registry import KnowledgeBase


def random_request(rng: random.Random, store: PolicyStore, kb: KnowledgeBase) -> AccessRequest:
    so = sorted(store.graphs["SO"].node_kinds)
    oo = sorted(store.graphs["OO"].node_kinds)
    ao = sorted(store.graphs["AO"].node_kinds)

    subject_concepts = frozenset(
        ConceptRef("SO", c) for c in rng.sample(so, k=rng.randint(0, min(2, len(so))))
    )
    object_concepts = frozenset(
        ConceptRef("OO", c) for c in rng.sample(oo, k=rng.randint(1, min(2, len(oo))))
    )
    action = ConceptRef("AO", rng.choice(ao))
    purpose = rng.choice(store.purposes.ids())

    pool = []
    for entry in list(kb.subjects.values()) + list(kb.objects.values()):
        pool.extend(entry.attributes)
    pool.sort(key=lambda a: (a.name, a.soa_id, a.attribute_id))
    presented = tuple(a for a in pool if rng.random() < 0.5)

    context = {}
    for spec in kb.context_specs:
        if rng.random() < 0.7:
            if spec.kind == "int":
                context[spec.attribute_id] = rng.randint(spec.low, spec.high)
            else:
                context[spec.attribute_id] = rng.choice(spec.values)

    return AccessRequest(
        subject_id=f"gen_{rng.randrange(10_000)}",
        subject_concepts=subject_concepts,
        presented_attributes=presented,
        object_id=f"gen_obj_{rng.randrange(10_000)}",
        object_concepts=object_concepts,
        action=action,
        purpose=purpose,
        context=context,
    )


def decision_fingerprint(d: Decision) -> tuple:
    """The observable core compared between engine and oracle."""
    return (d.value.value, d.matched_rule, d.granted_right, d.masked)


@dataclass
class Mismatch:
    label: str
    request: AccessRequest
    engine: Decision
    oracle: Decision


@dataclass
class DifferentialReport:
    seed: int
    canned: int
    randomized: int
    mismatches: list

    @property
    def total(self) -> int:
        return self.canned + self.randomized


def run_differential(
    store: PolicyStore,
    kb: KnowledgeBase,
    canned: list[tuple[str, AccessRequest]],
    random_count: int,
    seed: int,
) -> DifferentialReport:
    """Engine vs oracle over canned requests plus ``random_count`` drawn ones."""
    rng = random.Random(seed)
    mismatches: list[Mismatch] = []

    def check(label: str, request: AccessRequest) -> None:
        engine = decide(store, request)
        reference = oracle_decide(store, request)
        if decision_fingerprint(engine) != decision_fingerprint(reference):
            mismatches.append(Mismatch(label, request, engine, reference))

    for label, request in canned:
        check(label, request)
    for i in range(random_count):
        check(f"random[{i}]", random_request(rng, store, kb))
    return DifferentialReport(
        seed=seed, canned=len(canned), randomized=random_count, mismatches=mismatches
    )
