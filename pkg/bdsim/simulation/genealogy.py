"""Append-only genealogy of a particle system."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Tuple

import networkx as nx

NO_LABEL = -1


@dataclass(frozen=True, slots=True)
class GenealogyEntry:
    event_time: float
    parent_label: int
    child_label: int
    killed_label: int


@dataclass(slots=True)
class GenealogyLog:
    """Birth/death record keyed by stable particle labels.

    A duplication stores (time, parent, child, killed). Pure removals (L-BBM
    culls) store parent = child = NO_LABEL. Founders are the labels alive at
    time 0.
    """

    founders: Tuple[int, ...] = ()
    entries: List[GenealogyEntry] = field(default_factory=list)
    _parent: Dict[int, Tuple[int, float]] = field(default_factory=dict)
    _death: Dict[int, float] = field(default_factory=dict)

    @classmethod
    def start(cls, labels: Iterable[int]) -> "GenealogyLog":
        return cls(founders=tuple(int(label) for label in labels))

    def record(self, event_time: float, parent_label: int, child_label: int, killed_label: int = NO_LABEL) -> None:
        self.entries.append(GenealogyEntry(float(event_time), int(parent_label), int(child_label), int(killed_label)))
        if child_label != NO_LABEL:
            self._parent[int(child_label)] = (int(parent_label), float(event_time))
        if killed_label != NO_LABEL:
            self._death[int(killed_label)] = float(event_time)

    def parent_of(self, label: int) -> int | None:
        entry = self._parent.get(int(label))
        return entry[0] if entry else None

    def birth_time(self, label: int) -> float:
        entry = self._parent.get(int(label))
        if entry is not None:
            return entry[1]
        if int(label) in self.founders:
            return 0.0
        raise KeyError(f"unknown particle label {label}")

    def is_alive(self, label: int, time: float) -> bool:
        death = self._death.get(int(label))
        return self.birth_time(label) <= time and (death is None or death > time)

    def ancestor_chain(self, label: int) -> List[Tuple[int, float]]:
        """(label, birth_time) pairs from ``label`` back to its founder."""
        chain = [(int(label), self.birth_time(label))]
        current = int(label)
        while current in self._parent:
            current = self._parent[current][0]
            chain.append((current, self.birth_time(current)))
        return chain

    def ancestor_at(self, label: int, time: float) -> int:
        """The unique ancestor of ``label`` that was alive at ``time``."""
        for candidate, born in self.ancestor_chain(label):
            if born <= time:
                return candidate
        raise ValueError(f"time {time} precedes the founder of label {label}")

    def founder(self, label: int) -> int:
        return self.ancestor_chain(label)[-1][0]

    def to_graph(self) -> nx.DiGraph:
        """Directed parent -> child graph with birth/death times as node attributes."""
        graph = nx.DiGraph()
        for label in self.founders:
            graph.add_node(label, birth=0.0, death=self._death.get(label))
        for child, (parent, born) in self._parent.items():
            graph.add_node(child, birth=born, death=self._death.get(child))
            graph.add_edge(parent, child, time=born)
        return graph


__all__ = ["GenealogyEntry", "GenealogyLog", "NO_LABEL"]
