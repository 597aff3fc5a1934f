"""Fiber network graphs, topology documents and k-shortest-path routing."""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Union

BUNDLED = ("nsfnet", "usbackbone", "sixnode")


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    id: str
    a: str
    b: str
    length_km: float

    def other(self, node: str) -> str:
        return self.b if node == self.a else self.a


@dataclass(frozen=True)
class RoutePath:
    """A simple path given by its node sequence and the links joining them."""

    nodes: tuple[str, ...]
    links: tuple[str, ...]
    length_km: float

    @property
    def hops(self) -> int:
        return len(self.links)

    def label(self) -> str:
        return "".join(self.nodes) if all(len(n) == 1 for n in self.nodes) else "-".join(self.nodes)

    def reversed(self) -> "RoutePath":
        return RoutePath(self.nodes[::-1], self.links[::-1], self.length_km)


@dataclass(frozen=True)
class NetworkTopology:
    nodes: tuple[str, ...]
    links: tuple[Link, ...]
    name: str = ""
    _by_id: dict = field(init=False, repr=False, compare=False)
    _by_pair: dict = field(init=False, repr=False, compare=False)
    _incident: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise TopologyError("duplicate node id")
        by_id, by_pair = {}, {}
        incident = {n: [] for n in self.nodes}
        for link in self.links:
            if link.id in by_id:
                raise TopologyError(f"duplicate link id {link.id!r}")
            for end in (link.a, link.b):
                if end not in node_set:
                    raise TopologyError(f"link {link.id!r} has dangling endpoint {end!r}")
            if link.a == link.b:
                raise TopologyError(f"link {link.id!r} is a self-loop")
            if not link.length_km > 0:
                raise TopologyError(f"link {link.id!r} has non-positive length {link.length_km}")
            pair = frozenset((link.a, link.b))
            if pair in by_pair:
                raise TopologyError(f"parallel links between {link.a!r} and {link.b!r}")
            by_id[link.id] = link
            by_pair[pair] = link
            incident[link.a].append(link)
            incident[link.b].append(link)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_by_pair", by_pair)
        object.__setattr__(self, "_incident", incident)
        if self.nodes and not self._connected():
            raise TopologyError("topology is not connected")

    def _connected(self) -> bool:
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            u = stack.pop()
            for link in self._incident[u]:
                v = link.other(u)
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == len(self.nodes)

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(link.id for link in self.links)

    def link(self, link_id: str) -> Link:
        return self._by_id[link_id]

    def link_between(self, u: str, v: str) -> Link:
        return self._by_pair[frozenset((u, v))]

    def incident(self, node: str) -> list[Link]:
        return self._incident[node]

    def neighbors(self, node: str) -> list[tuple[str, float]]:
        return [(link.other(node), link.length_km) for link in self._incident[node]]

    def path_from_nodes(self, nodes: Iterable[str]) -> RoutePath:
        nodes = tuple(nodes)
        if len(set(nodes)) != len(nodes):
            raise TopologyError(f"path {nodes} repeats a node")
        try:
            links = tuple(self.link_between(u, v) for u, v in zip(nodes, nodes[1:]))
        except KeyError as exc:
            raise TopologyError(f"no link for consecutive nodes in {nodes}") from exc
        return RoutePath(nodes, tuple(link.id for link in links), math.fsum(link.length_km for link in links))


TopologySource = Union[str, Path, dict]


def load_topology(source: TopologySource) -> NetworkTopology:
    """Load a topology from a bundled name, a JSON file path, or a parsed document.

    The document holds ``nodes: [str]`` and ``links: [{id, a, b, length_km}]``.
    """
    name = ""
    if isinstance(source, dict):
        doc = source
    else:
        text_source = str(source)
        if text_source in BUNDLED:
            name = text_source
            text = resources.files("eonvideo.data").joinpath(f"{name}.json").read_text()
        else:
            path = Path(text_source)
            name = path.stem
            text = path.read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TopologyError(f"cannot parse topology document: {exc}") from exc
    try:
        nodes = tuple(str(n) for n in doc["nodes"])
        links = tuple(
            Link(str(d["id"]), str(d["a"]), str(d["b"]), float(d["length_km"])) for d in doc["links"]
        )
    except (KeyError, TypeError) as exc:
        raise TopologyError(f"malformed topology document: {exc!r}") from exc
    return NetworkTopology(nodes, links, name=name)


def _dijkstra(topo, src, dst, banned_nodes, banned_links):
    # (distance, node sequence) keys give lexicographic tie-breaking among equal lengths
    best = {}
    heap = [(0.0, (src,))]
    while heap:
        dist, seq = heapq.heappop(heap)
        u = seq[-1]
        if u in best:
            continue
        best[u] = seq
        if u == dst:
            return seq
        for link in topo.incident(u):
            if link.id in banned_links:
                continue
            v = link.other(u)
            if v in best or v in banned_nodes or v in seq:
                continue
            heapq.heappush(heap, (dist + link.length_km, seq + (v,)))
    return None


def k_shortest_paths(topo: NetworkTopology, src: str, dst: str, k: int) -> list[RoutePath]:
    """Yen's k shortest loopless paths, ordered by (length, node sequence)."""
    if src == dst:
        raise TopologyError("source and destination must differ")
    for node in (src, dst):
        if node not in topo._incident:
            raise TopologyError(f"unknown node {node!r}")
    if k < 1:
        raise ValueError("k must be >= 1")

    first = _dijkstra(topo, src, dst, frozenset(), frozenset())
    if first is None:
        return []
    accepted = [topo.path_from_nodes(first)]
    seen = {first}
    candidates: list[tuple[float, tuple[str, ...]]] = []
    while len(accepted) < k:
        last = accepted[-1].nodes
        for i in range(len(last) - 1):
            root = last[: i + 1]
            banned_links = {
                topo.link_between(p.nodes[i], p.nodes[i + 1]).id
                for p in accepted
                if p.nodes[: i + 1] == root
            }
            spur = _dijkstra(topo, last[i], dst, frozenset(root[:-1]), frozenset(banned_links))
            if spur is None:
                continue
            total = root[:-1] + spur
            if total not in seen:
                seen.add(total)
                heapq.heappush(candidates, (topo.path_from_nodes(total).length_km, total))
        if not candidates:
            break
        _, nodes = heapq.heappop(candidates)
        accepted.append(topo.path_from_nodes(nodes))
    return accepted


def neighbor_links(topo: NetworkTopology, path: RoutePath) -> list[tuple[str, str]]:
    """(path link, neighbor link) pairs: off-path links touching either end of a path link.

    A neighbor adjacent to two path links is paired with each of them.
    """
    on_path = set(path.links)
    pairs = []
    for link_id in path.links:
        link = topo.link(link_id)
        emitted = set()
        for end in (link.a, link.b):
            for other in topo.incident(end):
                if other.id in on_path or other.id in emitted:
                    continue
                emitted.add(other.id)
                pairs.append((link_id, other.id))
    return pairs
