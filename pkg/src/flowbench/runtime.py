"""Tick-based deterministic executor for a validated FlowGraph.

The runtime owns all state: stream logs and per-node read cursors. Nodes
stay literally stateless because every invocation receives the full
history of each wired input stream plus the delta range that is new since
the node last ran. One `step()` executes every node exactly once in a
frozen topological order, so records produced upstream are visible
downstream within the same tick.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import (
    Category,
    FlowGraph,
    GraphValidationError,
    Record,
    SchemaMismatchError,
    UnknownElementError,
    topological_order,
    validate,
)


class StreamWriteError(Exception):
    """Write attempted on a stream the caller does not own."""


class TransformError(Exception):
    """A node transform produced output that violates its port contract."""


@dataclass(frozen=True)
class RunConfig:
    """Length and seed of a run. Seeds are full 64-bit values."""

    ticks: int
    seed: int

    def __post_init__(self):
        if self.ticks < 1:
            raise ValueError("ticks must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class PortView:
    """What a transform sees on one in-port: full history plus a delta marker."""

    __slots__ = ("records", "new_from")

    def __init__(self, records: tuple[Record, ...], new_from: int):
        self.records = records
        self.new_from = new_from

    @property
    def history(self) -> tuple[Record, ...]:
        return self.records

    @property
    def new(self) -> tuple[Record, ...]:
        return self.records[self.new_from:]


@dataclass(frozen=True)
class TickSummary:
    tick: int
    produced: dict[str, int]


class RuntimeInstance:
    """One run of one graph. Confined to a single thread of control."""

    def __init__(self, graph: FlowGraph):
        violations = validate(graph)
        if violations:
            raise GraphValidationError(violations)
        self.graph = graph
        self._order = topological_order(graph)
        self._streams = graph.stream_map()
        self._nodes = graph.node_map()
        self._logs: dict[str, list[Record]] = {s.id: [] for s in graph.streams}
        self._in_wiring = {
            (e.node, e.port): e.stream for e in graph.in_edges
        }
        self._out_wiring = {
            (e.node, e.port): e.stream for e in graph.out_edges
        }
        self._cursors: dict[tuple[str, str], int] = {
            key: 0 for key in self._in_wiring
        }
        self._producer_count = {
            s.id: len(graph.producers_of(s.id)) for s in graph.streams
        }
        self.tick = 0
        self.invocations: dict[str, int] = {n.id: 0 for n in graph.nodes}

    # ------------------------------------------------------------------
    # Writes
    # ------------------------------------------------------------------

    def inject(self, stream_id: str, values) -> Record:
        """Append outside-world data to an input stream at the current tick."""
        decl = self._decl(stream_id)
        if decl.category is not Category.INPUT:
            raise StreamWriteError(f"{stream_id!r} is not an input stream")
        return self._append(decl, values)

    def append_collected(self, stream_id: str, values) -> Record:
        """Runtime-owned write path for producer-less output streams.

        Used by the dataset-collection tooling to materialize derived rows
        into a declared output stream. Refused for anything a node writes.
        """
        decl = self._decl(stream_id)
        if decl.category is not Category.OUTPUT:
            raise StreamWriteError(f"{stream_id!r} is not an output stream")
        if self._producer_count[stream_id]:
            raise StreamWriteError(f"{stream_id!r} is produced by a node")
        return self._append(decl, values)

    def _append(self, decl, values) -> Record:
        row = decl.schema.coerce_row(values)
        log = self._logs[decl.id]
        rec = Record(decl.schema, row, self.tick, len(log))
        log.append(rec)
        return rec

    # ------------------------------------------------------------------
    # Execution
    # ------------------------------------------------------------------

    def step(self) -> TickSummary:
        """Run every node once in topological order, then advance the tick."""
        produced: dict[str, int] = {}
        for nid in self._order:
            node = self._nodes[nid]
            inputs = {}
            for port in node.in_ports:
                sid = self._in_wiring[(nid, port.name)]
                log = self._logs[sid]
                inputs[port.name] = PortView(tuple(log), self._cursors[(nid, port.name)])
            result = node.transform(inputs) or {}
            unknown = set(result) - {p.name for p in node.out_ports}
            if unknown:
                raise TransformError(
                    f"node {nid!r} emitted to undeclared ports {sorted(unknown)}"
                )
            for port in node.out_ports:
                rows = result.get(port.name, ())
                sid = self._out_wiring[(nid, port.name)]
                decl = self._streams[sid]
                for row in rows:
                    try:
                        self._append(decl, row)
                    except SchemaMismatchError as exc:
                        raise TransformError(
                            f"node {nid!r} port {port.name!r}: {exc}"
                        ) from exc
                    produced[sid] = produced.get(sid, 0) + 1
            for port in node.in_ports:
                sid = self._in_wiring[(nid, port.name)]
                self._cursors[(nid, port.name)] = len(self._logs[sid])
            self.invocations[nid] += 1
        summary = TickSummary(self.tick, produced)
        self.tick += 1
        return summary

    # ------------------------------------------------------------------
    # Reads
    # ------------------------------------------------------------------

    def read(self, stream_id: str, from_seq: int = 0) -> list[Record]:
        if from_seq < 0:
            raise ValueError("from_seq must be >= 0")
        decl = self._decl(stream_id)
        return list(self._logs[decl.id][from_seq:])

    def length(self, stream_id: str) -> int:
        return len(self._logs[self._decl(stream_id).id])

    def stream_ids(self) -> list[str]:
        return sorted(self._logs)

    def _decl(self, stream_id: str):
        try:
            return self._streams[stream_id]
        except KeyError:
            raise UnknownElementError(stream_id) from None


def start(graph: FlowGraph) -> RuntimeInstance:
    """Validate the graph and return a fresh instance with empty logs."""
    return RuntimeInstance(graph)
