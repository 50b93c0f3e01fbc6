"""Tree-shaped data movement: convergecast up, broadcast down.

Both operations assume a valid rooted spanning tree described by per-agent
parent ports, with every agent standing at home.  Movement runs in
two-round waves (even round: depart, odd round: communicate and return),
the same rhythm the tree-building protocols use.

Convergecast: an agent whose children have all reported carries its
combined value to its parent's node; the root holds the full combination
after at most 2 * height rounds.

Broadcast: every uninformed agent oscillates to its parent each wave and
copies the value once the parent has it; agents at depth t are informed
after 2t rounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

from ..runtime import (
    NEVER,
    AgentProgram,
    AgentState,
    RunContext,
    RunReport,
    RunResult,
    SimConfig,
    StepView,
    run,
)

__all__ = [
    "TreeEdgeSet",
    "tree_from_states",
    "ConvergecastProgram",
    "convergecast",
    "BroadcastProgram",
    "broadcast_down",
]


@dataclass(frozen=True)
class TreeEdgeSet:
    """A rooted spanning tree, agent-eye view.

    ``parent_port[a]`` is the port at agent ``a``'s home node leading to
    its parent's node; None exactly for the root.  ``home_node`` maps agent
    ids to node indices so centralized checks can translate to graph terms.
    """

    root_id: int
    home_node: dict[int, int]
    parent_port: dict[int, int | None]

    def node_parent_ports(self) -> dict[int, int | None]:
        """Node-indexed parent ports, the shape the tree checker wants."""
        return {self.home_node[a]: p for a, p in self.parent_port.items()}

    def children_map(self, graph) -> dict[int, list[int]]:
        """agent id -> ids of its tree children (derived from parent ports)."""
        node_owner = {node: a for a, node in self.home_node.items()}
        kids: dict[int, list[int]] = {a: [] for a in self.parent_port}
        for a, p in self.parent_port.items():
            if p is None:
                continue
            parent_node, _ = graph.neighbor_via(self.home_node[a], p)
            kids[node_owner[parent_node]].append(a)
        return kids

    def depth_map(self, graph) -> dict[int, int]:
        """agent id -> tree depth (root at 0)."""
        kids = self.children_map(graph)
        depth = {self.root_id: 0}
        frontier = [self.root_id]
        while frontier:
            nxt = []
            for a in frontier:
                for c in kids[a]:
                    depth[c] = depth[a] + 1
                    nxt.append(c)
            frontier = nxt
        return depth


def tree_from_states(states: list[AgentState]) -> TreeEdgeSet:
    """Extract the tree the protocol left in the agents' parent pointers."""
    roots = [s.id for s in states if s.parent is None]
    if len(roots) != 1:
        raise ValueError(f"expected one root, found {sorted(roots)}")
    return TreeEdgeSet(
        root_id=roots[0],
        home_node={s.id: s.home_node for s in states},
        parent_port={s.id: s.parent for s in states},
    )


class ConvergecastProgram(AgentProgram):
    """Combine per-agent values up a tree into its root.

    ``combine(acc, incoming)`` must be associative enough for the order
    children happen to report in; sums and maxima are.
    """

    name = "convergecast"

    def __init__(
        self,
        tree: TreeEdgeSet,
        kids_count: dict[int, int],
        values: dict[int, Any],
        combine: Callable[[Any, Any], Any],
        value_width: int,
    ):
        self.tree = tree
        self.kids_count = kids_count
        self.values = values
        self.combine = combine
        self.scratch_widths = {
            "acc": value_width,
            "kids_left": "deg",
            "reported": "bool",
        }

    def on_start(self, states: list[AgentState], ctx: RunContext) -> None:
        for s in states:
            s.phase_state["acc"] = self.values[s.id]
            s.phase_state["kids_left"] = self.kids_count[s.id]
            s.phase_state["reported"] = False
            # Leaves start reporting immediately; everyone else is woken by
            # arriving children.
            s.wake_round = 0 if s.phase_state["kids_left"] == 0 else NEVER
            s.dirty = True

    def step(self, state: AgentState, view: StepView) -> int | None:
        ps = state.phase_state
        if not view.at_home:
            # Delivering to the parent; it hosts unless it is mid-delivery
            # itself, which cannot happen while it still has children
            # pending - and it does: us.
            resident = next((s for s in view.colocated if s.at_home), None)
            if resident is not None:
                ps["reported"] = True
                state.dirty = True
            state.wake_round = view.round + 1
            return view.entered_port
        # Home: fold in any children delivering right now.
        for visitor in view.colocated:
            if visitor.at_home:
                continue
            ps["acc"] = self.combine(ps["acc"], visitor.scratch["acc"])
            ps["kids_left"] -= 1
            state.dirty = True
        parent = self.tree.parent_port[state.id]
        if ps["kids_left"] == 0 and not ps["reported"] and parent is not None:
            if view.round % 2 == 0:
                state.wake_round = view.round + 1
                return parent
            state.wake_round = view.round + 1  # depart next (even) round
        else:
            state.wake_round = NEVER
        return None

    def local_done(self, state: AgentState) -> bool:
        ps = state.phase_state
        if not ps:
            return False
        if self.tree.parent_port[state.id] is None:
            return ps["kids_left"] == 0
        return bool(ps["reported"]) and state.at_home


def convergecast(
    graph,
    config: SimConfig,
    tree: TreeEdgeSet,
    values: dict[int, Any],
    combine: Callable[[Any, Any], Any],
    value_width: int = 64,
    max_rounds: int | None = None,
    record_trace: bool = False,
) -> tuple[Any, RunResult]:
    """Run a convergecast; returns (root value, engine result)."""
    kids = {a: len(c) for a, c in tree.children_map(graph).items()}
    program = ConvergecastProgram(tree, kids, values, combine, value_width)
    result = run(graph, config, program, max_rounds=max_rounds, record_trace=record_trace)
    root_state = next(s for s in config.states if s.id == tree.root_id)
    root_value = root_state.phase_state.pop("acc")
    for s in config.states:
        s.phase_state.pop("acc", None)
        s.phase_state.pop("kids_left", None)
        s.phase_state.pop("reported", None)
    return root_value, result


class BroadcastProgram(AgentProgram):
    """Push one value from the root to every agent by parent-side pulls."""

    name = "broadcast-down"

    def __init__(self, tree: TreeEdgeSet, value: Any, value_width: int):
        self.tree = tree
        self.value = value
        self.scratch_widths = {"received": value_width}

    def on_start(self, states: list[AgentState], ctx: RunContext) -> None:
        for s in states:
            if s.id == self.tree.root_id:
                s.phase_state["received"] = self.value
                s.wake_round = NEVER
            else:
                s.wake_round = 0
            s.dirty = True

    def step(self, state: AgentState, view: StepView) -> int | None:
        ps = state.phase_state
        if not view.at_home:
            resident = next((s for s in view.colocated if s.at_home), None)
            if resident is not None and "received" in resident.scratch:
                ps["received"] = resident.scratch["received"]
                state.dirty = True
            state.wake_round = view.round + 1
            return view.entered_port
        if "received" in ps:
            state.wake_round = NEVER
            return None
        if view.round % 2 == 0:
            state.wake_round = view.round + 1
            return self.tree.parent_port[state.id]
        state.wake_round = view.round + 1
        return None

    def local_done(self, state: AgentState) -> bool:
        return "received" in state.phase_state and state.at_home


def broadcast_down(
    graph,
    config: SimConfig,
    tree: TreeEdgeSet,
    value: Any,
    value_width: int = 64,
    max_rounds: int | None = None,
    record_trace: bool = False,
) -> tuple[dict[int, Any], RunResult]:
    """Run a broadcast; returns ({agent id: received value}, engine result)."""
    program = BroadcastProgram(tree, value, value_width)
    result = run(graph, config, program, max_rounds=max_rounds, record_trace=record_trace)
    received = {s.id: s.phase_state.pop("received") for s in config.states}
    return received, result
