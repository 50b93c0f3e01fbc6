"""Leader election with spanning tree, 2-coloring, and aggregate delivery.

Nobody is told who the leader is here.  Every agent starts out as the root
of its own one-node tree, labeled with its own id, and repeatedly visits
neighbors inside globally aligned meeting windows.  Whenever two trees
touch, the larger-labeled side is absorbed edge by edge into the smaller;
the agent with the smallest id ends up the root of a spanning tree and
every agent ends up carrying that id as its tree label.  Subtree reports
(degree sum, per-side counts, maximum degree) are folded toward the root
along the way, then pushed back down so every agent knows them.

Window discipline
-----------------
Rounds are grouped into windows of ``4 * id_width`` rounds.  At a window
start each agent commits to at most one errand: visit the next unexplored
port, or carry a completion report to its parent.  Within the window it
follows its meeting-id bit schedule -- slot ``i`` means "leave in window
round ``2i``, talk abroad in round ``2i + 1``, come straight back".  Two
complementary bit patterns can't be away on exactly the same slots, so an
errand always finds its target at home at some slot of the window.

Because departures happen only on even window rounds and returns on odd
ones, an agent found at its own node during an odd round is guaranteed to
be "the resident" -- there is never any ambiguity about who can adopt whom.

Merge rules (everyone at a node applies them to the same snapshots):

* The pivot is the visitor with the least ``(label, id)``.  A resident
  with a larger label adopts the pivot as parent and restarts its port
  sweep; its old children eventually notice and re-attach the same way.
* A visitor finding a smaller-labeled resident (while no co-visitor is
  absorbing that resident) attaches itself as a new child.  Simultaneous
  adopters chain their sibling pointers in ascending id order.
* Equal labels mean same tree: explorers just advance, reporters deliver.
* A report aimed at a resident that is itself being absorbed this very
  round is void; the reporter retries and ends up re-attaching instead.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..runtime import (
    NEVER,
    AgentProgram,
    AgentState,
    RoundLimitExceeded,
    RunContext,
    RunReport,
    SimConfig,
    Snapshot,
    StepView,
    TraceEvent,
    id_bits,
    offset_trace,
    run,
)
from .known_leader import AggregatePayload, advance_port, first_port
from .meeting import MeetingId, make_meeting_id, window_length
from .treecast import TreeEdgeSet, broadcast_down, tree_from_states


class ElectionProgram(AgentProgram):
    """Self-stabilizing tree growth by label comparison.

    An agent is finished when it has swept every port, heard completion
    reports from all registered children, and either delivered its own
    report (non-roots) or, for the sole surviving root, raised the
    completion flag that marks it the leader.
    """

    name = "election"

    def __init__(self) -> None:
        self.scratch_widths: dict[str, int | str] = {}
        self._mids: dict[int, MeetingId] = {}
        self._wlen = 0
        self._retry_cap = 0

    def on_start(self, states: list[AgentState], ctx: RunContext) -> None:
        self._wlen = window_length(ctx.lam)
        # A target can only be away on slots where our own schedule shows a
        # zero bit, and complementary halves forbid that for a full window;
        # the cap is pure insurance against a wedged configuration.
        self._retry_cap = ctx.lam + 2
        dw = max(ctx.max_degree.bit_length(), 1)
        self.scratch_widths = {
            "mydeg": "deg",
            "trip_port": "port",
            "trip_rep": "bool",
            "trip_done": "bool",
            "retry": "id",
            "kids": "deg",
            "kids_done": "deg",
            "reported": "bool",
            "agg_deg": ctx.id_width + dw,
            "agg_c0": "id",
            "agg_c1": "id",
            "agg_max": "deg",
        }
        for state, deg in zip(states, ctx.degrees):
            self._mids[state.id] = make_meeting_id(state.id, ctx.lam)
            state.parent = None
            state.child = None
            state.sibling = None
            state.treelabel = state.id
            state.partition = 0
            state.leader = False
            state.completion = False
            state.nextport = 0 if deg > 0 else -1
            state.phase_state = {
                "mydeg": deg,
                "retry": 0,
                "kids": 0,
                "kids_done": 0,
                "reported": False,
                "agg_deg": deg,
                "agg_c0": 1,
                "agg_c1": 0,
                "agg_max": deg,
            }
            state.wake_round = 0

    # -- window bookkeeping -------------------------------------------------

    def _window_start(self, state: AgentState) -> None:
        ps = state.phase_state
        if "trip_port" in ps and not ps["trip_done"]:
            # Defensive only: aligned windows mean residents are always home
            # on odd rounds, so an errand resolves within its first window.
            # Distinct ids bound the population by lam + 1 < cap.
            ps["retry"] += 1
            if ps["retry"] > self._retry_cap:
                raise RoundLimitExceeded(
                    f"agent {state.id}: errand to port {ps['trip_port']} "
                    f"unresolved for {ps['retry']} windows"
                )
            state.dirty = True
            return
        ps.pop("trip_port", None)
        ps.pop("trip_rep", None)
        ps.pop("trip_done", None)
        if state.nextport != -1:
            ps.update(trip_port=state.nextport, trip_rep=False, trip_done=False, retry=0)
        elif (
            state.parent is not None
            and not ps["reported"]
            and ps["kids_done"] >= ps["kids"]
        ):
            ps.update(trip_port=state.parent, trip_rep=True, trip_done=False, retry=0)
        elif state.parent is None and ps["kids_done"] >= ps["kids"] and not state.completion:
            state.completion = True
            state.leader = True
        state.dirty = True

    def _arm_wake(self, state: AgentState, view: StepView) -> None:
        ps = state.phase_state
        if state.parent is None and state.completion:
            state.wake_round = NEVER
            return
        if ps["reported"]:
            state.wake_round = NEVER
            return
        base = view.round - view.round % self._wlen
        if "trip_port" in ps and not ps["trip_done"]:
            mid = self._mids[state.id]
            for i in range(view.round - base + 2 >> 1, len(mid.bits)):
                if mid.bit(i):
                    state.wake_round = base + 2 * i
                    return
        state.wake_round = base + self._wlen

    # -- merge rules ----------------------------------------------------------

    def _adopt(
        self,
        state: AgentState,
        *,
        parent_port: int,
        label: int,
        partition: int,
        sibling: int | None,
    ) -> None:
        ps = state.phase_state
        state.parent = parent_port
        state.treelabel = label
        state.partition = partition
        state.sibling = sibling
        state.child = None
        state.nextport = first_port(parent_port, ps["mydeg"])
        state.completion = False
        state.leader = False
        ps["kids"] = 0
        ps["kids_done"] = 0
        ps["reported"] = False
        ps["retry"] = 0
        ps["agg_deg"] = ps["mydeg"]
        ps["agg_c0"] = 1 if partition == 0 else 0
        ps["agg_c1"] = 1 if partition == 1 else 0
        ps["agg_max"] = ps["mydeg"]
        ps.pop("trip_port", None)
        ps.pop("trip_rep", None)
        ps.pop("trip_done", None)
        state.dirty = True

    def _resident_step(self, state: AgentState, view: StepView) -> None:
        visitors = [s for s in view.colocated if not s.at_home]
        if not visitors:
            return
        ps = state.phase_state
        pivot = min(visitors, key=lambda s: (s.treelabel, s.id))
        if pivot.treelabel < state.treelabel:
            self._adopt(
                state,
                parent_port=pivot.entered_port,
                label=pivot.treelabel,
                partition=1 - pivot.partition,
                sibling=pivot.child,
            )
            return
        adopters = sorted(
            (s for s in visitors if s.treelabel > state.treelabel),
            key=lambda s: s.id,
        )
        if adopters:
            ps["kids"] += len(adopters)
            state.child = adopters[-1].entered_port
        for s in visitors:
            if s.treelabel == state.treelabel and s.scratch.get("trip_rep"):
                ps["kids_done"] += 1
                ps["agg_deg"] += s.scratch["agg_deg"]
                ps["agg_c0"] += s.scratch["agg_c0"]
                ps["agg_c1"] += s.scratch["agg_c1"]
                ps["agg_max"] = max(ps["agg_max"], s.scratch["agg_max"])
        state.dirty = True

    def _visitor_step(self, state: AgentState, view: StepView) -> None:
        resident = next((s for s in view.colocated if s.at_home), None)
        if resident is None:
            return  # target is abroad this slot; a later slot will catch it
        ps = state.phase_state
        others = [s for s in view.colocated if not s.at_home]
        pivot_key = min(
            [(s.treelabel, s.id) for s in others] + [(state.treelabel, state.id)]
        )
        res_label = resident.treelabel
        if ps["trip_rep"]:
            if state.treelabel == res_label:
                if pivot_key[0] < res_label:
                    return  # parent is being absorbed right now: delivery void
                ps["reported"] = True
                ps["trip_done"] = True
                state.dirty = True
            elif state.treelabel > res_label and pivot_key[0] >= res_label:
                # Parent switched to a smaller tree while our report was in
                # flight.  The report is stale; re-attach over the same edge.
                self._adopt_as_visitor(state, resident, others, res_label)
            return
        if (state.treelabel, state.id) == pivot_key and state.treelabel < res_label:
            ps["kids"] += 1
            state.child = ps["trip_port"]
            state.nextport = advance_port(ps["trip_port"], state.parent, ps["mydeg"])
            ps["trip_done"] = True
            state.dirty = True
            return
        if state.treelabel > res_label and pivot_key[0] >= res_label:
            self._adopt_as_visitor(state, resident, others, res_label)
            return
        # Same tree, or the resident is adopting some other pivot this round.
        # Either way this edge needs nothing more from us: once the resident
        # restarts its own sweep it covers the edge from its side.
        state.nextport = advance_port(ps["trip_port"], state.parent, ps["mydeg"])
        ps["trip_done"] = True
        state.dirty = True

    def _adopt_as_visitor(
        self,
        state: AgentState,
        resident: Snapshot,
        others: list[Snapshot],
        res_label: int,
    ) -> None:
        """Attach to the resident, slotting into the sibling chain by id."""
        rivals = sorted(
            [s for s in others if s.treelabel > res_label],
            key=lambda s: s.id,
        )
        rank = sum(1 for s in rivals if s.id < state.id)
        if rank == 0:
            sibling = resident.child
        else:
            sibling = rivals[rank - 1].entered_port
        self._adopt(
            state,
            parent_port=state.phase_state["trip_port"],
            label=res_label,
            partition=1 - resident.partition,
            sibling=sibling,
        )

    # -- per-round dispatch ---------------------------------------------------

    def step(self, state: AgentState, view: StepView) -> int | None:
        pos = view.round % self._wlen
        if pos % 2 == 0:
            # Departure rounds.  Visits never overlap these, so there is
            # nothing to merge; just launch the errand when its slot comes.
            if pos == 0:
                self._window_start(state)
            ps = state.phase_state
            if (
                "trip_port" in ps
                and not ps["trip_done"]
                and self._mids[state.id].bit(pos // 2)
            ):
                state.wake_round = view.round + 1
                return ps["trip_port"]
            self._arm_wake(state, view)
            return None
        if view.at_home:
            self._resident_step(state, view)
            self._arm_wake(state, view)
            return None
        self._visitor_step(state, view)
        self._arm_wake(state, view)
        return view.entered_port

    def local_done(self, state: AgentState) -> bool:
        if not state.at_home:
            return False
        if state.parent is None:
            return state.completion
        return bool(state.phase_state.get("reported"))


@dataclass(frozen=True)
class ElectionResult:
    leader_id: int
    tree: TreeEdgeSet
    partition: dict[int, int]
    payload: AggregatePayload
    received: dict[int, tuple[int, int, int, int, int]]
    report: RunReport
    trace: list[TraceEvent] | None = None


def elect_leader_and_tree(
    graph,
    config: SimConfig,
    *,
    max_rounds: int | None = None,
    record_trace: bool = False,
) -> ElectionResult:
    """Run the election, then push the root's totals down the tree.

    Afterwards every agent knows the leader id (its tree label), its side
    of the bipartition, and the graph totals ``(n, side counts, max degree,
    degree sum)``.
    """
    program = ElectionProgram()
    result = run(graph, config, program, max_rounds=max_rounds, record_trace=record_trace)

    roots = [s for s in config.states if s.parent is None]
    if len(roots) != 1:
        raise AssertionError(f"election left {len(roots)} roots standing")
    leader = roots[0]
    stray = [s.id for s in config.states if s.treelabel != leader.id]
    if stray:
        raise AssertionError(f"agents {stray} ended on a foreign tree label")
    ps = leader.phase_state
    payload = AggregatePayload(
        degree_sum=ps["agg_deg"],
        count0=ps["agg_c0"],
        count1=ps["agg_c1"],
        max_degree=ps["agg_max"],
    )
    partition = {s.id: s.partition for s in config.states}
    tree = tree_from_states(config.states)

    for s in config.states:  # drop errand bookkeeping before the downcast
        s.phase_state = {}

    lw = id_bits(config.lam)
    dw = max(graph.max_degree.bit_length(), 1)
    value = (payload.n, payload.count0, payload.count1, payload.max_degree, payload.degree_sum)
    received, bresult = broadcast_down(
        graph,
        config,
        tree,
        value,
        value_width=3 * lw + dw + (lw + dw),
        max_rounds=max_rounds,
        record_trace=record_trace,
    )

    trace = None
    if record_trace:
        trace = list(result.trace) + offset_trace(bresult.trace, result.rounds)
    peak: dict[int, int] = {}
    for agent, bits in result.peak_bits.items():
        peak[agent] = max(bits, bresult.peak_bits.get(agent, 0))
    report = RunReport(
        rounds_total=result.rounds + bresult.rounds,
        rounds_per_phase={"election": result.rounds, "downcast": bresult.rounds},
        peak_memory_bits=peak,
        outputs={
            "leader": leader.id,
            "n": payload.n,
            "side_counts": [payload.count0, payload.count1],
            "max_degree": payload.max_degree,
            "degree_sum": payload.degree_sum,
        },
    )
    return ElectionResult(
        leader_id=leader.id,
        tree=tree,
        partition=partition,
        payload=payload,
        received=received,
        report=report,
        trace=trace,
    )
