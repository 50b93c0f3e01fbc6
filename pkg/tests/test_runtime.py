"""Engine semantics: scheduling, movement, memory accounting, determinism."""

import json

import pytest

from butterfly_agents.graphs import make_complete_bipartite, make_path
from butterfly_agents.protocols.meeting import MeetingWindowProgram
from butterfly_agents.runtime import (
    NEVER,
    AgentProgram,
    AgentState,
    IllegalPort,
    RoundLimitExceeded,
    account_memory,
    offset_trace,
    place_dispersed,
    run,
    write_trace_jsonl,
)


class SitStill(AgentProgram):
    name = "sit-still"

    def on_start(self, states, ctx):
        for s in states:
            s.wake_round = NEVER

    def step(self, state, view):
        return None

    def local_done(self, state):
        return True


class AskForBadPort(AgentProgram):
    name = "bad-port"

    def on_start(self, states, ctx):
        pass

    def step(self, state, view):
        return view.degree_here  # one past the last legal port

    def local_done(self, state):
        return False


class NeverDone(AgentProgram):
    name = "never-done"

    def on_start(self, states, ctx):
        pass

    def step(self, state, view):
        return None

    def local_done(self, state):
        return False


class CrossOver(AgentProgram):
    """Both agents on a two-node path walk the shared edge at round 0.

    They must pass each other on the edge without meeting, find the far
    node empty, and walk home.
    """

    name = "cross-over"
    scratch_widths = {"alone_abroad": "bool"}

    def on_start(self, states, ctx):
        pass

    def step(self, state, view):
        if view.round == 0:
            return 0
        if not view.at_home:
            state.phase_state["alone_abroad"] = len(view.colocated) == 0
            state.dirty = True
            return view.entered_port
        return None

    def local_done(self, state):
        return state.at_home and state.phase_state.get("alone_abroad", False)


class Converge(AgentProgram):
    """Degree-1 agents walk to their neighbor, log the crowd, walk home."""

    name = "converge"

    def on_start(self, states, ctx):
        self._deg = dict(zip((s.id for s in states), ctx.degrees))

    def step(self, state, view):
        for other in view.colocated:
            state.counters[other.id] = state.counters.get(other.id, 0) + 1
            state.dirty = True
        if self._deg[state.id] != 1:
            state.wake_round = NEVER
            return None
        if view.round == 0:
            return 0
        if not view.at_home:
            return view.entered_port
        state.phase_state["back"] = True
        state.wake_round = NEVER
        return None

    def local_done(self, state):
        if self._deg[state.id] != 1:
            return True
        return bool(state.phase_state.get("back"))


def test_place_dispersed_shape():
    g, _ = make_path(3)
    cfg = place_dispersed(g, [5, 1, 3])
    assert cfg.lam == 5
    assert [(s.id, s.home_node) for s in cfg.states] == [(5, 0), (1, 1), (3, 2)]


def test_place_dispersed_rejects_duplicates():
    g, _ = make_path(3)
    with pytest.raises(ValueError):
        place_dispersed(g, [1, 2, 1])


def test_place_dispersed_rejects_wrong_count():
    g, _ = make_path(3)
    with pytest.raises(ValueError):
        place_dispersed(g, [1, 2])


def test_place_dispersed_rejects_small_lam():
    g, _ = make_path(2)
    with pytest.raises(ValueError):
        place_dispersed(g, [1, 9], lam=3)


def test_fresh_agent_memory_is_24_bits():
    # id width 4 (bound 15), port width 3 (degree 3): 2*4 + 4*3 + 4 flag bits
    s = AgentState(id=2, home_node=0, current_node=0)
    assert account_memory(s, lam=15, delta=3) == 24


def test_scratch_and_table_accounting():
    s = AgentState(id=2, home_node=0, current_node=0)
    base = account_memory(s, lam=15, delta=3)
    s.phase_state["flag"] = True
    s.phase_state["p"] = 1
    assert account_memory(s, 15, 3, {"flag": "bool", "p": "port"}) == base + 1 + 3
    s.neighbor_list.append((0, 9))  # id width 4 + degree width 2
    s.counters[9] = 1
    assert account_memory(s, 15, 3, {"flag": "bool", "p": "port"}) == base + 4 + 2 * 6


def test_illegal_port_is_rejected():
    g, _ = make_path(2)
    cfg = place_dispersed(g, [0, 1])
    with pytest.raises(IllegalPort):
        run(g, cfg, AskForBadPort())


def test_round_limit_raises():
    g, _ = make_path(2)
    cfg = place_dispersed(g, [0, 1])
    with pytest.raises(RoundLimitExceeded):
        run(g, cfg, NeverDone(), max_rounds=10)


def test_sleeping_forever_while_undone_raises():
    class Sleeper(NeverDone):
        def on_start(self, states, ctx):
            for s in states:
                s.wake_round = NEVER

    g, _ = make_path(2)
    cfg = place_dispersed(g, [0, 1])
    with pytest.raises(RoundLimitExceeded):
        run(g, cfg, Sleeper(), max_rounds=100)


def test_simultaneous_moves_swap_without_meeting():
    g, _ = make_path(2)
    cfg = place_dispersed(g, [0, 1])
    result = run(g, cfg, CrossOver(), record_comms=True)
    assert all(s.phase_state["alone_abroad"] for s in cfg.states)
    assert all(s.at_home for s in cfg.states)
    assert result.comms == []  # nobody ever shared a node


def test_crowd_wakes_everyone_and_comms_are_symmetric():
    g, _ = make_path(3)
    cfg = place_dispersed(g, [4, 5, 6])
    result = run(g, cfg, Converge(), record_comms=True)
    # both path ends visited the middle at round 1: a three-agent crowd
    assert cfg.states[1].counters == {4: 1, 6: 1}
    assert cfg.states[0].counters == {5: 1, 6: 1}
    assert cfg.states[2].counters == {4: 1, 5: 1}
    seen = set(result.comms)
    assert seen and all((r, b, a) in seen for r, a, b in seen)


def test_runs_are_deterministic():
    g, _ = make_complete_bipartite(2, 2)
    targets = {7: 0, 3: 0, 9: 0, 5: 0}

    def one_run():
        cfg = place_dispersed(g, [7, 3, 9, 5], lam=15)
        prog = MeetingWindowProgram(15, targets)
        res = run(g, cfg, prog, record_trace=True)
        return res.trace, res.rounds, dict(res.peak_bits), prog.meetings

    first, second = one_run(), one_run()
    assert first == second


def test_lazy_and_always_step_agree():
    g, _ = make_complete_bipartite(2, 2)
    targets = {7: 0, 3: 0, 9: 0, 5: 0}

    def one_run(always_step):
        cfg = place_dispersed(g, [7, 3, 9, 5], lam=15)
        res = run(
            g,
            cfg,
            MeetingWindowProgram(15, targets),
            record_trace=True,
            always_step=always_step,
        )
        finals = [(s.id, s.current_node) for s in cfg.states]
        return res.rounds, dict(res.peak_bits), finals, sorted(res.trace)

    assert one_run(False) == one_run(True)


def test_trace_offset_and_jsonl(tmp_path):
    trace = [(0, 7, 0, "move", 1), (1, 7, 2, "stay", None)]
    shifted = offset_trace(trace, 10)
    assert shifted == [(10, 7, 0, "move", 1), (11, 7, 2, "stay", None)]
    path = tmp_path / "t.jsonl"
    write_trace_jsonl(str(path), shifted)
    rows = [json.loads(ln) for ln in path.read_text().splitlines()]
    assert rows[0] == {"round": 10, "agent": 7, "node": 0, "action": "move", "port": 1}
    assert len(rows) == 2
