"""Coarse-grained engine: logic machines, exhaustive exploration, lowering."""

import pytest

from tasim.atomic import (
    AtomicStore,
    LogicMachine,
    explore,
    explore_interleavings,
    register_program,
    run_atomic,
    run_atomic_solo,
)
from tasim.shm import History, StepMachine
from tasim.snapshot import BoundedSnapshot


class PutScanLogic(LogicMachine):
    """Write pid+1 into one component, scan everything, return the view."""

    FIELDS = LogicMachine.FIELDS + ("m", "stage")
    op_name = "putscan"

    def __init__(self, pid, m):
        super().__init__(pid)
        self.m = m
        self.stage = "u"
        self.op = ("u", pid % m, pid + 1)

    def advance(self, res):
        if self.stage == "u":
            self.stage = "s"
            self.op = ("s", 0, self.m)
        else:
            self.done = True
            self.result = res


class SpinLogic(LogicMachine):
    def __init__(self, pid):
        super().__init__(pid)
        self.op = ("r", 0)

    def advance(self, res):
        self.op = ("r", 0)


def test_store_ops_and_keys():
    st = AtomicStore(2, init=None, n_regs=1, reg_init=7)
    assert st.apply(("s", 0, 2)) == (None, None)
    st.apply(("u", 1, "x"))
    assert st.apply(("s", 0, 2)) == (None, "x")
    assert st.apply(("r", 0)) == 7
    st.apply(("w", 0, 9))
    assert st.apply(("r", 0)) == 9
    snap = st.clone()
    st.apply(("u", 0, "y"))
    assert snap.comps == [None, "x"] and st.comps == ["y", "x"]
    assert snap.key() != st.key()
    with pytest.raises(ValueError):
        AtomicStore(2, init=[1])
    with pytest.raises(ValueError):
        st.apply(("z",))


def test_logic_clone_and_key_exclude_steps():
    a = PutScanLogic(0, 2)
    b = a.clone()
    b.steps = 5
    assert a.key() == b.key()  # steps is bookkeeping, not protocol state
    b.advance(None)
    assert a.key() != b.key() and a.stage == "u" and b.stage == "s"


def test_run_atomic_history_convention():
    ms = [PutScanLogic(0, 2)]
    st = AtomicStore(2, init=None)
    h, t_next = run_atomic(ms, st, [9, 0, 9, 0])  # absent pids absorbed
    assert t_next == 4
    ev = [(e.kind, e.time, e.result) for e in h.events]
    assert ev == [("inv", 2, None), ("res", 7, (1, None))]
    assert ms[0].result == (1, None) and ms[0].steps == 2


def test_run_atomic_duplicate_pid():
    with pytest.raises(ValueError):
        run_atomic([SpinLogic(1), SpinLogic(1)], AtomicStore(0, n_regs=1), [1])


def test_run_atomic_solo_bound():
    m = PutScanLogic(0, 2)
    assert run_atomic_solo(m, AtomicStore(2, init=None), 10) == 2
    with pytest.raises(RuntimeError):
        run_atomic_solo(SpinLogic(0), AtomicStore(0, n_regs=1), 50)


EXPECTED_VIEWS = {
    ((1, None), (1, 2)),  # p0's scan finished before p1's update
    ((1, 2), (None, 2)),  # p1's scan finished before p0's update
    ((1, 2), (1, 2)),  # both updates before both scans
}


def test_explore_two_putscans():
    def make():
        return [PutScanLogic(0, 2), PutScanLogic(1, 2)], AtomicStore(2, init=None)

    checked = {"states": 0}

    def chk(machines, store):
        checked["states"] += 1

    terminals, visited = explore(make, state_check=chk)
    assert set(terminals) == EXPECTED_VIEWS
    assert checked["states"] == visited
    with pytest.raises(RuntimeError):
        explore(make, max_states=3)


def test_register_lowering_agrees_with_atomic():
    # the same decision logic, expanded to register steps; the set of
    # reachable outcome pairs must coincide with the atomic exploration.
    # concurrent scans can restart each other forever, so the tree is
    # depth-capped; capped branches are real (counted via on_cut)
    def make():
        snap = BoundedSnapshot(0, 2, n=2, value_bits=2)
        memory = snap.fresh_memory(record_trace=True)
        machines = []
        for p in range(2):
            prog = register_program(
                PutScanLogic(p, 2),
                snap,
                decode=lambda i, w: None if w == 0 else w,
            )
            machines.append(StepMachine(p, prog, auto_history=False))
        return machines, memory

    seen_views = set()
    cuts = []

    def on_terminal(history, memory):
        res = {}
        for o in history.ops():
            res[o.pid] = o.result
        seen_views.add((res[0], res[1]))

    terminals, states = explore_interleavings(
        make, on_terminal, max_depth=28, on_cut=lambda h, m: cuts.append(1)
    )
    assert seen_views == EXPECTED_VIEWS
    assert terminals >= 3
    assert cuts, "expected some still-running branches at the depth cap"


def test_explore_interleavings_requires_trace():
    def make():
        snap = BoundedSnapshot(0, 2, n=2, value_bits=2)
        memory = snap.fresh_memory()  # record_trace off
        prog = register_program(PutScanLogic(0, 2), snap)
        return [StepMachine(0, prog, auto_history=False)], memory

    with pytest.raises(ValueError, match="trace"):
        explore_interleavings(make)


def test_register_program_solo_result():
    snap = BoundedSnapshot(0, 2, n=1, value_bits=2)
    memory = snap.fresh_memory()
    logic = PutScanLogic(0, 2)
    m = StepMachine(0, register_program(logic, snap), auto_history=False)
    h = History()
    t = 0
    while not m.done:
        m.step(memory, t, h)
        t += 1
    assert m.result == (1, 0)  # raw register cells: unwritten comps read 0
    assert t == 2 + (2 * 2 + 2)  # one update + one fresh scan
    ops = h.ops()
    assert len(ops) == 1 and ops[0].op == "putscan" and ops[0].result == (1, 0)
