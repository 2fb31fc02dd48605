"""Coarse-grained execution engine and exhaustive schedule exploration.

The protocol algorithms in this package are written as explicit state
machines (`LogicMachine`) whose poised operations act on an abstract store:

    ('u', comp, val)   overwrite one snapshot component
    ('s', lo, hi)      atomically read components lo..hi-1
    ('r', ridx)        read a plain register
    ('w', ridx, val)   write a plain register

Running them against `AtomicStore` treats every snapshot operation as a
single indivisible step.  This is the natural cost model for the sifter and
test-and-set analyses (their step bounds count snapshot operations), and it
keeps state spaces small enough for exhaustive breadth-first exploration
with duplicate-state elimination.

The same logic machines can instead be lowered onto the register-level
machinery in `shm`/`snapshot` via `register_program`, which expands each
snapshot operation into its constituent register reads and writes.  Both
granularities execute the same decision logic, so coarse-grained exhaustive
results and fine-grained spot checks corroborate each other.
"""

from __future__ import annotations

from collections import Counter
from typing import Callable, Optional

from .shm import READ, WRITE, History, Memory, Event, StepMachine, run


class LogicMachine:
    """Explicit-state protocol participant.

    Subclasses keep all mutable state in attributes listed in FIELDS (values
    must be hashable), poise the next operation in `self.op`, and implement
    `advance(res)` to consume the operation's result and choose the next one
    (or set `done`/`result`).  `clone`/`key` then come for free, which is
    what makes exhaustive exploration cheap.
    """

    FIELDS = ("pid", "op", "done", "result", "steps")

    pid: int
    op: Optional[tuple]
    done: bool
    result: object
    steps: int
    op_name: Optional[str] = None  # interface op for histories, e.g. "tas"
    op_args: tuple = ()

    def __init__(self, pid: int):
        self.pid = pid
        self.op = None
        self.done = False
        self.result = None
        self.steps = 0

    def advance(self, res) -> None:
        raise NotImplementedError

    def clone(self):
        c = object.__new__(type(self))
        for f in type(self).FIELDS:
            setattr(c, f, getattr(self, f))
        return c

    def key(self) -> tuple:
        # `steps` is bookkeeping, not protocol state: keeping it out of the
        # key lets exploration of non-terminating interleavings reach a
        # fixpoint over the finite protocol state space
        return tuple(
            getattr(self, f) for f in type(self).FIELDS if f != "steps"
        )


class AtomicStore:
    """Snapshot components plus plain registers, mutated one op at a time."""

    __slots__ = ("comps", "regs")

    def __init__(self, m: int, init=None, n_regs: int = 0, reg_init: int = 0):
        self.comps = [init] * m if not isinstance(init, (list, tuple)) else list(init)
        if isinstance(init, (list, tuple)) and len(self.comps) != m:
            raise ValueError("init length != m")
        self.regs = [reg_init] * n_regs

    def apply(self, op: tuple):
        kind = op[0]
        if kind == "u":
            self.comps[op[1]] = op[2]
            return None
        if kind == "s":
            return tuple(self.comps[op[1] : op[2]])
        if kind == "r":
            return self.regs[op[1]]
        if kind == "w":
            self.regs[op[1]] = op[2]
            return None
        raise ValueError(f"unknown op {op!r}")

    def clone(self) -> "AtomicStore":
        c = object.__new__(AtomicStore)
        c.comps = list(self.comps)
        c.regs = list(self.regs)
        return c

    def key(self) -> tuple:
        return (tuple(self.comps), tuple(self.regs))


def run_atomic(
    machines: list,
    store: AtomicStore,
    schedule,
    history: Optional[History] = None,
    record: bool = True,
    start_t: int = 0,
    stop_when_done: bool = False,
):
    """Run logic machines under a pid schedule, one store op per slot.

    Entries naming finished (or absent) pids are absorbed as no-ops.  When
    `record` is set, machines with an `op_name` get an invocation event at
    their first step and a response event at their finishing step, using the
    2t / 2t+1 timestamp convention.  Returns (history, t_next).
    """
    by_pid = {}
    for m in machines:
        if m.pid in by_pid:
            raise ValueError(f"duplicate pid {m.pid}")
        by_pid[m.pid] = m
    if record and history is None:
        history = History()
    t = start_t
    for pid in schedule:
        m = by_pid.get(pid)
        if m is not None and not m.done:
            if record and m.op_name is not None and m.steps == 0:
                history.events.append(
                    Event(2 * t, m.pid, "inv", m.op_name, tuple(m.op_args), None)
                )
            res = store.apply(m.op)
            m.steps += 1
            m.advance(res)
            if m.done and record and m.op_name is not None:
                history.events.append(
                    Event(2 * t + 1, m.pid, "res", m.op_name, (), m.result)
                )
        t += 1
        if stop_when_done and all(mm.done for mm in machines):
            break
    return history, t


def run_atomic_solo(machine, store: AtomicStore, max_steps: int) -> int:
    """Run one machine alone until it finishes; return steps taken.

    Raises RuntimeError if it is still unfinished after `max_steps` ops
    (an obstruction-freedom violation at this granularity).
    """
    taken = 0
    while not machine.done:
        if taken >= max_steps:
            raise RuntimeError(
                f"pid {machine.pid} not done after {max_steps} solo steps"
            )
        res = store.apply(machine.op)
        machine.steps += 1
        machine.advance(res)
        taken += 1
    return taken


def explore(
    make_system: Callable[[], tuple],
    state_check: Optional[Callable] = None,
    max_states: int = 2_000_000,
):
    """Exhaustive breadth-first exploration of all schedules.

    `make_system()` returns (machines, store).  Every reachable system state
    is visited exactly once (duplicate configurations merged via machine and
    store keys), `state_check(machines, store)` runs on each, and terminal
    states are tallied by the tuple of machine results.

    Returns (terminals: Counter, states_visited: int).
    """
    machines0, store0 = make_system()
    key0 = (tuple(m.key() for m in machines0), store0.key())
    seen = {key0}
    frontier = [(machines0, store0)]
    terminals: Counter = Counter()
    while frontier:
        nxt = []
        for machines, store in frontier:
            if state_check is not None:
                state_check(machines, store)
            live = [i for i, m in enumerate(machines) if not m.done]
            if not live:
                terminals[tuple(m.result for m in machines)] += 1
                continue
            for i in live:
                ms = list(machines)
                mi = ms[i] = machines[i].clone()
                st = store.clone()
                res = st.apply(mi.op)
                mi.steps += 1
                mi.advance(res)
                k = (tuple(m.key() for m in ms), st.key())
                if k not in seen:
                    if len(seen) >= max_states:
                        raise RuntimeError(f"state space exceeds {max_states}")
                    seen.add(k)
                    nxt.append((ms, st))
        frontier = nxt
    return terminals, len(seen)


# ---------------------------------------------------------------------------
# lowering logic machines to the register level


def register_program(
    logic: LogicMachine,
    snap,
    reg_map=None,
    encode=None,
    decode=None,
    history_ops: bool = True,
):
    """Expand a logic machine into a register-level step generator.

    `snap` is a BoundedSnapshot providing update_steps/scan_steps; plain
    register indices go through `reg_map` (identity by default).  Logic
    machines hold structured component values; `encode(comp, val)` packs
    them into snapshot integers and `decode(comp, word)` unpacks scan
    results (identity when omitted).  The generator drives `logic.advance`
    with exactly the values the atomic store would have produced, so both
    granularities share one decision procedure.  Emits invocation/response
    markers when the logic declares an interface op.  The logic's own pid is
    used for snapshot handshakes, so each (logic, snap) pair must have a pid
    unique within that snapshot instance.
    """
    if reg_map is None:
        reg_map = lambda r: r
    emit = history_ops and logic.op_name is not None
    if emit:
        yield ("inv", logic.op_name, tuple(logic.op_args))
    while not logic.done:
        op = logic.op
        kind = op[0]
        if kind == "u":
            val = encode(op[1], op[2]) if encode is not None else op[2]
            yield from snap.update_steps(logic.pid, op[1], val)
            res = None
        elif kind == "s":
            view = yield from snap.scan_steps(logic.pid)
            if decode is not None:
                res = tuple(decode(i, view[i]) for i in range(op[1], op[2]))
            else:
                res = tuple(view[op[1] : op[2]])
        elif kind == "r":
            res = yield (READ, reg_map(op[1]))
        elif kind == "w":
            yield (WRITE, reg_map(op[1]), op[2])
            res = None
        else:
            raise ValueError(f"unknown op {op!r}")
        logic.advance(res)
    if emit:
        yield ("res", logic.result)
    return logic.result


# ---------------------------------------------------------------------------
# register-level exhaustive exploration (replay based)


def _canon(h: History) -> tuple:
    # interface events with timestamps dropped; order is what matters
    return tuple((e.pid, e.kind, e.op, e.args, e.result) for e in h.events)


def explore_interleavings(
    make_system: Callable[[], tuple],
    on_terminal: Optional[Callable] = None,
    max_nodes: int = 2_000_000,
    max_depth: Optional[int] = None,
    on_cut: Optional[Callable] = None,
):
    """Exhaustively explore register-level interleavings by prefix replay.

    `make_system()` must return fresh (machines, memory) with deterministic
    programs and `memory.record_trace` enabled.  Step generators cannot be
    cloned, so each schedule prefix is replayed from scratch; prefixes are
    merged when they agree on (interface history modulo timestamps, register
    contents, per-pid observation sequence, done flags).  A deterministic
    program's continuation is a function of its own observations and the
    memory, and linearizability depends only on event order, so merged
    prefixes have identical futures in every sense the checks care about.

    Obstruction-free algorithms that retry under contention make the raw
    tree infinite (two scanners can disturb each other forever), so a
    `max_depth` cap is required for such systems: branches still running at
    the cap are handed to `on_cut(history, memory)` instead of being
    extended, and every execution beyond the cap extends one of those
    inspected prefixes.

    `on_terminal(history, memory)` runs once per distinct completed
    execution.  Returns (terminal_count, states_visited).
    """
    seen: set = set()
    terminals = 0
    nodes = 0
    stack: list[list[int]] = [[]]
    while stack:
        prefix = stack.pop()
        machines, memory = make_system()
        if not memory.record_trace:
            raise ValueError("memory must record a trace for state merging")
        history = History()
        run(machines, memory, prefix, history=history)
        per = {m.pid: [] for m in machines}
        for (_, pid, kind, reg, val) in memory.trace:
            per[pid].append((kind, reg, val))
        key = (
            _canon(history),
            tuple(memory.regs),
            tuple(tuple(per[m.pid]) for m in machines),
            tuple(m.done for m in machines),
        )
        if key in seen:
            continue
        seen.add(key)
        nodes += 1
        if nodes > max_nodes:
            raise RuntimeError(f"exploration exceeds {max_nodes} nodes")
        live = [m.pid for m in machines if not m.done]
        if not live:
            terminals += 1
            if on_terminal is not None:
                on_terminal(history, memory)
        elif max_depth is not None and len(prefix) >= max_depth:
            if on_cut is not None:
                on_cut(history, memory)
        else:
            for pid in live:
                stack.append(prefix + [pid])
    return terminals, len(seen)
