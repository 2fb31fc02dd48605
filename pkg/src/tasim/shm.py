"""Simulated shared memory: registers, step machines, schedules, histories.

The execution model is asynchronous shared memory with atomic multi-reader
multi-writer registers.  A *step machine* is a process program that performs
exactly one shared-memory access per scheduled step; all local computation
between accesses is free.  A *schedule* is a sequence of process ids fixed
before the run starts, so the adversary choosing it cannot react to anything
the processes do (in particular not to their coin flips).

Programs are written as generators that yield operation tuples and receive
the operation's response::

    def prog(pid):
        v = yield ('r', 3)        # read register 3
        yield ('w', 0, v + 1)     # write register 0

Two bookkeeping yields never touch shared memory and consume no schedule
slot; they delimit object-level operations for history checking::

    yield ('inv', 'scan', ())     # operation starts
    yield ('res', view)           # operation responds

Machines constructed with ``auto_history=True`` (the default) get one
invocation/response pair wrapped around their whole run instead.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Iterable, Optional

import numpy as np

READ = "r"
WRITE = "w"

Op = tuple  # ('r', reg) | ('w', reg, val)
Program = Generator[tuple, Any, Any]


class RegisterWidthError(ValueError):
    """A write does not fit the register's declared width."""


# ---------------------------------------------------------------------------
# events and histories


@dataclass(frozen=True)
class Event:
    """One invocation or response at an object's interface.

    Times are derived from the global schedule position t of the shared step
    they attach to: invocations get 2t (just before the step), responses
    2t+1 (just after).  Each schedule slot belongs to one process, so all
    event times in a run are distinct and totally ordered.
    """

    time: int
    pid: int
    kind: str  # 'inv' | 'res'
    op: str
    args: tuple
    result: Any = None


@dataclass
class OpRecord:
    pid: int
    op: str
    args: tuple
    result: Any
    inv: int
    resp: Optional[int]  # None while pending

    @property
    def pending(self) -> bool:
        return self.resp is None


@dataclass
class History:
    """Sequence of interface events, ordered by time."""

    events: list[Event] = field(default_factory=list)

    def ops(self) -> list[OpRecord]:
        """Pair up invocations with responses, per process, in order."""
        open_by_pid: dict[int, OpRecord] = {}
        out: list[OpRecord] = []
        for ev in self.events:
            if ev.kind == "inv":
                if ev.pid in open_by_pid:
                    raise ValueError(f"pid {ev.pid}: invocation while one is open")
                rec = OpRecord(ev.pid, ev.op, ev.args, None, ev.time, None)
                open_by_pid[ev.pid] = rec
                out.append(rec)
            elif ev.kind == "res":
                rec = open_by_pid.pop(ev.pid, None)
                if rec is None:
                    raise ValueError(f"pid {ev.pid}: response without invocation")
                rec.result = ev.result
                rec.resp = ev.time
            else:
                raise ValueError(f"unknown event kind {ev.kind!r}")
        return out


# ---------------------------------------------------------------------------
# memory


class Memory:
    """Array of atomic registers with declared bit widths and an access trace.

    The trace records one entry per shared-memory step:
    ``(t, pid, 'R'|'W', reg, val)``.  Scheduling slots that land on finished
    machines absorb into no-ops and leave no trace entry.
    """

    __slots__ = ("widths", "regs", "trace", "record_trace")

    def __init__(
        self,
        widths: Iterable[int],
        init: Optional[Iterable[int]] = None,
        record_trace: bool = False,
    ):
        self.widths = list(widths)
        self.regs = list(init) if init is not None else [0] * len(self.widths)
        if len(self.regs) != len(self.widths):
            raise ValueError("init length does not match widths")
        for i, v in enumerate(self.regs):
            self._check(i, v)
        self.trace: list[tuple] = []
        self.record_trace = record_trace

    @property
    def register_count(self) -> int:
        return len(self.regs)

    def _check(self, reg: int, val: int) -> None:
        if not isinstance(val, int) or val < 0 or val >> self.widths[reg]:
            raise RegisterWidthError(
                f"value {val!r} does not fit register {reg} ({self.widths[reg]} bits)"
            )

    def read(self, t: int, pid: int, reg: int) -> int:
        v = self.regs[reg]
        if self.record_trace:
            self.trace.append((t, pid, "R", reg, v))
        return v

    def write(self, t: int, pid: int, reg: int, val: int) -> None:
        self._check(reg, val)
        self.regs[reg] = val
        if self.record_trace:
            self.trace.append((t, pid, "W", reg, val))


def export_trace_jsonl(trace: Iterable[tuple], fp) -> None:
    """Write trace entries as JSON lines: {"t","pid","op","reg","val"}."""
    for t, pid, op, reg, val in trace:
        fp.write(
            json.dumps({"t": t, "pid": pid, "op": op, "reg": reg, "val": val})
            + "\n"
        )


# ---------------------------------------------------------------------------
# schedules


@dataclass
class Schedule:
    """A fully materialized sequence of process ids.

    Materialization happens at construction time, before any machine takes a
    step or flips a coin, which is what makes the adversary oblivious.
    """

    kind: str
    n: int
    seq: list[int]
    seed: Optional[int] = None
    burst: Optional[int] = None

    def __len__(self) -> int:
        return len(self.seq)

    def __iter__(self):
        return iter(self.seq)


def make_schedule(
    kind: str,
    n: int,
    length: int,
    seed: Optional[int] = None,
    burst: Optional[int] = None,
    seq: Optional[Iterable[int]] = None,
) -> Schedule:
    """Build a schedule of `length` entries over pids 0..n-1.

    kinds: 'rr' round robin; 'random' iid uniform (seeded); 'solo' round
    robin of solo bursts of `burst` consecutive steps; 'custom' wraps `seq`.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if kind == "rr":
        s = [i % n for i in range(length)]
    elif kind == "random":
        if seed is None:
            raise ValueError("random schedule needs a seed")
        rng = np.random.Generator(np.random.PCG64(seed))
        s = rng.integers(0, n, size=length).tolist()
    elif kind == "solo":
        if not burst or burst <= 0:
            raise ValueError("solo schedule needs a positive burst")
        s = [(i // burst) % n for i in range(length)]
    elif kind == "custom":
        if seq is None:
            raise ValueError("custom schedule needs seq")
        s = [int(p) for p in seq]
        if any(p < 0 or p >= n for p in s):
            raise ValueError("custom schedule entry out of range")
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return Schedule(kind, n, s, seed, burst)


# ---------------------------------------------------------------------------
# step machines


class StepMachine:
    """Wraps a program generator; holds its poised operation between steps."""

    __slots__ = (
        "pid",
        "gen",
        "op",
        "done",
        "result",
        "steps",
        "op_name",
        "op_args",
        "_auto",
        "_pending_inv",
        "_open",
    )

    def __init__(
        self,
        pid: int,
        gen: Program,
        op_name: str = "op",
        op_args: tuple = (),
        auto_history: bool = True,
    ):
        self.pid = pid
        self.gen = gen
        self.done = False
        self.result: Any = None
        self.steps = 0
        self.op_name = op_name
        self.op_args = op_args
        self._auto = auto_history
        self._pending_inv: Optional[tuple] = (op_name, op_args) if auto_history else None
        self._open: Optional[tuple] = None
        self.op = self._advance_to_shared(None, prime=True)

    def _advance_to_shared(self, send_val, prime: bool = False):
        try:
            item = self.gen.send(None) if prime else self.gen.send(send_val)
            while item[0] not in (READ, WRITE):
                if item[0] == "inv":
                    # an _open carrying a buffered result is about to close
                    # at this step's response timestamp, so it doesn't nest
                    if self._pending_inv is not None or (
                        self._open is not None and self._open[2] is _NO_RES
                    ):
                        raise ValueError(f"pid {self.pid}: nested invocation")
                    self._pending_inv = (item[1], tuple(item[2]))
                elif item[0] == "res":
                    if self._open is None or self._open[2] is not _NO_RES:
                        raise ValueError(f"pid {self.pid}: response without open invocation")
                    # buffered; recorded by step() with the closing timestamp
                    self._open = (self._open[0], self._open[1], item[1])
                    item = self.gen.send(None)
                    continue
                else:
                    raise ValueError(f"unknown yield {item!r}")
                item = self.gen.send(None)
            return item
        except StopIteration as e:
            if prime:
                raise ValueError("program finished without a shared-memory step")
            self.done = True
            self.result = e.value
            return None

    def step(self, memory: Memory, t: int, history: Optional[History]) -> bool:
        """Execute one shared-memory step at schedule position t.

        Returns False (a no-op) if the machine already finished.
        """
        if self.done:
            return False
        if self._pending_inv is not None:
            name, args = self._pending_inv
            self._open = (name, args, _NO_RES)
            self._pending_inv = None
            if history is not None:
                history.events.append(Event(2 * t, self.pid, "inv", name, args))
        op = self.op
        if op[0] == READ:
            resp = memory.read(t, self.pid, op[1])
        else:
            memory.write(t, self.pid, op[1], op[2])
            resp = None
        self.steps += 1
        self.op = self._advance_to_shared(resp)
        if self._open is not None and self._open[2] is not _NO_RES:
            name, args, res = self._open
            if history is not None:
                history.events.append(Event(2 * t + 1, self.pid, "res", name, args, res))
            self._open = None
        elif self.done:
            if self._auto and self._open is not None:
                name, args, _ = self._open
                if history is not None:
                    history.events.append(
                        Event(2 * t + 1, self.pid, "res", name, args, self.result)
                    )
                self._open = None
        return True


_NO_RES = object()


# ---------------------------------------------------------------------------
# runners


def _seq_of(schedule) -> list[int]:
    return schedule.seq if isinstance(schedule, Schedule) else list(schedule)


def run(
    machines: list[StepMachine],
    memory: Memory,
    schedule,
    history: Optional[History] = None,
    record: bool = True,
    start_t: int = 0,
    stop_when_done: bool = False,
) -> tuple[Optional[History], Memory]:
    """Drive machines through the schedule; one shared step per entry.

    Entries addressed to finished machines are absorbed as no-ops (they
    consume the slot but touch nothing).  Returns the history (None when
    record=False) and the memory, both mutated in place.
    """
    if record and history is None:
        history = History()
    by_pid: dict[int, StepMachine] = {}
    for m in machines:
        if m.pid in by_pid:
            raise ValueError(f"duplicate pid {m.pid}")
        by_pid[m.pid] = m
    live = sum(1 for m in machines if not m.done)
    t = start_t
    for pid in _seq_of(schedule):
        m = by_pid.get(pid)
        if m is not None and not m.done:
            m.step(memory, t, history)
            if m.done:
                live -= 1
                if stop_when_done and live == 0:
                    t += 1
                    break
        t += 1
    return history, memory


def run_live_uniform(
    machines: list[StepMachine],
    memory: Memory,
    rng,
    max_steps: int,
    history: Optional[History] = None,
) -> int:
    """Exact sampler of an iid-uniform oblivious schedule, skipping dead slots.

    Because the schedule is drawn independently of everything the machines
    do, conditioning on which machines have finished leaves the next useful
    entry uniform over the unfinished ones.  This runner draws only that
    subsequence, so observable behavior (step order, hence histories and
    outcomes) is distributed exactly as under `run` with a long 'random'
    schedule, at a fraction of the cost.  Returns the number of useful steps.
    """
    live = [m for m in machines if not m.done]
    t = 0
    while live and t < max_steps:
        i = rng.randrange(len(live))
        m = live[i]
        m.step(memory, t, history)
        if m.done:
            live[i] = live[-1]
            live.pop()
        t += 1
    return t


@dataclass
class Configuration:
    """A resumable point of a run: machines + memory + position + history."""

    machines: list[StepMachine]
    memory: Memory
    t: int
    history: Optional[History]

    def resume(self, schedule, stop_when_done: bool = False):
        return run(
            self.machines,
            self.memory,
            schedule,
            history=self.history,
            record=self.history is not None,
            start_t=self.t,
            stop_when_done=stop_when_done,
        )


def freeze_prefix(
    machines: list[StepMachine],
    memory: Memory,
    schedule,
    t: int,
    record: bool = True,
) -> Configuration:
    """Execute the first t schedule entries and capture the configuration.

    The machines and memory are advanced in place; resuming the returned
    configuration on the remaining schedule is step-for-step identical to an
    uninterrupted run (machines are deterministic given their own RNG streams
    and the responses they receive).
    """
    seq = _seq_of(schedule)
    if t > len(seq):
        raise ValueError("prefix longer than schedule")
    history = History() if record else None
    run(machines, memory, seq[:t], history=history, record=record)
    return Configuration(machines, memory, t, history)


# ---------------------------------------------------------------------------
# native (threaded) backend: same register interface, OS-level interleaving


class NativeMemory:
    """Registers backed by a lock; single-word reads/writes are linearizable.

    Satisfies the same read/write interface as Memory (the t argument is
    ignored; real time orders accesses).  Intended for stress runs showing
    the machines carry no hidden shared state; the deterministic simulator
    remains the reference backend.
    """

    __slots__ = ("widths", "regs", "_lock")

    def __init__(self, widths: Iterable[int], init: Optional[Iterable[int]] = None):
        self.widths = list(widths)
        self.regs = list(init) if init is not None else [0] * len(self.widths)
        self._lock = threading.Lock()

    def read(self, t: int, pid: int, reg: int) -> int:
        with self._lock:
            return self.regs[reg]

    def write(self, t: int, pid: int, reg: int, val: int) -> None:
        if not isinstance(val, int) or val < 0 or val >> self.widths[reg]:
            raise RegisterWidthError(f"value {val!r} does not fit register {reg}")
        with self._lock:
            self.regs[reg] = val


def run_native(machines: list[StepMachine], memory: NativeMemory) -> list[Any]:
    """Run each machine on its own thread until completion; return results."""

    def worker(m: StepMachine):
        t = 0
        while not m.done:
            m.step(memory, t, None)
            t += 1

    threads = [threading.Thread(target=worker, args=(m,)) for m in machines]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    return [m.result for m in machines]
