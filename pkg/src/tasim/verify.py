"""Correctness oracles: test-and-set history checks, linearizability search,
outcome tallies, and solo-progress probes.

Everything here is deliberately independent of the algorithm implementations:
the checkers consume interface histories and sequential object semantics only,
so they can't inherit a bug from the code they are judging.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .shm import History, OpRecord


class SearchBudgetExceeded(RuntimeError):
    """The linearizability search ran out of budget: result is unknown.

    Raised instead of returning, so a truncated search can never be mistaken
    for a pass.
    """


@dataclass
class Verdict:
    ok: bool
    reason: Optional[str] = None
    winner: Optional[int] = None

    def to_json(self) -> str:
        return json.dumps(
            {"ok": self.ok, "reason": self.reason, "winner": self.winner}
        )


# ---------------------------------------------------------------------------
# test-and-set histories


def check_tas(h: History, permissive: bool = False) -> Verdict:
    """Check a one-shot test-and-set history.

    A complete history is correct iff exactly one operation returned 0 and
    its invocation precedes every 1-response (equivalently: no loser finished
    before the winner was invoked; then "winner first, losers after" is a
    legal sequential witness).

    Strict mode requires a complete history and raises ValueError on pending
    operations.  Permissive mode accepts pending operations: if no 0-response
    exists, some pending operation must be invocable first, i.e. its
    invocation must precede every completed response (it is the notional
    winner whose response we never saw).
    """
    ops = h.ops()
    for o in ops:
        if o.op != "tas":
            raise ValueError(f"non-tas operation {o.op!r} in history")
        if o.resp is not None and o.result not in (0, 1):
            raise ValueError(f"tas returned {o.result!r}")
    pending = [o for o in ops if o.pending]
    if pending and not permissive:
        raise ValueError("incomplete history (use permissive=True)")
    completed = [o for o in ops if not o.pending]
    zeros = [o for o in completed if o.result == 0]
    ones = [o for o in completed if o.result == 1]
    if len(zeros) > 1:
        return Verdict(False, f"{len(zeros)} operations returned 0")
    if len(zeros) == 1:
        w = zeros[0]
        for o in ones:
            if o.resp < w.inv:
                return Verdict(
                    False,
                    f"pid {o.pid} returned 1 before the 0-returner (pid {w.pid}) was invoked",
                )
        return Verdict(True, winner=w.pid)
    # no 0-response
    if not completed:
        return Verdict(True)  # nothing observable happened (or only pendings)
    for p in pending:
        if all(p.inv < c.resp for c in completed):
            return Verdict(True, winner=p.pid)
    return Verdict(False, "no operation returned 0 and no pending op can be first")


def outcome_counts(h: History) -> Counter:
    """Tally results of completed operations; pending ops count as 'pending'."""
    c: Counter = Counter()
    for o in h.ops():
        c["pending" if o.pending else o.result] += 1
    return c


# ---------------------------------------------------------------------------
# sequential object semantics for the linearizability checker


class TasSequential:
    """One-shot test-and-set: first operation sees 0, later ones see 1."""

    def initial(self):
        return 0

    def apply(self, state, op: str, args: tuple):
        if op != "tas":
            raise ValueError(f"unknown op {op!r}")
        return 1, state


class SnapshotSequential:
    """M-component snapshot: update replaces one component, scan returns all."""

    def __init__(self, m: int, init: Any = 0):
        self.m = m
        self.init = init

    def initial(self):
        return (self.init,) * self.m

    def apply(self, state, op: str, args: tuple):
        if op == "update":
            i, x = args
            return state[:i] + (x,) + state[i + 1 :], None
        if op == "scan":
            return state, state
        raise ValueError(f"unknown op {op!r}")


def _norm(v):
    return tuple(v) if isinstance(v, list) else v


def check_linearizable(h: History, spec, budget: int = 500_000) -> bool:
    """Exhaustive linearizability check against a sequential object.

    Depth-first search over linearization orders, memoized on the pair
    (set of linearized ops, object state); an operation may be linearized
    next only if no other un-linearized operation responded before it was
    invoked.  Completed operations must reproduce their recorded results;
    pending operations may be linearized with any result or left out.

    Raises SearchBudgetExceeded when more than `budget` search nodes are
    expanded: the answer is then unknown, never a silent pass.
    """
    ops = h.ops()
    n = len(ops)
    if n == 0:
        return True
    INF = float("inf")
    inv = [o.inv for o in ops]
    resp = [o.resp if o.resp is not None else INF for o in ops]
    results = [_norm(o.result) for o in ops]
    completed = [o.resp is not None for o in ops]
    names = [o.op for o in ops]
    args = [o.args for o in ops]
    all_completed = frozenset(i for i in range(n) if completed[i])

    seen: set = set()
    nodes = 0

    def rec(done: frozenset, state) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise SearchBudgetExceeded(f"linearizability search exceeded {budget} nodes")
        if all_completed <= done:
            return True
        key = (done, state)
        if key in seen:
            return False
        seen.add(key)
        live = [i for i in range(n) if i not in done]
        min_resp = min(resp[i] for i in live)
        for i in live:
            if inv[i] < min_resp:
                state2, ret = spec.apply(state, names[i], args[i])
                if completed[i] and _norm(ret) != results[i]:
                    continue
                if rec(done | {i}, state2):
                    return True
        return False

    return rec(frozenset(), spec.initial())


# ---------------------------------------------------------------------------
# solo-progress probes (obstruction freedom)


@dataclass
class SoloProbeReport:
    samples: int
    trivial: int = 0  # prefixes where every machine had already finished
    max_steps: int = 0
    steps: list[int] = field(default_factory=list)
    violations: list[tuple] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> str:
        return json.dumps(
            {
                "samples": self.samples,
                "trivial": self.trivial,
                "max_steps": self.max_steps,
                "violations": len(self.violations),
            }
        )


def probe_solo(
    factory: Callable,
    samples: int,
    bound: int,
    seed: int,
    prefix_max: int = 400,
) -> SoloProbeReport:
    """Sample reachable configurations; resume one unfinished process solo.

    `factory(rng)` must build a fresh system and return
    ``(machines, target, runner)`` where ``runner(machines, target, pids)``
    executes the given pid sequence.  For each sample a random schedule
    prefix reaches a configuration, a random unfinished machine runs alone
    for up to `bound` of its own steps, and the probe records how many steps
    it needed.  A machine still unfinished after `bound` solo steps is a
    violation (the algorithm would not be obstruction-free).
    """
    rng = random.Random(seed)
    report = SoloProbeReport(samples=samples)
    for s in range(samples):
        machines, target, runner = factory(rng)
        pids = [m.pid for m in machines]
        plen = rng.randrange(prefix_max + 1)
        prefix = [pids[rng.randrange(len(pids))] for _ in range(plen)]
        runner(machines, target, prefix)
        live = [m for m in machines if not m.done]
        if not live:
            report.trivial += 1
            continue
        m = live[rng.randrange(len(live))]
        before = m.steps
        runner(machines, target, [m.pid] * bound)
        took = m.steps - before
        if not m.done:
            report.violations.append((s, m.pid, took))
        else:
            report.steps.append(took)
            if took > report.max_steps:
                report.max_steps = took
    return report
