"""Deterministic obstruction-free test-and-set from a chain of sifters.

A single sifter guarantees at most floor((2k+1)/3) winners among k
participants.  Chaining ell(n) = floor(log_{3/2} n) + 1 of them, where the
winners of each level advance to the next and everyone else loses, shrinks
any field of n to exactly one final winner: that is weak leader election.
All levels live in one shared (6*ell)-component snapshot (components
6*(j-1)..6*j-1 belong to level j), which costs 6*ell + 1 registers instead
of 7 per level.

Weak leader election becomes a linearizable test-and-set with one extra
binary register D, the doorway bit:

    tas():  if read(D) == 1: return 1
            run the chain; on winning return 0
            on losing: write D := 1; return 1

The doorway serializes late arrivals behind the winner; the history checker
validates the construction rather than trusting it.

Total register count: 6*ell(n) + 2 (chain snapshot plus doorway).
"""

from __future__ import annotations

import numpy as np

from .atomic import AtomicStore, register_program
from .shm import Memory, StepMachine
from .sifter import (
    LOSE,
    WIN,
    B_EMPTY,
    SifterLogic,
    make_codec,
    value_bits,
)
from .snapshot import BoundedSnapshot

# Solo snapshot-op bound for one sifter from any reachable configuration
# (a fresh solo compete takes exactly 12; the worst reachable case measured
# is 16, asserted with headroom at 20).
S_MAX = 20


def f(k: int) -> int:
    """Winner bound of one sifter with k participants."""
    return (2 * k + 1) // 3


def f_iter(n: int, times: int) -> int:
    v = n
    for _ in range(times):
        v = f(v)
    return v


def floor_log32(n: int) -> int:
    """Largest i >= 0 with (3/2)**i <= n, in exact integer arithmetic."""
    if n < 1:
        raise ValueError("n must be >= 1")
    i = 0
    p3, p2 = 3, 2
    while p3 <= n * p2:
        i += 1
        p3 *= 3
        p2 *= 2
    return i


def ceil_log32(n: int) -> int:
    """Smallest i >= 0 with (3/2)**i >= n."""
    # (3/2)**i is non-integral for i >= 1, so equality only happens at n=1
    return 0 if n == 1 else floor_log32(n) + 1


def ell(n: int) -> int:
    """Number of chained sifter levels used for n processes."""
    return floor_log32(n) + 1


def snapshot_register_count(n: int) -> int:
    return 6 * ell(n) + 1


def register_count(n: int) -> int:
    """Registers of the full TAS object: chain snapshot plus doorway bit."""
    return 6 * ell(n) + 2


def max_register_width(n: int) -> int:
    """Widest register in the layout (a snapshot cell)."""
    pb = n.bit_length()
    return value_bits(n) + pb + 1


def solo_step_bound(n: int) -> int:
    """Register steps a solo run needs from any reachable configuration.

    Per level at most S_MAX snapshot operations, each at most one scan over
    all 6*ell components (4M+3 register steps from a reachable state), plus
    the two doorway accesses.
    """
    m = 6 * ell(n)
    return S_MAX * ell(n) * (4 * m + 3) + 2


def repeated_log_holds(limit: int = 10**6) -> bool:
    """Check f_iter(n, ceil_log32(n)) == 1 for every 1 <= n <= limit.

    Vectorized: after i applications of f, every n with ceil_log32(n) <= i
    (i.e. n <= floor((3/2)**i)) must have reached 1, and f(1) = 1 keeps it
    there.
    """
    arr = np.arange(1, limit + 1, dtype=np.int64)
    p3, p2 = 1, 1
    while True:
        bound = p3 // p2
        hi = min(bound, limit)
        if hi >= 1 and not bool(np.all(arr[:hi] == 1)):
            return False
        if bound >= limit:
            return True
        arr = (2 * arr + 1) // 3
        p3 *= 3
        p2 *= 2


# ---------------------------------------------------------------------------
# logic machines


class WleChainLogic(SifterLogic):
    """Weak leader election: compete through sifter levels 1..ell.

    A win at level j < ell restarts the sifter logic on the next level's
    six components; a win at level ell, or a loss anywhere, is final.
    """

    FIELDS = SifterLogic.FIELDS + ("level", "ell")

    def __init__(self, pid: int, ell_levels: int):
        self.level = 1
        self.ell = ell_levels
        super().__init__(pid, base=0)

    def _finish(self, outcome: str) -> None:
        if outcome == WIN and self.level < self.ell:
            self.level += 1
            self._start_level(6 * (self.level - 1))
        else:
            self._conclude(outcome)

    def _conclude(self, outcome: str) -> None:
        self.done = True
        self.result = outcome


class TasLogic(WleChainLogic):
    """Doorway bit around the chain; results are the test-and-set bit."""

    op_name = "tas"

    def __init__(self, pid: int, n: int):
        super().__init__(pid, ell(n))
        self.stage = "dr"
        self.op = ("r", 0)

    def advance(self, res) -> None:
        if self.stage == "dr":
            if res == 1:
                self.done = True
                self.result = 1
            else:
                self._start_level(0)
        elif self.stage == "dw":
            self.done = True
            self.result = 1
        else:
            super().advance(res)

    def _conclude(self, outcome: str) -> None:
        if outcome == WIN:
            self.done = True
            self.result = 0
        else:
            self.stage = "dw"
            self.op = ("w", 0, 1)


# ---------------------------------------------------------------------------
# builders: coarse-grained (atomic snapshot ops)


def _chain_init(levels: int) -> list:
    return ([None] * 3 + [B_EMPTY] * 3) * levels


def wle_store(n: int) -> AtomicStore:
    return AtomicStore(6 * ell(n), init=_chain_init(ell(n)))


def wle_machines(n: int, pids=None) -> list[WleChainLogic]:
    return [WleChainLogic(p, ell(n)) for p in (pids if pids is not None else range(n))]


def tas_store(n: int) -> AtomicStore:
    return AtomicStore(6 * ell(n), init=_chain_init(ell(n)), n_regs=1)


def tas_machines(n: int, pids=None) -> list[TasLogic]:
    return [TasLogic(p, n) for p in (pids if pids is not None else range(n))]


# ---------------------------------------------------------------------------
# builders: register level


def chain_snapshot(n: int, base: int = 0) -> BoundedSnapshot:
    return BoundedSnapshot(base, 6 * ell(n), n, value_bits(n))


def tas_register_widths(n: int) -> list[int]:
    return [1] + chain_snapshot(n, base=1).register_widths()


def tas_system(n: int, pids=None, record_trace: bool = False):
    """Register-level TAS: (machines, memory, snapshot, logics).

    Layout: register 0 is the doorway bit; registers 1..6*ell+1 are the
    chain snapshot (cells then handshake).
    """
    if pids is None:
        pids = range(n)
    snap = chain_snapshot(n, base=1)
    memory = Memory(tas_register_widths(n), record_trace=record_trace)
    encode, decode = make_codec(n)
    logics = [TasLogic(p, n) for p in pids]
    machines = [
        StepMachine(
            lg.pid,
            register_program(lg, snap, encode=encode, decode=decode),
            auto_history=False,
        )
        for lg in logics
    ]
    return machines, memory, snap, logics


def wle_system(n: int, pids=None, record_trace: bool = False):
    """Register-level chain without the doorway (weak leader election)."""
    if pids is None:
        pids = range(n)
    snap = chain_snapshot(n, base=0)
    memory = Memory(snap.register_widths(), record_trace=record_trace)
    encode, decode = make_codec(n)
    logics = [WleChainLogic(p, ell(n)) for p in pids]
    machines = [
        StepMachine(
            lg.pid,
            register_program(lg, snap, encode=encode, decode=decode),
            auto_history=False,
        )
        for lg in logics
    ]
    return machines, memory, snap, logics
