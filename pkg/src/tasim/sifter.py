"""Obstruction-free sifter over a 6-component snapshot.

With k participants, at most floor((2k+1)/3) return "win" and at most k-1
return "lose" (never all lose), which is what makes chains of these objects
converge to a single leader.  Components 0..2 (the A array) hold process
ids; components 3..5 (the B array) hold (id, signature) pairs, where a
signature is the triple a process read from A.

compete():
    pos := 0
    loop:
        A[pos] := p;  a := scan(A)
        if a == (p,p,p): return win                   (clean sweep)
        if some q has more copies in a than p: return lose
        if p appears exactly once in a:
            if knockout(a): return lose
        pos := the index with a[pos] != p and a[(pos-1) mod 3] == p

knockout(sig):
    index := 0
    loop:
        B[index] := (p, sig);  (a", b") := scan(A, B)
        if a" != sig: return True                     (A moved on)
        if some q != p has (q, sig) twice in b": return True
        if b" == ((p,sig),(p,sig),(p,sig)): return False
        index := some index with b"[index] != (p, sig)

The knockout subprotocol is what caps the number of winners: of the
processes that saw the same signature with their id appearing once, at most
one can sweep B before A changes.  A process running alone from any
reachable point finishes within a constant number of snapshot operations
(asserted as 20 in the tests); a fresh solo run takes exactly 12.

The A-array-only variant without knockout (``NaiveSifterLogic``) guarantees
at-least-one-winner but admits schedules where nearly everyone wins; it is
kept as a fixture demonstrating why the B phase is necessary.
"""

from __future__ import annotations

from typing import Optional

from .atomic import AtomicStore, LogicMachine, register_program
from .shm import Memory, StepMachine
from .snapshot import BoundedSnapshot

WIN = "win"
LOSE = "lose"

EMPTY_SIG = (None, None, None)
B_EMPTY = (None, EMPTY_SIG)


def _num(v, xs) -> int:
    return sum(1 for x in xs if x == v)


def _pos_rule(a: tuple, p: int) -> int:
    """The unique index with a[pos] != p and a[(pos-1) mod 3] == p."""
    cands = [i for i in range(3) if a[i] != p and a[(i - 1) % 3] == p]
    if len(cands) != 1:
        raise RuntimeError(f"pos rule ambiguous: a={a!r} p={p}: {cands}")
    return cands[0]


def _outnumbered(a: tuple, p: int) -> bool:
    mine = _num(p, a)
    return any(q is not None and q != p and _num(q, a) > mine for q in a)


class SifterLogic(LogicMachine):
    """One participant of one sifter instance.

    `base` offsets the six components into a larger shared snapshot, so
    several sifter levels can live in one object.  Snapshot ops are poised
    one at a time; stage tracks which response is expected next:
    'wa' write to A pending, 'sa' compete scan pending, 'kw' write to B
    pending, 'ks' knockout scan pending.
    """

    FIELDS = LogicMachine.FIELDS + ("base", "stage", "sig")
    op_name = "compete"

    def __init__(self, pid: int, base: int = 0):
        super().__init__(pid)
        self.base = base
        self.sig: Optional[tuple] = None
        self._start_level(base)

    def _start_level(self, base: int) -> None:
        self.base = base
        self.sig = None
        self.stage = "wa"
        self.op = ("u", base + 0, self.pid)

    def _finish(self, outcome: str) -> None:
        self.done = True
        self.result = outcome

    def advance(self, res) -> None:
        if self.done:
            raise RuntimeError("advance on finished machine")
        p = self.pid
        if self.stage == "wa":
            self.stage = "sa"
            self.op = ("s", self.base, self.base + 3)
        elif self.stage == "sa":
            a = res
            if _num(p, a) == 3:
                self._finish(WIN)
            elif _outnumbered(a, p):
                self._finish(LOSE)
            elif _num(p, a) == 1 and self._use_knockout():
                self.sig = a
                self.stage = "kw"
                self.op = ("u", self.base + 3, (p, a))
            else:
                self.stage = "wa"
                self.op = ("u", self.base + _pos_rule(a, p), p)
        elif self.stage == "kw":
            self.stage = "ks"
            self.op = ("s", self.base, self.base + 6)
        elif self.stage == "ks":
            a_hat, b_hat = res[0:3], res[3:6]
            mine = (p, self.sig)
            if a_hat != self.sig:
                self._finish(LOSE)
            elif any(
                q is not None and q != p and _num((q, self.sig), b_hat) >= 2
                for (q, _) in b_hat
            ):
                self._finish(LOSE)
            elif _num(mine, b_hat) == 3:
                # knockout survived; back to compete with pos from sig
                a = self.sig
                self.sig = None
                self.stage = "wa"
                self.op = ("u", self.base + _pos_rule(a, p), p)
            else:
                idx = min(i for i in range(3) if b_hat[i] != mine)
                self.stage = "kw"
                self.op = ("u", self.base + 3 + idx, mine)
        else:
            raise RuntimeError(f"bad stage {self.stage!r}")

    def _use_knockout(self) -> bool:
        return True


class NaiveSifterLogic(SifterLogic):
    """A-array-only variant: still never all-lose, but winners are unbounded.

    Test fixture only; see the module docstring.
    """

    def _use_knockout(self) -> bool:
        return False


# ---------------------------------------------------------------------------
# builders: coarse-grained (atomic snapshot ops)


def sifter_store(levels: int = 1) -> AtomicStore:
    init = ([None] * 3 + [B_EMPTY] * 3) * levels
    return AtomicStore(6 * levels, init=init)


def sifter_machines(pids) -> list[SifterLogic]:
    return [SifterLogic(p) for p in pids]


# ---------------------------------------------------------------------------
# builders: register level

# Component values are packed into integers field by field, each field wide
# enough for an id or the no-id marker: an A component is one field, a B
# component is four (id plus the three signature entries).


def _code(v: Optional[int]) -> int:
    return 0 if v is None else v + 1


def _uncode(c: int) -> Optional[int]:
    return None if c == 0 else c - 1


def make_codec(n: int):
    """(encode, decode) between component values and snapshot integers."""
    pb = n.bit_length()
    mask = (1 << pb) - 1

    def encode(comp: int, val) -> int:
        if comp % 6 < 3:
            return _code(val)
        vid, sig = val
        w = _code(vid)
        for s in sig:
            w = (w << pb) | _code(s)
        return w

    def decode(comp: int, w: int):
        if comp % 6 < 3:
            return _uncode(w)
        fields = []
        for _ in range(4):
            fields.append(_uncode(w & mask))
            w >>= pb
        fields.reverse()
        return (fields[0], tuple(fields[1:]))

    return encode, decode


def value_bits(n: int) -> int:
    """Width of one packed component value: four id-sized fields."""
    return 4 * n.bit_length()


def sifter_snapshot(n: int, base: int = 0, levels: int = 1) -> BoundedSnapshot:
    return BoundedSnapshot(base, 6 * levels, n, value_bits(n))


def sifter_system(
    n: int,
    pids=None,
    record_trace: bool = False,
    logic_cls=SifterLogic,
):
    """Register-level sifter: (machines, memory, snapshot, logics)."""
    if pids is None:
        pids = range(n)
    snap = sifter_snapshot(n)
    memory = snap.fresh_memory(record_trace=record_trace)
    encode, decode = make_codec(n)
    logics = [logic_cls(p) for p in pids]
    machines = [
        StepMachine(
            lg.pid,
            register_program(lg, snap, encode=encode, decode=decode),
            auto_history=False,
        )
        for lg in logics
    ]
    return machines, memory, snap, logics
