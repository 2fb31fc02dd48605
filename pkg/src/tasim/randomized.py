"""Randomized wait-freedom for deterministic obstruction-free programs.

An obstruction-free program with solo step bound b finishes whenever it gets
b consecutive steps without interference.  Wrapping every process the same
way manufactures such windows under any schedule fixed in advance: before
its first step and then every b steps, a process tosses a coin that comes up
heads with probability 1/n.  On heads its next b steps are the program's
real steps; on tails they are dummy reads of one fixed register.  A block in
which one process drew heads and every potentially overlapping process drew
tails is an unobstructed solo window, and blocks are cheap enough that such
windows arrive after polynomially many steps with high probability.

The wrapper changes nothing else: it touches exactly the wrapped program's
registers (dummies are reads), and a process whose coins are all heads
behaves step-for-step like the unwrapped program.

Against an adaptive scheduler this argument breaks down (the scheduler could
starve whoever draws heads), which is why schedules here are materialized
before any coin is drawn.
"""

from __future__ import annotations

import random
from typing import Optional

from .shm import READ, WRITE, Memory, StepMachine


def wrap(inner, n: int, b: int, rng, dummy_reg: int = 0):
    """Wrap a register-level program generator; see the module docstring.

    `rng` needs one method, randrange(n); a draw of 0 is heads.  The
    generator yields exactly one shared op per wrapped step (bookkeeping
    yields pass through unchanged and uncounted) and returns the inner
    program's return value.
    """
    if n < 1 or b < 1:
        raise ValueError("n and b must be positive")
    steps = 0
    actual = False
    try:
        item = inner.send(None)
    except StopIteration as e:
        return e.value
    while True:
        if item[0] not in (READ, WRITE):
            yield item
            try:
                item = inner.send(None)
            except StopIteration as e:
                return e.value
            continue
        if steps % b == 0:
            actual = rng.randrange(n) == 0
        steps += 1
        if actual:
            res = yield item
            try:
                item = inner.send(res)
            except StopIteration as e:
                return e.value
        else:
            yield (READ, dummy_reg)


def wrapped_tas_system(n: int, b: Optional[int] = None, seed: int = 0, coin_rngs=None):
    """The deterministic TAS with every process wrapped; the flagship use.

    Returns (machines, memory, logics).  `b` defaults to the registered solo
    step bound; `coin_rngs` (pid -> rng) overrides the seeded per-process
    coin streams, e.g. with HeadsRng for the degenerate-coin checks.
    """
    from .atomic import register_program
    from .sifter import make_codec
    from .tas_det import TasLogic, chain_snapshot, solo_step_bound, tas_register_widths

    if b is None:
        b = solo_step_bound(n)
    snap = chain_snapshot(n, base=1)
    memory = Memory(tas_register_widths(n))
    encode, decode = make_codec(n)
    logics = [TasLogic(p, n) for p in range(n)]
    machines = []
    for lg in logics:
        inner = register_program(lg, snap, encode=encode, decode=decode)
        rng = coin_rngs[lg.pid] if coin_rngs else random.Random(f"coin:{seed}:{lg.pid}")
        machines.append(
            StepMachine(
                lg.pid, wrap(inner, n, b, rng, dummy_reg=0), auto_history=False
            )
        )
    return machines, memory, logics


class HeadsRng:
    """Stub coin: always heads (the wrapped run equals the unwrapped one)."""

    def randrange(self, n: int) -> int:
        return 0


class TailsRng:
    """Stub coin: always tails (the inner program never advances)."""

    def randrange(self, n: int) -> int:
        return n - 1 if n > 1 else 0


class CountingRng:
    """Wraps an rng and counts draws; used to audit coin/schedule ordering."""

    def __init__(self, rng):
        self.rng = rng
        self.draws = 0

    def randrange(self, n: int) -> int:
        self.draws += 1
        return self.rng.randrange(n)
