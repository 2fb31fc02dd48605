"""Sifter chain: level math, leader election, doorway, step/space bounds."""

import random
from fractions import Fraction

import pytest

from tasim.atomic import explore, run_atomic, run_atomic_solo
from tasim.shm import History, make_schedule, run
from tasim.sifter import LOSE, WIN
from tasim.tas_det import (
    S_MAX,
    TasLogic,
    WleChainLogic,
    ceil_log32,
    chain_snapshot,
    ell,
    f,
    f_iter,
    floor_log32,
    max_register_width,
    register_count,
    repeated_log_holds,
    snapshot_register_count,
    solo_step_bound,
    tas_machines,
    tas_register_widths,
    tas_store,
    tas_system,
    wle_machines,
    wle_store,
    wle_system,
)
from tasim.verify import check_tas, outcome_counts, probe_solo


def test_f_values():
    assert [f(k) for k in (1, 2, 3, 4, 5, 6, 9)] == [1, 1, 2, 3, 3, 4, 6]
    assert f_iter(9, 6) == 1
    assert f_iter(10**6, ceil_log32(10**6)) == 1


def test_log32_against_fraction_oracle():
    for n in list(range(1, 600)) + [10**4, 10**6]:
        i = floor_log32(n)
        assert Fraction(3, 2) ** i <= n < Fraction(3, 2) ** (i + 1)
        c = ceil_log32(n)
        assert Fraction(3, 2) ** c >= n
        if c:
            assert Fraction(3, 2) ** (c - 1) < n


def test_level_and_register_counts():
    assert ell(1) == 1 and ell(2) == 2 and ell(3) == 3
    assert ell(8) == 6 and ell(64) == 11
    assert register_count(2) == 14
    assert register_count(8) == 38
    assert register_count(64) == 68  # = 6*floor_log32(64) + 8
    for n in (2, 8, 64, 1024):
        assert register_count(n) == 6 * floor_log32(n) + 8
        assert snapshot_register_count(n) == register_count(n) - 1
        widths = tas_register_widths(n)
        assert len(widths) == register_count(n)
        assert widths[0] == 1  # doorway bit
        assert widths[-1] == n.bit_length()  # handshake register
        assert max(widths) == max_register_width(n) == 5 * n.bit_length() + 1


def test_repeated_log_identity():
    assert repeated_log_holds(10**5)


def test_chain_restarts_on_fresh_components():
    m = WleChainLogic(0, 3)
    assert (m.level, m.base, m.op) == (1, 0, ("u", 0, 0))
    store = wle_store(3)
    run_atomic_solo(m, store, 50)
    assert m.result == WIN and m.level == 3
    # winner swept A of every level on its way up
    assert store.comps[0:3] == [0, 0, 0] and store.comps[6:9] == [0, 0, 0]


def test_wle_exhaustive_n2_exactly_one_leader():
    def make():
        return wle_machines(2), wle_store(2)

    terminals, states = explore(make)
    assert states > 0
    for res in terminals:
        assert sorted(res) == [LOSE, WIN]


def test_wle_random_schedules_exactly_one_leader():
    rng = random.Random(3)
    for trial in range(200):
        n = rng.randrange(2, 7)
        machines = wle_machines(n)
        store = wle_store(n)
        run_atomic(machines, store, [rng.randrange(n) for _ in range(30 * n)], record=False)
        for m in machines:
            if not m.done:
                run_atomic_solo(m, store, S_MAX * ell(n))
        assert sum(1 for m in machines if m.result == WIN) == 1, f"trial {trial}"


def test_solo_tas_atomic_op_count():
    for n, expect in ((2, 1 + 2 * 12), (8, 1 + 6 * 12)):
        m = TasLogic(0, n)
        taken = run_atomic_solo(m, tas_store(n), 200)
        assert m.result == 0 and taken == expect


def test_solo_tas_register_step_count():
    # 1 doorway read + per level: 6 two-step updates and 6 full-width scans
    for n in (2, 8):
        machines, memory, snap, logics = tas_system(n, pids=[0])
        m = machines[0]
        t = 0
        while not m.done and t < 10_000:
            m.step(memory, t, None)
            t += 1
        per_scan = 2 * (6 * ell(n)) + 2
        assert logics[0].result == 0
        assert m.steps == 1 + ell(n) * (12 + 6 * per_scan)
        assert m.steps <= solo_step_bound(n)


def test_tas_atomic_histories_check_out():
    rng = random.Random(17)
    for trial in range(150):
        n = rng.randrange(2, 9)
        machines = tas_machines(n)
        store = tas_store(n)
        h, t = run_atomic(machines, store, [rng.randrange(n) for _ in range(25 * n)])
        for m in machines:
            if not m.done:
                h, t = run_atomic(machines, store, [m.pid] * (S_MAX * ell(n) + 2), history=h, start_t=t)
        assert all(m.done for m in machines)
        c = outcome_counts(h)
        assert c[0] == 1 and c[1] == n - 1
        v = check_tas(h)
        assert v.ok, v.reason


def test_late_arrival_loses_through_chain_then_doorway():
    machines = tas_machines(3)
    store = tas_store(3)
    # pids 0 and 1 finish completely before pid 2 takes its first step
    h, t = run_atomic(machines, store, [0] * 80 + [1] * 80)
    done_two = [m for m in machines if m.pid < 2]
    assert all(m.done for m in done_two)
    assert store.regs[0] == 1  # the chain loser marked the doorway
    late = machines[2]
    h, t = run_atomic(machines, store, [2] * 5, history=h, start_t=t)
    assert late.done and late.result == 1 and late.steps == 1  # doorway read
    assert check_tas(h).ok


def test_doorway_bit_is_monotone_and_single_width():
    machines, memory, snap, logics = tas_system(3, record_trace=True)
    run(machines, memory, make_schedule("random", 3, 400, seed=8), record=False)
    for m in machines:
        if not m.done:
            run(machines, memory, [m.pid] * solo_step_bound(3), record=False)
    assert all(m.done for m in machines)
    writes = [e for e in memory.trace if e[2] == "W" and e[3] == 0]
    assert writes and all(e[4] == 1 for e in writes)
    assert memory.widths[0] == 1


def test_register_level_outcomes_and_histories():
    for seed in range(25):
        n = 3
        machines, memory, snap, logics = tas_system(n)
        h = History()
        run(machines, memory, make_schedule("random", n, 500, seed=seed), history=h)
        t = 500
        for m in machines:
            if not m.done:
                run(machines, memory, [m.pid] * solo_step_bound(n), history=h, start_t=t)
                t += solo_step_bound(n)
        assert all(m.done for m in machines)
        results = sorted(lg.result for lg in logics)
        assert results == [0, 1, 1]
        assert check_tas(h).ok


def test_solo_resume_stays_within_step_bound():
    n = 4
    bound = solo_step_bound(n)

    def factory(rng):
        machines, memory, snap, logics = tas_system(n)

        def runner(ms, target, pids):
            run(ms, target, pids, record=False)

        return machines, memory, runner

    rep = probe_solo(factory, samples=150, bound=bound, seed=9, prefix_max=800)
    assert rep.ok, rep.violations[:3]
    assert rep.max_steps <= bound
