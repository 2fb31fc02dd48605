"""Space-efficient obstruction-free test-and-set over simulated shared
registers, with deterministic schedule exploration and history checking."""

from .shm import (
    READ,
    WRITE,
    Configuration,
    Event,
    History,
    Memory,
    NativeMemory,
    OpRecord,
    RegisterWidthError,
    Schedule,
    StepMachine,
    export_trace_jsonl,
    freeze_prefix,
    make_schedule,
    run,
    run_live_uniform,
    run_native,
)
from .atomic import (
    AtomicStore,
    LogicMachine,
    explore,
    explore_interleavings,
    register_program,
    run_atomic,
    run_atomic_solo,
)
from .snapshot import BoundedSnapshot, ops_program
from .sifter import (
    LOSE,
    WIN,
    NaiveSifterLogic,
    SifterLogic,
    make_codec,
    sifter_machines,
    sifter_snapshot,
    sifter_store,
    sifter_system,
    value_bits,
)
from .tas_det import (
    S_MAX,
    TasLogic,
    WleChainLogic,
    ceil_log32,
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
from .randomized import CountingRng, HeadsRng, TailsRng, wrap, wrapped_tas_system
from .tas_rand import CONTINUE, PipelineParams, RandTas, gw_steps, pipeline_params, split_steps
from .verify import (
    SearchBudgetExceeded,
    SnapshotSequential,
    SoloProbeReport,
    TasSequential,
    Verdict,
    check_linearizable,
    check_tas,
    outcome_counts,
    probe_solo,
)

__version__ = "0.1.0"
