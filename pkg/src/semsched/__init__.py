"""semsched: priority-aware scheduling for LLM-serving workloads with a
deterministic discrete-event simulator."""

from .batching import Batch, BatchKind, extract_top_b, stage_aware_schedule
from .config import ConfigError, load_scenario, scenario_from_dict, scenario_to_dict
from .costs import (
    BUILTIN_PROFILES,
    GpuProfile,
    decode_step_time,
    decode_total_time,
    estimate_remaining_time,
    get_profile,
    optimal_save_tokens,
    prefill_time,
    reload_time,
    resume_cost,
    should_cache_prefill,
)
from .engine import Event, EventKind, Policy, ScenarioConfig, Simulator, Trace, run
from .heaps import ArrivalBuffer, DispatchQueue, EvictionQueue, IndexedMinHeap
from .kvcache import (
    AdmissionFailure,
    DeviceMemory,
    EvictionDecision,
    estimate_kv_size,
    priority_based_eviction,
    should_recompute,
)
from .metrics import (
    RunReport,
    average_waiting_time,
    build_report,
    constraint_audit,
    normalized_waiting_time,
    overall_normalized_waiting_time,
)
from .predictors import (
    ErrorModel,
    PredictorConfig,
    Strategy,
    predict_length_bucket,
    predict_urgency,
    predictor_pipeline,
)
from .requests import (
    LengthBucket,
    PriorityKey,
    Request,
    Stage,
    UrgencyLevel,
    eviction_priority,
    obtain_priority,
)
from .sweeps import run_scenario, sweep
from .workload import DatasetRecord, WorkloadSpec, bucketize, generate, load_dataset

__version__ = "0.1.0"
