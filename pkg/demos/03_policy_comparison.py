"""Compare scheduling policies under a burst of arrivals.

Replays the same heavy workload under the priority-aware policy and the
three baselines, then tabulates how long the most urgent requests wait
per generated token under each.
"""

from semsched import (
    Policy,
    PredictorConfig,
    ScenarioConfig,
    WorkloadSpec,
    normalized_waiting_time,
    overall_normalized_waiting_time,
    run,
)


def main() -> None:
    workload = WorkloadSpec(total_requests=500, gap_s=0.1, concurrent=100,
                            concurrent_mode="fixed", seed=5,
                            output_len_range=(1, 300))
    print(f"{'policy':10s} {'urgency-0 s/tok':>16s} {'overall s/tok':>14s}")
    for policy in (Policy.SEMANTIC, Policy.HPJF, Policy.SJF, Policy.FCFS):
        cfg = ScenarioConfig(
            policy=policy,
            profile="a100_qwen4b_adjusted",
            batch_size=16,
            workload=workload,
            predictor=PredictorConfig(),
            seed=5,
        )
        trace = run(cfg)
        print(f"{policy.value:10s} "
              f"{normalized_waiting_time(trace, 0):16.4f} "
              f"{overall_normalized_waiting_time(trace):14.4f}")


if __name__ == "__main__":
    main()
