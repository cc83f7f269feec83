import json

import pytest

from semsched.batching import Batch, BatchKind
from semsched.costs import (
    decode_step_time,
    decode_total_time,
    get_profile,
    prefill_time,
    reload_time,
)
from semsched.engine import (
    EventKind,
    Policy,
    ScenarioConfig,
    batch_duration,
    run,
)
from semsched.predictors import PredictorConfig
from semsched.requests import Stage
from semsched.workload import WorkloadSpec

from conftest import make_request


def scenario(**kw):
    defaults = dict(
        policy=Policy.SEMANTIC,
        profile="a100_qwen7b",
        batch_size=4,
        workload=WorkloadSpec(total_requests=0),
        predictor=PredictorConfig(),
    )
    defaults.update(kw)
    return ScenarioConfig(**defaults)


def fresh(rid, arrival, urgency, prompt_len=50, output_len=10):
    r = make_request(rid=rid, arrival=arrival, urgency=urgency,
                     prompt_len=prompt_len, output_len=output_len)
    r.f_e = None
    r.predicted_bucket = None
    return r


class TestBatchDuration:
    def test_pure_prefill(self, a100_7b):
        r = make_request(prompt_len=100)
        d = batch_duration(Batch(BatchKind.PREFILL, [r]), a100_7b)
        assert d == pytest.approx(prefill_time(100, a100_7b))

    def test_prefill_with_reload(self, a100_7b):
        r = make_request(prompt_len=100)
        r.kv_host_tokens = 30
        d = batch_duration(Batch(BatchKind.PREFILL, [r]), a100_7b)
        assert d == pytest.approx(prefill_time(100, a100_7b) + reload_time(30, a100_7b))

    def test_decode_max_vs_sum(self, a100_7b):
        rs = []
        for rid, n in ((1, 50), (2, 200)):
            r = make_request(rid=rid, prompt_len=n, stage=Stage.DECODING)
            r.decoded_tokens = 5
            rs.append(r)
        steps = [decode_step_time(n + 5 + 1, 1, a100_7b) for n in (50, 200)]
        b = Batch(BatchKind.DECODE, rs)
        assert batch_duration(b, a100_7b, "max") == pytest.approx(max(steps))
        assert batch_duration(b, a100_7b, "sum") == pytest.approx(sum(steps))

    def test_empty_batch_rejected(self, a100_7b):
        with pytest.raises(ValueError):
            batch_duration(Batch(BatchKind.DECODE, []), a100_7b)


class TestSingleRequestIdentity:
    def test_finish_equals_closed_form(self, a100_7b):
        n, m, lat = 80, 12, 0.05
        r = fresh(0, 1.0, urgency=2, prompt_len=n, output_len=m)
        cfg = scenario(predictor=PredictorConfig(latency_s=lat))
        trace = run(cfg, [r])
        rec = trace.records[0]
        expected = 1.0 + lat + prefill_time(n, a100_7b) + decode_total_time(n, m, a100_7b)
        assert rec.finish_time == pytest.approx(expected, rel=1e-12)
        assert rec.generated_tokens == m
        assert rec.first_scheduled == pytest.approx(1.0 + lat)

    def test_holds_across_policies(self, a5000_7b):
        for policy in Policy:
            r = fresh(0, 0.0, urgency=1, prompt_len=40, output_len=7)
            cfg = scenario(policy=policy, profile="a5000_qwen7b")
            trace = run(cfg, [r])
            expected = prefill_time(40, a5000_7b) + decode_total_time(40, 7, a5000_7b)
            assert trace.records[0].finish_time == pytest.approx(expected, rel=1e-12)


class TestPreemption:
    def test_semantic_preempts_for_urgent_arrival(self, a100_7b):
        low = fresh(0, 0.0, urgency=4, prompt_len=50, output_len=400)
        hi = fresh(1, 0.5, urgency=0, prompt_len=50, output_len=20)
        trace = run(scenario(batch_size=1), [low, hi])
        recs = {r.id: r for r in trace.records}
        assert recs[1].finish_time < recs[0].finish_time
        # The urgent request runs as soon as an iteration boundary allows.
        assert recs[1].first_scheduled < 1.0

    def test_fcfs_never_preempts(self):
        low = fresh(0, 0.0, urgency=4, prompt_len=50, output_len=400)
        hi = fresh(1, 0.5, urgency=0, prompt_len=50, output_len=20)
        trace = run(scenario(policy=Policy.FCFS, batch_size=1), [low, hi])
        recs = {r.id: r for r in trace.records}
        assert recs[0].finish_time < recs[1].finish_time
        assert recs[1].first_scheduled >= recs[0].finish_time - 1e-9

    def test_sjf_prefers_short_job(self):
        long_ = fresh(0, 0.0, urgency=0, prompt_len=50, output_len=400)
        short = fresh(1, 0.0, urgency=4, prompt_len=50, output_len=5)
        trace = run(scenario(policy=Policy.SJF, batch_size=1), [long_, short])
        recs = {r.id: r for r in trace.records}
        assert recs[1].finish_time < recs[0].finish_time

    def test_hpjf_prefers_urgent_job(self):
        long_hi = fresh(0, 0.0, urgency=0, prompt_len=50, output_len=400)
        short_low = fresh(1, 0.0, urgency=4, prompt_len=50, output_len=5)
        trace = run(scenario(policy=Policy.HPJF, batch_size=1), [long_hi, short_low])
        recs = {r.id: r for r in trace.records}
        assert recs[0].finish_time < recs[1].finish_time


class TestRunLoop:
    def test_empty_workload(self):
        trace = run(scenario())
        assert trace.records == []
        assert [e.kind for e in trace.events] == [EventKind.RUN_END]
        assert trace.events[0].time == 0.0

    def test_generated_workload_completes(self):
        cfg = scenario(workload=WorkloadSpec(total_requests=60, seed=5,
                                             output_len_range=(1, 40)),
                       batch_size=8)
        trace = run(cfg)
        assert len(trace.completed_records()) == 60
        assert trace.unservable == []
        for rec in trace.records:
            assert rec.finish_time >= rec.arrival_time
            assert rec.generated_tokens >= 1

    def test_determinism_of_event_stream(self):
        cfg = scenario(
            workload=WorkloadSpec(total_requests=40, seed=6, output_len_range=(1, 30)),
            predictor=PredictorConfig(latency_s=0.01, urgency_error=0.3,
                                      length_error=0.3),
            batch_size=4,
        )
        dumps = []
        for _ in range(2):
            trace = run(cfg)
            dumps.append(
                "\n".join(json.dumps(e.to_json_obj(), sort_keys=True)
                          for e in trace.events)
            )
        assert dumps[0] == dumps[1]

    def test_memory_never_exceeds_capacity(self):
        cap = 2000
        cfg = scenario(
            workload=WorkloadSpec(total_requests=80, seed=7,
                                  prompt_len_range=(16, 128),
                                  output_len_range=(1, 200)),
            memory_capacity=cap,
            batch_size=8,
        )
        trace = run(cfg)
        for ev in trace.events:
            if ev.kind is EventKind.ITERATION_END:
                assert ev.payload["mem_used"] <= cap
        finished = {r.id for r in trace.completed_records()}
        assert finished | set(trace.unservable) == {r.id for r in trace.records}

    def test_eviction_under_pressure_still_completes(self):
        cfg = scenario(
            workload=WorkloadSpec(total_requests=60, seed=8,
                                  concurrent=10, gap_s=0.05,
                                  prompt_len_range=(64, 128),
                                  output_len_range=(50, 200)),
            memory_capacity=1500,
            batch_size=8,
        )
        trace = run(cfg)
        assert trace.eviction_count > 0
        assert len(trace.completed_records()) + len(trace.unservable) == 60

    def test_oversized_request_reported_unservable(self):
        big = fresh(0, 0.0, urgency=0, prompt_len=500, output_len=5)
        ok = fresh(1, 0.0, urgency=1, prompt_len=50, output_len=5)
        trace = run(scenario(memory_capacity=200), [big, ok])
        assert trace.unservable == [0]
        assert trace.records[1].finish_time is not None

    def test_config_validation(self):
        with pytest.raises(ValueError):
            scenario(batch_size=0)
        with pytest.raises(ValueError):
            scenario(decode_batch_cost="median")
