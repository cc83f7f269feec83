import pytest

from semsched.costs import estimate_remaining_time, get_profile
from semsched.heaps import DispatchQueue, EvictionQueue
from semsched.kvcache import (
    AdmissionFailure,
    DeviceMemory,
    estimate_kv_size,
    priority_based_eviction,
    should_recompute,
)
from semsched.requests import Stage

from conftest import make_request


def resident_request(rid, urgency, prompt_len=100, decoded=20, f_t=5.0):
    r = make_request(rid=rid, urgency=urgency, prompt_len=prompt_len,
                     output_len=50, bucket_mid=50, f_t=f_t)
    r.stage = Stage.DECODING
    r.prefilled_tokens = prompt_len
    r.decoded_tokens = decoded
    r.kv_device_tokens = prompt_len + decoded
    return r


class TestEstimateKvSize:
    def test_fresh_request(self):
        assert estimate_kv_size(make_request(prompt_len=100, bucket_mid=50)) == 150

    def test_fully_resident_floors_at_zero(self):
        r = resident_request(1, 2, prompt_len=100, decoded=50)
        assert estimate_kv_size(r) == 0

    def test_partial_residency(self):
        r = resident_request(1, 2, prompt_len=100, decoded=0)
        assert estimate_kv_size(r) == 50


class TestShouldRecompute:
    def test_cheap_reload_offloads_everything(self):
        p = get_profile("a100_qwen7b")
        r = resident_request(1, 3, prompt_len=100, decoded=20)
        d = should_recompute(r, p)
        assert d.prefill_action == "offload"
        assert d.decode_saved == 20 and d.decode_discarded == 0
        assert r.kv_device_tokens == 0
        assert r.kv_host_tokens == 120
        assert r.stage is Stage.WAITING

    def test_a5000_short_prompt_discards_prefill(self):
        p = get_profile("a5000_qwen7b")
        r = resident_request(1, 3, prompt_len=1000, decoded=0)
        d = should_recompute(r, p)
        assert d.prefill_action == "discard"
        assert r.prefilled_tokens == 0
        assert r.stage is Stage.WAITING
        assert r.kv_host_tokens == 0

    def test_zero_decode_gives_empty_decode_decision(self):
        p = get_profile("a100_qwen7b")
        r = resident_request(1, 3, decoded=0)
        d = should_recompute(r, p)
        assert d.decode_saved == 0 and d.decode_discarded == 0

    def test_dependency_rule_drops_decode_with_prefill(self):
        p = get_profile("a5000_qwen7b")  # discard regime for short prompts
        r = resident_request(1, 3, prompt_len=500, decoded=30)
        d = should_recompute(r, p, dependency_rule=True)
        assert d.prefill_action == "discard"
        assert d.decode_saved == 0
        assert r.decoded_tokens == 0

    def test_literal_mode_keeps_decode_despite_discard(self):
        p = get_profile("a5000_qwen7b")
        r = resident_request(1, 3, prompt_len=500, decoded=30)
        d = should_recompute(r, p, dependency_rule=False)
        assert d.prefill_action == "discard"
        # beta_load << gamma2 on this profile, so decode KV is all saved
        assert d.decode_saved == 30
        assert r.kv_host_tokens == 30

    def test_f_t_never_decreases(self):
        p = get_profile("a100_qwen7b")
        r = resident_request(1, 3)
        r.f_t = estimate_remaining_time(r, p)
        before = r.f_t
        should_recompute(r, p)
        assert r.f_t >= before - 1e-12


class TestPriorityBasedEviction:
    def setup_state(self, victims):
        h, g = DispatchQueue(), EvictionQueue()
        mem = DeviceMemory(capacity=1000)
        for v in victims:
            h.insert(v)
            g.insert(v)
            mem.used += v.kv_device_tokens
        return h, g, mem

    def test_no_eviction_when_space_suffices(self):
        p = get_profile("a100_qwen7b")
        v = resident_request(1, 4)
        h, g, mem = self.setup_state([v])
        incoming = make_request(rid=9, urgency=0, prompt_len=50, bucket_mid=50)
        decisions = priority_based_eviction(incoming, g, h, mem, p)
        assert decisions == []
        assert len(g) == 1 and mem.used == 120

    def test_single_victim_requeued_with_larger_f_t(self):
        p = get_profile("a100_qwen7b")
        v = resident_request(1, 4, prompt_len=400, decoded=100)
        v.f_t = estimate_remaining_time(v, p)
        before = v.f_t
        h, g, mem = self.setup_state([v])
        incoming = make_request(rid=9, urgency=0, prompt_len=400, bucket_mid=150)
        decisions = priority_based_eviction(incoming, g, h, mem, p)
        assert [d.victim_id for d in decisions] == [1]
        assert v.id in h and v.id not in g
        assert v.f_t >= before
        assert mem.used == 0

    def test_victims_popped_in_reverse_priority_order(self):
        p = get_profile("a100_qwen7b")
        victims = [resident_request(i, u, prompt_len=60, decoded=10)
                   for i, u in enumerate([1, 4, 2, 3])]
        h, g, mem = self.setup_state(victims)
        mem.capacity = mem.used  # full
        incoming = make_request(rid=9, urgency=0, prompt_len=100, bucket_mid=150)
        decisions = priority_based_eviction(incoming, g, h, mem, p)
        urgencies = []
        by_id = {v.id: v for v in victims}
        for d in decisions:
            urgencies.append(by_id[d.victim_id].f_e.rank)
        assert urgencies == sorted(urgencies, reverse=True)

    def test_admission_failure_leaves_heaps_consistent(self):
        p = get_profile("a100_qwen7b")
        v = resident_request(1, 4, prompt_len=60, decoded=10)
        h, g, mem = self.setup_state([v])
        mem.capacity = 100
        incoming = make_request(rid=9, urgency=0, prompt_len=500, bucket_mid=450)
        with pytest.raises(AdmissionFailure):
            priority_based_eviction(incoming, g, h, mem, p)
        h.check_invariants()
        g.check_invariants()
        assert mem.used <= mem.capacity

    def test_protected_ids_skipped(self):
        p = get_profile("a100_qwen7b")
        low = resident_request(1, 4, prompt_len=60, decoded=10)
        mid = resident_request(2, 3, prompt_len=60, decoded=10)
        h, g, mem = self.setup_state([low, mid])
        mem.capacity = mem.used
        incoming = make_request(rid=9, urgency=0, prompt_len=30, bucket_mid=20)
        decisions = priority_based_eviction(
            incoming, g, h, mem, p, protected={low.id}
        )
        assert [d.victim_id for d in decisions] == [2]
        assert low.id in g  # reinserted after being skipped

    def test_memory_conservation(self):
        p = get_profile("a100_qwen7b")
        victims = [resident_request(i, 4, prompt_len=80, decoded=20) for i in range(5)]
        h, g, mem = self.setup_state(victims)
        mem.capacity = mem.used + 50
        incoming = make_request(rid=9, urgency=0, prompt_len=200, bucket_mid=150)
        priority_based_eviction(incoming, g, h, mem, p)
        assert mem.used == sum(v.kv_device_tokens for v in victims)
        assert mem.used <= mem.capacity


class TestDeviceMemory:
    def test_bounds(self):
        mem = DeviceMemory(10)
        mem.allocate(10)
        with pytest.raises(AdmissionFailure):
            mem.allocate(1)
        mem.release(10)
        with pytest.raises(ValueError):
            mem.release(1)
