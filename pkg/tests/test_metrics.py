import pytest

from semsched.engine import RequestRecord, Trace
from semsched.metrics import (
    AbsentLevelError,
    IncompleteTraceError,
    average_waiting_time,
    build_report,
    constraint_audit,
    emit_csv,
    normalized_waiting_time,
    overall_normalized_waiting_time,
    parse_csv,
    report_rows,
)


def record(rid, arrival, finish, tokens=10, urgency=0, predicted=None):
    return RequestRecord(
        id=rid,
        arrival_time=arrival,
        prediction_ready=arrival,
        first_scheduled=arrival,
        finish_time=finish,
        generated_tokens=tokens,
        evictions=0,
        true_urgency=urgency,
        predicted_urgency=urgency if predicted is None else predicted,
        prompt_len=10,
    )


def make_trace(records, unservable=()):
    t = Trace()
    t.records = list(records)
    t.unservable = list(unservable)
    return t


class TestWaitingTimes:
    def test_average(self):
        t = make_trace([record(0, 0.0, 2.0), record(1, 1.0, 5.0)])
        assert average_waiting_time(t) == pytest.approx(3.0)

    def test_normalized_per_level(self):
        t = make_trace([
            record(0, 0.0, 2.0, tokens=4, urgency=0),
            record(1, 0.0, 4.0, tokens=2, urgency=0),
            record(2, 0.0, 9.0, tokens=3, urgency=1),
        ])
        assert normalized_waiting_time(t, 0) == pytest.approx((0.5 + 2.0) / 2)
        assert normalized_waiting_time(t, 1) == pytest.approx(3.0)
        assert overall_normalized_waiting_time(t) == pytest.approx((0.5 + 2.0 + 3.0) / 3)

    def test_absent_level(self):
        t = make_trace([record(0, 0.0, 1.0, urgency=0)])
        with pytest.raises(AbsentLevelError):
            normalized_waiting_time(t, 3)

    def test_incomplete_trace_rejected(self):
        t = make_trace([record(0, 0.0, None)])
        with pytest.raises(IncompleteTraceError):
            average_waiting_time(t)

    def test_unservable_excused(self):
        t = make_trace([record(0, 0.0, 2.0), record(1, 0.0, None)], unservable=[1])
        assert average_waiting_time(t) == pytest.approx(2.0)


class TestConstraintAudit:
    def test_clean_sequential_run(self):
        # Strictly decreasing urgency ranks finishing in order: no violations.
        t = make_trace([
            record(0, 0.0, 1.0, urgency=0),
            record(1, 0.0, 2.0, urgency=1),
            record(2, 0.0, 3.0, urgency=2),
        ])
        violations, rate = constraint_audit(t)
        assert violations == [] and rate == 0.0

    def test_inversion_detected(self):
        # The less urgent request finishes first while the urgent one waits.
        t = make_trace([
            record(0, 0.0, 5.0, urgency=3),
            record(1, 0.0, 9.0, urgency=0),
        ])
        violations, rate = constraint_audit(t)
        assert violations == [(0, 1)]
        assert rate == 1.0

    def test_disjoint_in_time_is_excused(self):
        # Low-urgency work that finished before the urgent request even
        # arrived does not count against the scheduler.
        t = make_trace([
            record(0, 0.0, 1.0, urgency=3),
            record(1, 2.0, 3.0, urgency=0),
        ])
        violations, _ = constraint_audit(t)
        assert violations == []

    def test_equal_rank_never_violates(self):
        t = make_trace([
            record(0, 0.0, 5.0, urgency=2),
            record(1, 0.0, 9.0, urgency=2),
        ])
        assert constraint_audit(t)[0] == []

    def test_predicted_ranking_mode(self):
        t = make_trace([
            record(0, 0.0, 5.0, urgency=3, predicted=0),
            record(1, 0.0, 9.0, urgency=0, predicted=3),
        ])
        assert constraint_audit(t, "true")[0] == [(0, 1)]
        assert constraint_audit(t, "predicted")[0] == []

    def test_bad_ranking_rejected(self):
        with pytest.raises(ValueError):
            constraint_audit(make_trace([]), "oracle")


class TestReportAndCsv:
    def trace(self):
        return make_trace([
            record(0, 0.0, 2.0, tokens=4, urgency=0),
            record(1, 0.0, 4.0, tokens=2, urgency=1),
            record(2, 0.0, 8.0, tokens=2, urgency=1),
        ])

    def test_build_report_values(self):
        rep = build_report(self.trace(), "semantic", "a100_qwen7b", seed=7)
        assert rep.per_urgency_norm_wait[0] == pytest.approx(0.5)
        assert rep.per_urgency_norm_wait[1] == pytest.approx(3.0)
        assert rep.avg_wait_s == pytest.approx(14.0 / 3)
        assert rep.overall_norm_wait_level_avg == pytest.approx(1.75)
        assert rep.violations == 0

    def test_json_round_trip_keys(self):
        rep = build_report(self.trace(), "fcfs", "a5000_qwen7b", seed=1)
        obj = rep.to_json_obj()
        assert obj["policy"] == "fcfs"
        assert set(obj["per_urgency_norm_wait"]) == {"0", "1"}

    def test_csv_round_trip(self):
        rep = build_report(self.trace(), "semantic", "a100_qwen7b", seed=7)
        rows = report_rows(rep, axis="predictor.urgency_error", axis_value="0.3")
        text = emit_csv(rows)
        assert text.splitlines()[0] == (
            "policy,profile,axis,axis_value,urgency,norm_wait_s_per_tok,"
            "avg_wait_s,violations,evictions,seed"
        )
        parsed = parse_csv(text)
        assert len(parsed) == 2
        assert parsed[0]["urgency"] == 0
        assert parsed[0]["norm_wait_s_per_tok"] == pytest.approx(0.5)
        assert parsed[1]["axis"] == "predictor.urgency_error"
        assert parsed[1]["seed"] == 7

    def test_csv_floats_survive_exactly(self):
        rep = build_report(self.trace(), "semantic", "p", seed=0)
        rep.per_urgency_norm_wait[0] = 0.1 + 0.2  # not exactly 0.3
        rows = report_rows(rep)
        parsed = parse_csv(emit_csv(rows))
        assert parsed[0]["norm_wait_s_per_tok"] == 0.1 + 0.2
