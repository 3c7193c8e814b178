import json

import numpy as np
import pytest

from panoexplore import eqa as Q
from panoexplore.errors import DomainError, UndefinedReportError
from panoexplore.suite import builtin_suite


@pytest.fixture(scope="module")
def suite():
    return builtin_suite()


@pytest.fixture(scope="module")
def single(suite):
    return [s for s in suite if s.category == "single-agent"]


@pytest.fixture(scope="module")
def multi(suite):
    return [s for s in suite if s.category == "multi-agent"]


class TestSuiteStructure:
    def test_sizes(self, single, multi):
        assert len(single) >= 20
        assert len(multi) >= 10

    def test_control_pairs_validate(self, suite):
        Q.check_control_pairs(suite)

    def test_control_pair_violation_detected(self, suite):
        # swap one occluder's size in one member of a pair: two keys now differ
        s = next(x for x in suite if x.control_pair and x.controlled_variable == "slot:east")
        doc = s.to_json()
        doc["scene"]["primitives"][0]["dimensions"] = [9.9, 9.9, 9.9]
        broken = Q.Scenario.from_json(doc)
        others = [x for x in suite if x.id != s.id] + [broken]
        with pytest.raises(DomainError):
            Q.check_control_pairs(others)

    def test_serialization_round_trip(self, suite, tmp_path):
        path = tmp_path / "suite.json"
        Q.save_scenarios(path, suite)
        again = Q.load_scenarios(path)
        assert [s.to_json() for s in again] == [s.to_json() for s in suite]

    def test_deterministic_generation(self, suite):
        again = builtin_suite()
        assert [s.to_json() for s in again] == [s.to_json() for s in suite]

    def test_four_choices_one_gold(self, suite):
        for s in suite:
            assert len(s.choices) == 4
            assert s.gold_choice in s.labels

    def test_sanitized_scene_hides_entities(self, suite):
        s = suite[0]
        clean = Q.sanitize_scene(s.scene)
        assert all(p.entity_tag is None or not Q._slot_linked(s.scene, p)
                   for p in clean.primitives)


class TestAgents:
    def test_omniscient_is_perfect(self, suite):
        records = Q.run_suite(suite, Q.OmniscientAgent(), "unimodal")
        assert Q.decision_accuracy(records) == 100.0
        assert Q.gold_action_confidence(records) == 100.0

    def test_random_agent_determinism(self, suite):
        a = Q.run_suite(suite, Q.RandomAgent(seed=5), "unimodal")
        b = Q.run_suite(suite, Q.RandomAgent(seed=5), "unimodal")
        assert [r.to_json() for r in a] == [r.to_json() for r in b]

    def test_random_agent_within_binomial_ci(self, suite):
        n = len(suite)
        ci = 100.0 * 1.96 * np.sqrt(0.25 * 0.75 / n)
        accs = [Q.decision_accuracy(Q.run_suite(suite, Q.RandomAgent(seed=s), "unimodal"))
                for s in range(10)]
        assert abs(np.mean(accs) - 25.0) < ci
        assert sum(abs(a - 25.0) <= ci for a in accs) >= 8  # ~95% coverage

    def test_rule_agent_mode_monotonicity(self, single):
        agent = Q.RuleAgent()
        acc = {mode: Q.decision_accuracy(Q.run_suite(single, agent, mode))
               for mode in Q.MODES}
        assert acc["unimodal"] <= acc["multimodal"] < acc["imagination"]
        assert acc["imagination"] == 100.0

    def test_imagination_strictly_helps(self, single):
        agent = Q.RuleAgent()
        multi_rec = Q.run_suite(single, agent, "multimodal")
        imag_rec = Q.run_suite(single, agent, "imagination")
        assert Q.decision_accuracy(imag_rec) > Q.decision_accuracy(multi_rec)

    def test_belief_agent_multi_agent_imagination(self, multi):
        records = Q.run_suite(multi, Q.BeliefAgent(), "imagination")
        assert Q.decision_accuracy(records) == 100.0

    def test_invalid_agent_response_filtered(self, single):
        class Broken(Q.AgentClient):
            def decide(self, view):
                return {"Z": 1.0}, "nope"

        records = Q.run_suite(single[:4], Broken(), "unimodal")
        assert all(not r.valid for r in records)
        with pytest.raises(UndefinedReportError):
            Q.decision_accuracy(records)

    def test_filtering_keeps_denominators_aligned(self, single):
        class Flaky(Q.AgentClient):
            def __init__(self):
                self.n = 0

            def decide(self, view):
                self.n += 1
                if self.n % 2 == 0:
                    return {"bogus": 1.0}, ""
                labels = view.scenario.labels
                return {l: (1.0 if l == view.scenario.gold_choice else 0.0)
                        for l in labels}, "gold"

        records = Q.run_suite(single[:6], Flaky(), "unimodal")
        valid = [r for r in records if r.valid]
        assert len(valid) == 3
        assert Q.decision_accuracy(records) == 100.0
        assert Q.gold_action_confidence(records) == 100.0


class TestMetrics:
    def test_all_correct(self, single):
        records = Q.run_suite(single, Q.OmniscientAgent(), "unimodal")
        assert Q.decision_accuracy(records) == 100.0
        assert Q.gold_action_confidence(records) == 100.0

    def test_uniform_confidence(self, single):
        class Uniform(Q.AgentClient):
            def decide(self, view):
                labels = view.scenario.labels
                return {l: 1.0 / len(labels) for l in labels}, "idk"

        records = Q.run_suite(single, Uniform(), "unimodal")
        assert Q.gold_action_confidence(records) == pytest.approx(25.0)

    def test_hand_computed_aggregates(self):
        records = [
            Q.ScenarioRecord("a", "single-agent", "unimodal", True, {"A": 0.7, "B": 0.3},
                             "A", True, "A", 0.7),
            Q.ScenarioRecord("b", "single-agent", "unimodal", True, {"A": 0.2, "B": 0.8},
                             "B", False, "A", 0.2),
            Q.ScenarioRecord("c", "single-agent", "unimodal", True, {"A": 0.5, "B": 0.5},
                             "A", True, "A", 0.5),
        ]
        assert Q.decision_accuracy(records) == pytest.approx(100.0 * 2 / 3, abs=1e-9)
        assert Q.gold_action_confidence(records) == pytest.approx(100.0 * (0.7 + 0.2 + 0.5) / 3,
                                                                  abs=1e-9)


class TestLogicAccuracy:
    def test_identical_rationale_passes(self, single):
        records = Q.run_suite(single, Q.OmniscientAgent(), "unimodal")
        assert Q.logic_accuracy(records, Q.StubJudge()) == 100.0

    def test_empty_rationale_fails(self, single):
        class Silent(Q.AgentClient):
            def decide(self, view):
                labels = view.scenario.labels
                return {l: 1.0 / len(labels) for l in labels}, ""

        records = Q.run_suite(single[:4], Silent(), "unimodal")
        assert Q.logic_accuracy(records, Q.StubJudge()) == 0.0

    def test_report_marks_metric_absent_without_judge(self, single):
        records = Q.run_suite(single[:2], Q.RandomAgent(0), "unimodal")
        report = Q.EvalReport.build(records, "unimodal", "random", judge=None)
        assert report.logic_accuracy is None
        assert report.logic_accuracy_error

    def test_judge_failure_absent_with_cause(self, single):
        class DeadJudge:
            def judge(self, a, g, context=""):
                raise ConnectionError("endpoint unreachable")

        records = Q.run_suite(single[:2], Q.RandomAgent(0), "unimodal")
        report = Q.EvalReport.build(records, "unimodal", "random", judge=DeadJudge())
        assert report.logic_accuracy is None
        assert "unreachable" in report.logic_accuracy_error


class TestMultiAgentGold:
    def test_aggregated_inference_flow_is_perfect(self, multi):
        for s in multi:
            assert Q.multi_agent_gold_check(s) == s.gold_choice

    def test_report_serialization(self, multi):
        records = Q.run_suite(multi, Q.BeliefAgent(), "imagination")
        report = Q.EvalReport.build(records, "imagination", "belief", Q.StubJudge())
        doc = report.to_json()
        assert doc["schema"] == "eval-report/1"
        assert doc["decision_accuracy"] == 100.0
        json.dumps(doc)  # serializable


class TestSceneFileReference:
    def test_scenario_referencing_scene_file(self, suite, tmp_path):
        s = suite[0]
        (tmp_path / "scenes").mkdir()
        s.scene.save(tmp_path / "scenes" / "shared.json")
        doc_a = s.to_json()
        doc_a["scene"] = {"file": "scenes/shared.json"}
        doc_a["control_pair"] = None
        doc_b = dict(doc_a, id=doc_a["id"] + "-copy")
        Q.save_scenarios = Q.save_scenarios  # keep linters quiet
        (tmp_path / "suite.json").write_text(json.dumps([doc_a, doc_b]))
        loaded = Q.load_scenarios(tmp_path / "suite.json")
        assert loaded[0].scene.dumps() == s.scene.dumps()


class TestConcurrentEvaluation:
    def test_parallel_run_matches_sequential(self, single):
        agent = Q.RandomAgent(seed=9)
        seq = Q.run_suite(single, agent, "unimodal")
        par = Q.run_suite(single, agent, "unimodal", max_concurrency=4)
        assert [r.to_json() for r in par] == [r.to_json() for r in seq]
