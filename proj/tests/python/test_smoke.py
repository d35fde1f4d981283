import os
from fractions import Fraction

import pytest

import pomdpv


def test_running_example_shape():
    m = pomdpv.running_example()
    assert m.num_states == 9
    assert m.num_actions == 2
    assert m.num_observations == 5
    assert m.action_names == ["a", "b"]
    again = pomdpv.parse_model(m.to_text())
    assert again.to_text() == m.to_text()


def test_belief_update_is_exact():
    m = pomdpv.running_example()
    # b1 = Dirac on s0; action b, observation "start" keeps s0, s5, s6 apart from the rest
    succ = pomdpv.belief_successors(m, {0: 1}, 1)
    assert sum(p for p, _ in succ) == 1
    for p, b in succ:
        assert sum(b.values()) == 1
        assert all(isinstance(v, Fraction) for v in b.values())
    b = pomdpv.next_belief(m, {0: 1}, 1, 0)
    assert b == {0: Fraction(1, 2), 5: Fraction(1, 6), 6: Fraction(1, 3)}


def test_refinement_brackets_the_running_example():
    m = pomdpv.running_example()
    r = pomdpv.run(m, time=10, gap=0.01)
    assert r["lower"] >= 0.65
    assert r["upper"] <= 0.70
    assert r["lower"] <= 35 / 51 <= r["upper"] + 1e-9
    assert r["threshold"] is None


def test_threshold_query():
    m = pomdpv.running_example()
    assert pomdpv.run(m, threshold="<=0.7", exact=True)["threshold"] == "holds"


def test_presets_and_generator():
    presets = pomdpv.heuristic_presets()
    assert sorted(presets) == ["h0", "h1", "h2", "h3", "h4", "h5"]
    text = pomdpv.generate("grid-avoid", seed=4)
    assert text == pomdpv.generate("grid-avoid", seed=4)
    assert pomdpv.parse_model(text).num_actions == 4


def test_errors_surface_as_value_errors():
    with pytest.raises(ValueError):
        pomdpv.parse_model("pomdp 1 1")
    with pytest.raises(ValueError):
        pomdpv.run(pomdpv.running_example(), mode="single-shot")


@pytest.mark.skipif(not os.environ.get("POMDPV_MODELS"), reason="model directory not configured")
def test_shipped_model_file():
    m = pomdpv.load_model(os.path.join(os.environ["POMDPV_MODELS"], "running_example.pomdp"))
    assert m.to_text() == pomdpv.running_example().to_text()
