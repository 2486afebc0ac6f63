import pytest
from PIL import Image

from graspbench.errors import ConfigError, FixtureExhausted, UnknownMark
from graspbench.localization import gt_localize
from graspbench.prompting import render_marks
from graspbench.reasoning import (
    OracleReasoner,
    ScriptedReasoner,
    gpt_score,
    oracle_decide,
    oracle_identifier,
)

from helpers import initial_state, tiny_scene


def annotated(state):
    img = Image.new("RGB", (state.scene.image.width, state.scene.image.height))
    return render_marks(img, gt_localize(state))


def test_oracle_decide_chain():
    st = initial_state(tiny_scene(3, [(2, 1), (1, 0)]))
    assert oracle_decide(st, 0) == (2, "cls2", False)


def test_oracle_decide_free_target():
    st = initial_state(tiny_scene(3, [(2, 1), (1, 0)]))
    assert oracle_decide(st, 2) == (2, "cls2", True)


def test_oracle_decide_tie_break_lowest_id():
    st = initial_state(tiny_scene(6, [(2, 0), (5, 0)]))
    assert oracle_decide(st, 0)[0] == 2


def test_oracle_reasoner_via_registry():
    st = initial_state(tiny_scene(3, [(2, 1), (1, 0)]))
    img, registry = annotated(st)
    r = OracleReasoner()
    r.bind(st, 0)
    d = r.decide(img, registry, "grasp it")
    assert registry.marks[d.mark_id].object_hint == 2
    assert not d.is_target


def test_oracle_requires_hints():
    from graspbench.prompting import Keypoint

    st = initial_state(tiny_scene(2, []))
    img = Image.new("RGB", (32, 32))
    img, registry = render_marks(img, [Keypoint(point=(5, 5)), Keypoint(point=(10, 10))])
    r = OracleReasoner()
    r.bind(st, 0)
    with pytest.raises(ConfigError):
        r.decide(img, registry, "grasp it")


def test_scripted_replays_in_order():
    st = initial_state(tiny_scene(3, []))
    img, registry = annotated(st)
    r = ScriptedReasoner(fixture=[(3, "car", False), (1, "car", True)])
    assert r.decide(img, registry, "x").mark_id == 3
    assert r.decide(img, registry, "x").mark_id == 1
    assert r.consumed == 2
    with pytest.raises(FixtureExhausted):
        r.decide(img, registry, "x")


def test_scripted_unknown_mark():
    st = initial_state(tiny_scene(2, []))
    img, registry = annotated(st)
    r = ScriptedReasoner(fixture=[(9, "car", False)])
    with pytest.raises(UnknownMark):
        r.decide(img, registry, "x")


def test_gpt_score_oracle_perfect():
    st = initial_state(tiny_scene(3, []))
    img, registry = annotated(st)
    target_mark = next(m for m, k in registry.marks.items() if k.object_hint == 1)
    score, flags = gpt_score(
        img, registry, ["a", "b", "c"], 1, oracle_identifier(target_mark)
    )
    assert score == 1.0 and flags == []


def test_gpt_score_one_wrong():
    st = initial_state(tiny_scene(3, []))
    img, registry = annotated(st)
    target_mark = next(m for m, k in registry.marks.items() if k.object_hint == 1)
    wrong_mark = next(m for m in registry.marks if m != target_mark)
    calls = iter([target_mark, wrong_mark, target_mark])

    def identifier(image, reg, instruction):
        from graspbench.prompting import Decision

        return Decision(mark_id=next(calls), class_name="x", is_target=True)

    score, flags = gpt_score(img, registry, ["a", "b", "c"], 1, identifier)
    assert score == pytest.approx(2 / 3)


def test_gpt_score_all_failures_flagged():
    st = initial_state(tiny_scene(3, []))
    img, registry = annotated(st)

    def broken(image, reg, instruction):
        raise ConnectionError("endpoint down")

    score, flags = gpt_score(img, registry, ["a", "b", "c"], 1, broken)
    assert score == 0.0 and len(flags) == 3


def test_gpt_score_requires_three():
    st = initial_state(tiny_scene(3, []))
    img, registry = annotated(st)
    with pytest.raises(ValueError):
        gpt_score(img, registry, ["a"], 1, oracle_identifier(1))
