import io

import pytest
from PIL import Image

from graspbench.errors import NoDecision, OutOfBounds, UnknownMark
from graspbench.prompting import (
    Decision,
    Keypoint,
    MarkStyle,
    assign_marks,
    build_identify_prompt,
    build_reason_prompt,
    parse_decision,
    render_marks,
)


def blank(w=100, h=80):
    return Image.new("RGB", (w, h), (128, 128, 128))


def png_bytes(img):
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


KPS = [Keypoint(point=(p, p * 0.7)) for p in (10, 30, 50, 70, 90)]


def test_render_count_and_registry():
    out, registry = render_marks(blank(), KPS)
    assert len(registry.marks) == 5
    assert sorted(registry.marks) == [1, 2, 3, 4, 5]
    assert out.size == blank().size


def test_render_deterministic():
    a, _ = render_marks(blank(), KPS)
    b, _ = render_marks(blank(), KPS)
    assert png_bytes(a) == png_bytes(b)


def test_render_out_of_bounds():
    with pytest.raises(OutOfBounds):
        render_marks(blank(), [Keypoint(point=(200, 10))])


def test_reading_order_numbering():
    kps = [Keypoint(point=(90, 50)), Keypoint(point=(10, 10)), Keypoint(point=(50, 10))]
    marked = assign_marks(kps)
    assert [(k.mark_id, k.point) for k in marked] == [
        (1, (10, 10)),
        (2, (50, 10)),
        (3, (90, 50)),
    ]


def test_collision_recorded_both_rendered():
    kps = [Keypoint(point=(40, 40)), Keypoint(point=(44, 40))]  # < radius apart
    out, registry = render_marks(blank(), kps, MarkStyle(radius=14))
    assert registry.collisions == [(1, 2)]
    assert len(registry.marks) == 2


def test_prompt_block_order_and_instruction_verbatim():
    _, registry = render_marks(blank(), KPS)
    instruction = 'grasp the "red" box\nnow'
    prompt = build_reason_prompt(instruction, registry)
    idx = [
        prompt.find("robotic arm with a parallel gripper"),
        prompt.find("grasp the target object without obstruction"),
        prompt.find("determine actions based on obstructions"),
        prompt.find("return the target"),
        prompt.find('"grasp the \\"red\\" box\\nnow"'),
        prompt.find("Respond with exactly one JSON object"),
    ]
    assert all(i >= 0 for i in idx)
    assert idx == sorted(idx)
    assert "Previously grasped" not in prompt  # empty history: no history block


def test_prompt_history_digest():
    _, registry = render_marks(blank(), KPS)
    history = [
        Decision(mark_id=3, class_name="car", is_target=False),
        Decision(mark_id=1, class_name="box", is_target=True),
    ]
    prompt = build_reason_prompt("grasp the box", registry, history)
    assert prompt.index("step 1: mark 3 (car), an obstructor") < prompt.index(
        "step 2: mark 1 (box), the target"
    )


def test_prompt_deterministic():
    _, registry = render_marks(blank(), KPS)
    a = build_reason_prompt("x", registry, [])
    b = build_reason_prompt("x", registry, [])
    assert a == b


def test_identify_prompt_has_no_obstruction_logic():
    _, registry = render_marks(blank(), KPS)
    prompt = build_identify_prompt("the red box", registry)
    assert "obstruct" not in prompt.lower()
    assert "Which mark" in prompt


def test_parse_plain_decision():
    _, registry = render_marks(blank(), KPS)
    d = parse_decision('{"id": 3, "class": "juice box", "is_target": true}', registry)
    assert d == Decision(mark_id=3, class_name="juice box", is_target=True)


def test_parse_embedded_in_prose():
    _, registry = render_marks(blank(), KPS)
    reply = (
        'I don\'t see a juice box in the top left corner. If you mean the object '
        'labeled "3", it is free of obstacles. '
        '{"id": 3, "class": "juice box", "is_target": true, "rationale": "free"}'
    )
    d = parse_decision(reply, registry)
    assert d.mark_id == 3 and d.rationale == "free"


def test_parse_skips_malformed_then_finds_valid():
    _, registry = render_marks(blank(), KPS)
    reply = '{"oops": } then {"id": 2, "class": "cup", "is_target": false}'
    assert parse_decision(reply, registry).mark_id == 2


def test_parse_unknown_mark():
    _, registry = render_marks(blank(), KPS)
    with pytest.raises(UnknownMark):
        parse_decision('{"id": 99, "class": "cup", "is_target": false}', registry)


def test_parse_no_decision():
    _, registry = render_marks(blank(), KPS)
    with pytest.raises(NoDecision):
        parse_decision("I cannot help with that.", registry)
    with pytest.raises(NoDecision):
        parse_decision('{"id": "three", "class": "cup", "is_target": false}', registry)
