import numpy as np
import pytest

from graspbench.errors import EmptyScene, ProtocolError
from graspbench.localization import (
    LocalizerConfig,
    eval_localization,
    gt_localize,
    occluded_fraction,
    parse_point_reply,
    perturbed_localize,
)
from graspbench.prompting import Keypoint
from graspbench.scene import SceneState, remove_object

from helpers import initial_state, tiny_scene


def test_gt_localize_all_live():
    st = initial_state(tiny_scene(4, []))
    kps = gt_localize(st)
    assert len(kps) == 4
    assert all(k.object_hint is not None for k in kps)


def test_gt_localize_after_removal():
    st = remove_object(initial_state(tiny_scene(4, [])), 2)
    assert {k.object_hint for k in gt_localize(st)} == {0, 1, 3}


def test_gt_localize_empty():
    st = initial_state(tiny_scene(2, []))
    st = remove_object(remove_object(st, 0), 1)
    with pytest.raises(EmptyScene):
        gt_localize(st)


def test_perturbed_degenerate_equals_gt():
    st = initial_state(tiny_scene(4, []))
    cfg = LocalizerConfig(
        kind="perturbed", noise_sigma_px=0.0, dropout_by_occlusion=lambda f: 0.0,
        duplicate_rate=0.0, seed=1,
    )
    assert [(k.point, k.object_hint) for k in perturbed_localize(st, cfg)] == [
        (k.point, k.object_hint) for k in gt_localize(st)
    ]


def test_perturbed_full_dropout():
    st = initial_state(tiny_scene(3, []))
    cfg = LocalizerConfig(kind="perturbed", dropout_by_occlusion=lambda f: 1.0, seed=1)
    assert perturbed_localize(st, cfg) == []


def test_perturbed_deterministic():
    st = initial_state(tiny_scene(5, [(1, 0), (2, 1)]))
    cfg = LocalizerConfig(
        kind="perturbed", noise_sigma_px=2.0, duplicate_rate=0.5, seed=99
    )
    assert perturbed_localize(st, cfg) == perturbed_localize(st, cfg)


def test_occluded_fraction_sums_live_occluders():
    scene = tiny_scene(3, [(1, 0), (2, 0)], fractions={(1, 0): 0.3, (2, 0): 0.2})
    st = initial_state(scene)
    assert occluded_fraction(st, 0) == pytest.approx(0.5)
    assert occluded_fraction(remove_object(st, 1), 0) == pytest.approx(0.2)


def test_parse_point_tags():
    text = 'Sure: <point x="12.5" y="30"> and <point x="1" y="2">'
    assert parse_point_reply(text) == [(12.5, 30.0), (1.0, 2.0)]


def test_parse_point_json_variants():
    assert parse_point_reply('[[3, 4], [5, 6]]') == [(3.0, 4.0), (5.0, 6.0)]
    assert parse_point_reply('{"points": [{"x": 1, "y": 2}]}') == [(1.0, 2.0)]


def test_parse_point_malformed():
    with pytest.raises(ProtocolError):
        parse_point_reply("no points here")


def center_keypoints(scene):
    return [Keypoint(point=o.center) for o in scene.objects]


def test_eval_perfect():
    scene = tiny_scene(4, [])
    res = eval_localization(center_keypoints(scene), scene)
    assert res == {"AP": 1.0, "AR": 1.0, "F1": 1.0}


def test_eval_one_stray():
    scene = tiny_scene(4, [])
    pred = center_keypoints(scene) + [Keypoint(point=(31.0, 31.0))]  # empty corner
    res = eval_localization(pred, scene)
    assert res["AP"] == pytest.approx(4 / 5)
    assert res["AR"] == 1.0


def test_eval_one_missed():
    scene = tiny_scene(4, [])
    pred = center_keypoints(scene)[:-1]
    res = eval_localization(pred, scene)
    assert res["AP"] == 1.0
    assert res["AR"] == pytest.approx(3 / 4)


def test_eval_duplicate_on_same_object_is_fp():
    scene = tiny_scene(3, [])
    pred = center_keypoints(scene) + [Keypoint(point=scene.objects[0].center)]
    res = eval_localization(pred, scene)
    assert res["AP"] == pytest.approx(3 / 4)
    assert res["AR"] == 1.0


def test_eval_counts_invariant():
    rng = np.random.default_rng(0)
    scene = tiny_scene(5, [])
    for _ in range(20):
        n_pred = int(rng.integers(0, 8))
        pred = [
            Keypoint(point=(float(rng.integers(0, 32)), float(rng.integers(0, 32))))
            for _ in range(n_pred)
        ]
        res = eval_localization(pred, scene)
        assert 0.0 <= res["AP"] <= 1.0 and 0.0 <= res["AR"] <= 1.0


def test_eval_gt_round_trip_property():
    st = initial_state(tiny_scene(6, [(5, 0), (4, 1)]))
    res = eval_localization(gt_localize(st), st.scene)
    assert res == {"AP": 1.0, "AR": 1.0, "F1": 1.0}
