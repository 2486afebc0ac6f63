import numpy as np
import pytest

from graspbench.errors import CycleError, UnknownTarget
from graspbench.scene import (
    Level,
    SceneState,
    classify_difficulty,
    is_ambiguous,
    minimal_steps,
    obstructor_closure,
    prune_occlusion_graph,
    remove_object,
    valid_pick_set,
)

from helpers import (
    brute_force_longest_chain,
    brute_force_min_steps_and_picks,
    initial_state,
    random_dag_scene,
    tiny_scene,
)


# --- pruning ---

def test_prune_drops_below_threshold():
    scene = tiny_scene(2, [(1, 0)], fractions={(1, 0): 0.005})
    assert prune_occlusion_graph(scene, 0.01) == ()


def test_prune_keeps_boundary():
    # exactly 1% is kept: only strictly-below removed
    scene = tiny_scene(2, [(1, 0)], fractions={(1, 0): 0.01})
    kept = prune_occlusion_graph(scene, 0.01)
    assert len(kept) == 1 and kept[0].fraction == 0.01


def test_prune_keeps_strong_edge():
    scene = tiny_scene(2, [(1, 0)], fractions={(1, 0): 0.5})
    assert len(prune_occlusion_graph(scene, 0.01)) == 1


def test_prune_monotone_in_threshold():
    rng = np.random.default_rng(7)
    for _ in range(20):
        scene = random_dag_scene(rng)
        fracs = sorted({e.fraction for e in scene.edges} | {0.0, 0.3, 1.0})
        prev = None
        for t in fracs:
            kept = set(prune_occlusion_graph(scene, t))
            if prev is not None:
                assert kept <= prev
            prev = kept
        assert set(prune_occlusion_graph(scene, 0.0)) == set(scene.edges)
        assert prune_occlusion_graph(scene, 1.0) == tuple(
            e for e in scene.edges if e.fraction >= 1.0
        )


def test_prune_cycle_rejected():
    scene = tiny_scene(3, [(0, 1), (1, 2), (2, 0)])
    with pytest.raises(CycleError) as ei:
        prune_occlusion_graph(scene)
    assert set(ei.value.cycle) == {0, 1, 2}


def test_cycle_below_threshold_is_fine():
    # the cycle-closing edge is pruned away, so the graph loads
    scene = tiny_scene(3, [(0, 1), (1, 2), (2, 0)], fractions={(2, 0): 0.001})
    kept = prune_occlusion_graph(scene)
    assert {(e.occluder, e.occluded) for e in kept} == {(0, 1), (1, 2)}


# --- closure / picks / steps ---
# chain scenes use ids: T=0, A=1, B=2 with B obstructs A obstructs T

CHAIN = [(2, 1), (1, 0)]
DIAMOND = [(3, 1), (1, 0), (2, 0)]  # C=3 obstructs A=1; A and B=2 obstruct T=0


def test_closure_chain():
    st = initial_state(tiny_scene(3, CHAIN))
    assert obstructor_closure(st, 0) == {1, 2}


def test_closure_unobstructed():
    st = initial_state(tiny_scene(3, CHAIN))
    assert obstructor_closure(st, 2) == set()


def test_closure_diamond():
    st = initial_state(tiny_scene(4, DIAMOND))
    assert obstructor_closure(st, 0) == {1, 2, 3}


def test_valid_pick_set_chain():
    st = initial_state(tiny_scene(3, CHAIN))
    assert valid_pick_set(st, 0) == {2}


def test_valid_pick_set_free_target():
    st = initial_state(tiny_scene(3, CHAIN))
    assert valid_pick_set(st, 2) == {2}


def test_valid_pick_set_two_leaves():
    st = initial_state(tiny_scene(3, [(1, 0), (2, 0)]))
    assert valid_pick_set(st, 0) == {1, 2}


def test_minimal_steps():
    assert minimal_steps(initial_state(tiny_scene(3, CHAIN)), 0) == 3
    assert minimal_steps(initial_state(tiny_scene(3, CHAIN)), 2) == 1
    assert minimal_steps(initial_state(tiny_scene(4, DIAMOND)), 0) == 4


def test_unknown_target_raises():
    st = initial_state(tiny_scene(2, []))
    for op in (obstructor_closure, valid_pick_set, minimal_steps, classify_difficulty):
        with pytest.raises(UnknownTarget):
            op(st, 99)


# --- difficulty ---

def test_difficulty_levels():
    st = initial_state(tiny_scene(3, CHAIN))
    assert classify_difficulty(st, 2) is Level.EASY
    assert classify_difficulty(st, 1) is Level.MEDIUM
    assert classify_difficulty(st, 0) is Level.HARD


def test_difficulty_consistency_invariant():
    rng = np.random.default_rng(11)
    for _ in range(50):
        scene = random_dag_scene(rng)
        st = initial_state(scene)
        for target in st.live:
            easy = classify_difficulty(st, target) is Level.EASY
            assert easy == (valid_pick_set(st, target) == {target})
            assert easy == (minimal_steps(st, target) == 1)


def test_ambiguity():
    scene = tiny_scene(3, [], classes=["rubiks_cube", "rubiks_cube", "banana"])
    assert is_ambiguous(scene, 0)
    assert is_ambiguous(scene, 1)
    assert not is_ambiguous(scene, 2)
    distinct = tiny_scene(3, [])
    assert not is_ambiguous(distinct, 0)
    triple = tiny_scene(3, [], classes=["a", "a", "a"])
    assert is_ambiguous(triple, 2)


# --- removal ---

def test_remove_object_value_semantics():
    st = initial_state(tiny_scene(3, CHAIN))
    st2 = remove_object(st, 2)
    assert st.live == {0, 1, 2}
    assert st2.live == {0, 1}
    assert valid_pick_set(st2, 0) == {1}


def test_remove_last_obstructor_makes_easy():
    st = initial_state(tiny_scene(2, [(1, 0)]))
    st2 = remove_object(st, 1)
    assert classify_difficulty(st2, 0) is Level.EASY


def test_remove_twice_raises():
    st = remove_object(initial_state(tiny_scene(2, [])), 1)
    with pytest.raises(UnknownTarget):
        remove_object(st, 1)


def test_removal_soundness():
    # removing any valid pick decreases minimal_steps by exactly 1
    rng = np.random.default_rng(3)
    for _ in range(40):
        scene = random_dag_scene(rng)
        st = initial_state(scene)
        for target in st.live:
            steps = minimal_steps(st, target)
            for pick in valid_pick_set(st, target):
                if pick == target:
                    continue
                assert minimal_steps(remove_object(st, pick), target) == steps - 1


# --- brute-force equivalence ---

def test_brute_force_equivalence_random_graphs():
    rng = np.random.default_rng(42)
    for i in range(60):
        scene = random_dag_scene(rng, scene_id=f"bf{i}")
        st = initial_state(scene)
        live = st.live
        edges = [(e.occluder, e.occluded) for e in st.live_edges()]
        for target in live:
            bf_steps, bf_picks = brute_force_min_steps_and_picks(live, edges, target)
            assert minimal_steps(st, target) == bf_steps
            assert valid_pick_set(st, target) == bf_picks
            chain = brute_force_longest_chain(live, edges, target)
            expected = (
                Level.EASY if chain == 0 else Level.MEDIUM if chain == 1 else Level.HARD
            )
            assert classify_difficulty(st, target) is expected


def test_leaf_existence():
    rng = np.random.default_rng(5)
    for _ in range(40):
        st = initial_state(random_dag_scene(rng))
        for target in st.live:
            assert valid_pick_set(st, target)
