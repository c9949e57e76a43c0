"""Layout planning, validation, relation predicates, edits, rasterization."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scenesmith.analysis import Relation, decompose_rule_based
from scenesmith.errors import InvalidDiffIndex, LayoutInfeasible
from scenesmith.layout import (
    Add,
    BBox,
    LayoutDiff,
    LayoutEntry,
    Move,
    Remove,
    Resize,
    SceneLayout,
    apply_diff,
    iou,
    plan_layout,
    rasterize,
    relation_satisfied,
    validate,
)

A1_LAYOUT = SceneLayout(
    canvas=(512, 512),
    entries=[
        LayoutEntry(0, 0, "a blue horse", BBox(50, 70, 220, 300)),
        LayoutEntry(1, 0, "a brown vase", BBox(300, 113, 150, 250)),
    ],
)

boxes = st.builds(
    BBox,
    x=st.integers(0, 400),
    y=st.integers(0, 400),
    w=st.integers(1, 112),
    h=st.integers(1, 112),
)


def two_entry_layout(a: BBox, b: BBox) -> SceneLayout:
    return SceneLayout(
        canvas=(512, 512),
        entries=[LayoutEntry(0, 0, "a cat", a), LayoutEntry(1, 0, "a dog", b)],
    )


class TestValidate:
    def test_appendix_layout_clean(self):
        # printed boxes are disjoint and in-bounds
        assert validate(A1_LAYOUT).clean

    def test_out_of_bounds(self):
        layout = SceneLayout(entries=[LayoutEntry(0, 0, "a cat", BBox(0, 0, 600, 100))])
        report = validate(layout)
        assert [v.kind for v in report.violations] == ["out_of_bounds"]

    def test_identical_boxes_overlap_one(self):
        layout = two_entry_layout(BBox(10, 10, 50, 50), BBox(10, 10, 50, 50))
        report = validate(layout)
        overlaps = [v for v in report.violations if v.kind == "overlap"]
        assert len(overlaps) == 1
        assert overlaps[0].iou == 1.0

    def test_non_positive_size(self):
        layout = SceneLayout(entries=[LayoutEntry(0, 0, "a cat", BBox(0, 0, 0, 10))])
        assert [v.kind for v in validate(layout).violations] == ["non_positive_size"]

    def test_never_throws(self):
        validate(SceneLayout(entries=[]))


class TestRelationPredicates:
    def test_left_true(self):
        layout = two_entry_layout(BBox(50, 200, 100, 100), BBox(250, 200, 100, 100))
        assert relation_satisfied(layout, Relation(0, 1, "left"))
        assert not relation_satisfied(layout, Relation(0, 1, "right"))

    @given(boxes, boxes)
    def test_left_right_antisymmetry(self, a, b):
        layout = two_entry_layout(a, b)
        assert relation_satisfied(layout, Relation(0, 1, "left")) == relation_satisfied(
            layout, Relation(1, 0, "right")
        )

    def test_apple_on_plate(self):
        # boxes straight from the printed relationship example: horizontal
        # containment and vertical nesting hold
        layout = SceneLayout(
            entries=[
                LayoutEntry(0, 0, "a red apple", BBox(235, 230, 60, 60)),
                LayoutEntry(1, 0, "a plate", BBox(175, 210, 180, 180)),
            ]
        )
        assert relation_satisfied(layout, Relation(0, 1, "on_top"))

    def test_on_top_requires_horizontal_overlap(self):
        layout = two_entry_layout(BBox(0, 100, 50, 50), BBox(200, 150, 100, 100))
        assert not relation_satisfied(layout, Relation(0, 1, "on_top"))

    def test_stacked_touching_boxes_on_top(self):
        layout = two_entry_layout(BBox(120, 100, 60, 50), BBox(100, 150, 100, 100))
        assert relation_satisfied(layout, Relation(0, 1, "on_top"))

    def test_above_below(self):
        layout = two_entry_layout(BBox(100, 50, 50, 50), BBox(100, 300, 50, 50))
        assert relation_satisfied(layout, Relation(0, 1, "above"))
        assert relation_satisfied(layout, Relation(1, 0, "below"))

    def test_next_to_within_gap(self):
        layout = two_entry_layout(BBox(100, 100, 50, 50), BBox(160, 100, 50, 50))
        assert relation_satisfied(layout, Relation(0, 1, "next_to"))

    def test_next_to_rejects_overlap_and_distance(self):
        overlapping = two_entry_layout(BBox(100, 100, 50, 50), BBox(120, 100, 50, 50))
        assert not relation_satisfied(overlapping, Relation(0, 1, "next_to"))
        far = two_entry_layout(BBox(0, 0, 50, 50), BBox(400, 400, 50, 50))
        assert not relation_satisfied(far, Relation(0, 1, "next_to"))

    def test_non_spatial_always_true(self):
        layout = two_entry_layout(BBox(0, 0, 10, 10), BBox(400, 400, 10, 10))
        assert relation_satisfied(layout, Relation(0, 1, "holding"))

    def test_unresolved_indices_raise(self):
        layout = SceneLayout(entries=[LayoutEntry(0, 0, "a cat", BBox(0, 0, 10, 10))])
        with pytest.raises(ValueError):
            relation_satisfied(layout, Relation(0, 1, "left"))


class TestPlanner:
    def test_two_objects_left_to_right_in_order(self):
        analysis = decompose_rule_based("a blue horse and a brown vase")
        layout = plan_layout(analysis, seed=0)
        assert validate(layout).clean
        horse, vase = layout.entries
        assert horse.box.center_x < vase.box.center_x

    def test_left_relation_by_construction(self):
        analysis = decompose_rule_based("a vase on the left of a horse")
        layout = plan_layout(analysis, seed=3)
        assert relation_satisfied(layout, analysis.relations[0])

    def test_deterministic(self):
        analysis = decompose_rule_based("a blue horse and a brown vase")
        assert plan_layout(analysis, seed=5).to_dict() == plan_layout(analysis, seed=5).to_dict()

    def test_seed_changes_layout(self):
        analysis = decompose_rule_based("a blue horse and a brown vase")
        assert plan_layout(analysis, seed=1).to_dict() != plan_layout(analysis, seed=2).to_dict()

    def test_count_expansion(self):
        analysis = decompose_rule_based("two hot dogs and a red car")
        layout = plan_layout(analysis, seed=0)
        assert len(layout.entries) == 3
        assert len(layout.entries_for_object(0)) == 2

    def test_contradictory_relations_infeasible(self):
        analysis = decompose_rule_based("a cat on the left of a dog")
        analysis.relations.append(Relation(0, 1, "right", "forced contradiction"))
        with pytest.raises(LayoutInfeasible):
            plan_layout(analysis, seed=0)

    @pytest.mark.parametrize(
        "prompt",
        [
            "a blue horse and a brown vase",
            "The red apple was on top of the plate",
            "a bird above a car",
            "a cat on the left of a dog",
            "two hot dogs and a red car",
            "a cup next to a plate",
        ],
    )
    def test_plans_are_clean_and_satisfy_relations(self, prompt):
        analysis = decompose_rule_based(prompt)
        for seed in range(25):
            layout = plan_layout(analysis, seed=seed)
            assert validate(layout).clean
            for relation in analysis.relations:
                assert relation_satisfied(layout, relation)


class TestApplyDiff:
    def test_remove_then_add_preserves_count(self):
        diff = LayoutDiff([Remove(0), Add("a blue horse", BBox(10, 10, 50, 50))])
        result = apply_diff(A1_LAYOUT, diff)
        assert len(result.entries) == len(A1_LAYOUT.entries)

    def test_empty_diff_identity(self):
        result = apply_diff(A1_LAYOUT, LayoutDiff([]))
        assert result.to_dict() == A1_LAYOUT.to_dict()

    def test_resize_touches_only_target(self):
        # shrinking one oversized box leaves every other field alone
        diff = LayoutDiff([Resize(0, 100, 120)])
        result = apply_diff(A1_LAYOUT, diff)
        assert (result.entries[0].box.w, result.entries[0].box.h) == (100, 120)
        assert (result.entries[0].box.x, result.entries[0].box.y) == (50, 70)
        assert result.entries[1] == A1_LAYOUT.entries[1]

    def test_move_resize_inverse_is_identity(self):
        diff = LayoutDiff([Move(0, 5, 7), Resize(1, 40, 40)])
        inverse = LayoutDiff([Resize(1, 150, 250), Move(0, 50, 70)])
        result = apply_diff(apply_diff(A1_LAYOUT, diff), inverse)
        assert result.to_dict() == A1_LAYOUT.to_dict()

    def test_human_edits_never_clamped(self):
        diff = LayoutDiff([Move(0, 480, 480)])
        result = apply_diff(A1_LAYOUT, diff)
        assert (result.entries[0].box.x, result.entries[0].box.y) == (480, 480)
        assert not validate(result).clean

    def test_invalid_index(self):
        with pytest.raises(InvalidDiffIndex):
            apply_diff(A1_LAYOUT, LayoutDiff([Remove(5)]))

    def test_sequential_index_semantics(self):
        diff = LayoutDiff([Remove(0), Remove(0)])
        assert apply_diff(A1_LAYOUT, diff).entries == []

    def test_diff_dict_roundtrip(self):
        diff = LayoutDiff(
            [Add("a cat", BBox(1, 2, 3, 4)), Remove(0), Move(0, 9, 9), Resize(0, 7, 7)]
        )
        assert LayoutDiff.from_dict(diff.to_dict()).to_dict() == diff.to_dict()


class TestRasterize:
    def test_empty_layout_all_black(self):
        image = np.asarray(rasterize(SceneLayout(entries=[])))
        assert image.shape == (512, 512, 3)
        assert int(image.sum()) == 0

    def test_full_canvas_single_color(self):
        layout = SceneLayout(entries=[LayoutEntry(0, 0, "a cat", BBox(0, 0, 512, 512))])
        image = np.asarray(rasterize(layout))
        assert len(np.unique(image.reshape(-1, 3), axis=0)) == 1

    def test_appendix_pixel_counts(self):
        # the printed boxes are disjoint: foreground areas are exact
        image = np.asarray(rasterize(A1_LAYOUT))
        foreground = (image != 0).any(axis=-1)
        assert int(foreground.sum()) == 220 * 300 + 150 * 250

    def test_byte_deterministic(self):
        from scenesmith.protocol import png_bytes

        a = png_bytes(np.asarray(rasterize(A1_LAYOUT)))
        b = png_bytes(np.asarray(rasterize(A1_LAYOUT)))
        assert a == b

    def test_index_palette_mode(self):
        layout = two_entry_layout(BBox(0, 0, 50, 50), BBox(100, 100, 50, 50))
        image = np.asarray(rasterize(layout, palette_mode="index"))
        assert len(np.unique(image.reshape(-1, 3), axis=0)) == 3  # background + 2 fills

    @given(
        st.lists(
            st.tuples(st.integers(0, 450), st.integers(0, 450), st.integers(1, 62), st.integers(1, 62)),
            min_size=0,
            max_size=6,
        )
    )
    @settings(max_examples=30, deadline=None)
    def test_foreground_at_most_sum_of_areas(self, raw_boxes):
        layout = SceneLayout(
            entries=[
                LayoutEntry(i, 0, f"a cat{i}", BBox(x, y, w, h))
                for i, (x, y, w, h) in enumerate(raw_boxes)
            ]
        )
        image = np.asarray(rasterize(layout, palette_mode="index"))
        foreground = int((image != 0).any(axis=-1).sum())
        total_area = sum(w * h for _, _, w, h in raw_boxes)
        assert foreground <= total_area
        overlap_free = all(
            layout.entries[i].box.intersection_area(layout.entries[j].box) == 0
            for i in range(len(raw_boxes))
            for j in range(i + 1, len(raw_boxes))
        )
        if overlap_free:
            assert foreground == total_area


class TestLayoutTextFormat:
    def test_roundtrip(self):
        text = A1_LAYOUT.to_text()
        parsed = SceneLayout.from_text(text)
        assert parsed.canvas == A1_LAYOUT.canvas
        assert [(e.caption, e.box) for e in parsed.entries] == [
            (e.caption, e.box) for e in A1_LAYOUT.entries
        ]

    def test_bad_line_raises(self):
        with pytest.raises(ValueError):
            SceneLayout.from_text("canvas 512 512\nnot a layout line")


@given(boxes, boxes)
def test_iou_bounds_and_symmetry(a, b):
    value = iou(a, b)
    assert 0.0 <= value <= 1.0
    assert value == iou(b, a)
    assert iou(a, a) == 1.0
