import math
import random

import numpy as np
import pytest

from layouteval.builder import (
    BuilderConfig,
    PartialStats,
    RelationTriple,
    build_ontology,
    compute_cooccurrence,
    compute_orientation_stats,
    extract_dimensions,
    filter_support_predicates,
    infer_support,
    summarize,
    _percentile,
)
from layouteval.ontology import Ontology, save_ontology
from layouteval.scene import CorpusObject, CorpusScene, save_corpus

SQUARE = [(0.0, 0.0), (8.0, 0.0), (8.0, 8.0), (0.0, 8.0)]


def corpus_obj(category, x, y, z, w=1.0, h=1.0, d=1.0, yaw=0.0) -> CorpusObject:
    return CorpusObject(category, (x, y, z), (w, h, d), yaw)


def make_scene(scene_id, objects, room="bedroom", polygon=SQUARE) -> CorpusScene:
    return CorpusScene(scene_id, room, list(polygon), objects)


def synth_corpus(seed: int, n: int = 50) -> list[CorpusScene]:
    rng = random.Random(seed)
    cats = ["bed", "chair", "table", "sofa", "lamp", "nightstand", "wardrobe", "desk"]
    rooms = ["bedroom", "livingroom"]
    scenes = []
    for i in range(n):
        side = rng.uniform(5.0, 10.0)
        polygon = [(0.0, 0.0), (side, 0.0), (side, side), (0.0, side)]
        objects = []
        for _ in range(rng.randint(2, 6)):
            w = rng.uniform(0.3, 2.0)
            h = rng.uniform(0.3, 2.0)
            d = rng.uniform(0.3, 2.0)
            objects.append(CorpusObject(
                rng.choice(cats),
                (rng.uniform(0.5, side - 0.5), rng.uniform(0.5, side - 0.5), d / 2.0),
                (w, h, d),
                rng.uniform(0.0, 360.0),
            ))
        scenes.append(CorpusScene(f"scene-{i:03d}", rng.choice(rooms), polygon, objects))
    return scenes


class TestPercentiles:
    def test_single_sample_degenerate(self):
        scenes = [make_scene("s", [corpus_obj("chair", 1, 1, 0.5, w=2.0, h=2.0, d=2.0)])]
        dims = extract_dimensions(scenes)["chair"]
        for axis in ("width", "height", "depth"):
            stats = dims[axis]
            assert stats.p5 == stats.median == stats.p95 == stats.mean == 2.0
            assert stats.std == 0.0
            assert stats.n == 1

    def test_symmetric_samples(self):
        objs = [corpus_obj("chair", i, 1, 0.5, w=float(v)) for i, v in enumerate([1, 2, 3, 4, 5])]
        scenes = [make_scene("s", objs)]
        stats = extract_dimensions(scenes)["chair"]["width"]
        assert stats.median == 3.0
        assert stats.mean == 3.0

    def test_linear_interpolation_1_to_100(self):
        values = [float(v) for v in range(1, 101)]
        assert _percentile(values, 5.0) == pytest.approx(5.95)

    def test_matches_numpy_linear(self):
        rng = random.Random(3)
        for _ in range(50):
            values = sorted(rng.uniform(0.0, 10.0) for _ in range(rng.randint(1, 40)))
            for q in (5.0, 25.0, 50.0, 75.0, 95.0):
                assert _percentile(values, q) == pytest.approx(
                    float(np.percentile(values, q, method="linear")), abs=1e-12
                )


class TestSupportInference:
    def test_floor_supported(self):
        scene = make_scene("s", [corpus_obj("table", 4, 4, 0.4, d=0.8)])
        assert infer_support(scene) == [(0, "floor")]

    def test_stacked_within_tolerance(self):
        scene = make_scene("s", [
            corpus_obj("table", 4.0, 4.0, 0.4, w=2.0, h=1.0, d=0.8),
            corpus_obj("lamp", 4.2, 4.1, 1.03, w=0.2, h=0.2, d=0.4),  # bottom 0.83, top 0.8 +- 3 cm
        ])
        assert infer_support(scene) == [(0, "floor"), (1, 0)]

    def test_hovering_object_flagged(self):
        scene = make_scene("s", [
            corpus_obj("table", 4.0, 4.0, 0.4, w=2.0, h=1.0, d=0.8),
            corpus_obj("lamp", 4.0, 4.0, 1.2, w=0.2, h=0.2, d=0.4),  # bottom 1.0, 20 cm above top
        ])
        assert infer_support(scene) == [(0, "floor"), (1, None)]

    def test_center_must_be_over_supporter(self):
        scene = make_scene("s", [
            corpus_obj("table", 4.0, 4.0, 0.4, w=2.0, h=1.0, d=0.8),
            corpus_obj("lamp", 6.0, 4.0, 1.0, w=0.2, h=0.2, d=0.4),  # right height, off to the side
        ])
        assert infer_support(scene) == [(0, "floor"), (1, None)]

    def test_tie_prefers_largest_footprint(self):
        scene = make_scene("s", [
            corpus_obj("table", 4.0, 4.0, 0.4, w=2.0, h=2.0, d=0.8),
            corpus_obj("desk", 4.0, 4.0, 0.4, w=1.0, h=1.0, d=0.8),
            corpus_obj("lamp", 4.0, 4.0, 1.0, w=0.2, h=0.2, d=0.4),
        ])
        assert infer_support(scene)[2] == (2, 0)

    def test_rotated_footprint_containment(self):
        # 2x0.5 table rotated 90 deg: footprint now spans y, not x
        scene = make_scene("s", [
            corpus_obj("table", 4.0, 4.0, 0.4, w=2.0, h=0.5, d=0.8, yaw=90.0),
            corpus_obj("lamp", 4.0, 4.8, 1.0, w=0.2, h=0.2, d=0.4),
        ])
        assert infer_support(scene)[1] == (1, 0)

    def test_no_cycles_or_self_support(self):
        scenes = synth_corpus(11, n=10)
        for scene in scenes:
            edges = dict(infer_support(scene))
            for idx, supporter in edges.items():
                seen = {idx}
                while isinstance(supporter, int):
                    assert supporter not in seen  # would be a cycle
                    seen.add(supporter)
                    supporter = edges[supporter]


class TestPredicateFilter:
    def triple(self, subject, predicate, obj,
               s_box=(10, 10, 10, 10), o_box=(5, 15, 30, 20)) -> RelationTriple:
        return RelationTriple(subject, predicate, obj, s_box, o_box)

    def test_sane_on_kept(self):
        kept = filter_support_predicates([self.triple("cup", "on", "table")])
        assert len(kept) == 1

    def test_non_support_predicate_dropped(self):
        assert filter_support_predicates([self.triple("cup", "next to", "table")]) == []

    def test_weight_rule_drops_inversion(self):
        assert filter_support_predicates([self.triple("table", "on", "cup")]) == []

    def test_same_category_dropped(self):
        assert filter_support_predicates([self.triple("chair", "on", "chair")]) == []

    def test_whitelisted_same_category_kept(self):
        assert len(filter_support_predicates([self.triple("box", "on", "box")])) == 1

    def test_impossible_surface_dropped(self):
        assert filter_support_predicates([self.triple("cup", "on", "ceiling")]) == []

    def test_spatial_sanity_bottom_outside_span(self):
        bad = self.triple("cup", "on", "table", s_box=(10, 100, 10, 10), o_box=(5, 15, 30, 20))
        assert filter_support_predicates([bad]) == []

    def test_spatial_sanity_no_horizontal_overlap(self):
        bad = self.triple("cup", "on", "table", s_box=(100, 10, 10, 10), o_box=(5, 15, 30, 20))
        assert filter_support_predicates([bad]) == []


class TestCooccurrence:
    def test_perfect_cooccurrence_npmi_one(self):
        scenes = [
            make_scene(f"s{i}", [corpus_obj("a", 1, 1, 0.5), corpus_obj("b", 2, 2, 0.5)])
            for i in range(10)
        ]
        edges, _ = compute_cooccurrence(scenes)
        edge = edges["a"]["b"]
        assert edge.p_b_given_a == 1.0
        assert edge.npmi == 1.0

    def test_independent_categories_npmi_zero(self):
        scenes = []
        for i in range(40):
            objects = []
            if i < 20:
                objects.append(corpus_obj("a", 1, 1, 0.5))
            if 10 <= i < 30:
                objects.append(corpus_obj("b", 2, 2, 0.5))
            scenes.append(make_scene(f"s{i}", objects))
        edges, _ = compute_cooccurrence(scenes)
        edge = edges["a"]["b"]
        assert edge.count == 10
        assert edge.p_b_given_a == 0.5
        assert abs(edge.npmi) < 1e-9

    def test_distance_threshold_gates_pairs(self):
        cfg = BuilderConfig(cooccur_distance_threshold=2.0)
        near = make_scene("near", [corpus_obj("a", 1, 1, 0.5), corpus_obj("b", 2, 1, 0.5)])
        far = make_scene("far", [corpus_obj("a", 1, 1, 0.5), corpus_obj("b", 7, 7, 0.5)])
        edges, _ = compute_cooccurrence([near, far], cfg)
        edge = edges["a"]["b"]
        assert edge.count == 1   # only the near scene
        assert edge.p_b_given_a == 0.5

    def test_conditional_probability_hand_count(self):
        scenes = [
            make_scene("s0", [corpus_obj("a", 1, 1, 0.5), corpus_obj("b", 2, 2, 0.5)]),
            make_scene("s1", [corpus_obj("a", 1, 1, 0.5)]),
        ]
        edges, _ = compute_cooccurrence(scenes)
        assert edges["a"]["b"].p_b_given_a == 0.5
        assert edges["b"]["a"].p_b_given_a == 1.0

    def test_per_room_conditioning(self):
        scenes = [
            make_scene("s0", [corpus_obj("a", 1, 1, 0.5), corpus_obj("b", 2, 2, 0.5)], room="bedroom"),
            make_scene("s1", [corpus_obj("a", 1, 1, 0.5)], room="livingroom"),
        ]
        _, by_room = compute_cooccurrence(scenes)
        assert by_room["bedroom"]["a"]["b"].p_b_given_a == 1.0  # marginals restricted to bedroom
        assert "livingroom" not in by_room

    def test_cap_and_sort(self):
        # Scene j holds the hub plus spokes 0..j, so spoke i co-occurs with
        # the hub in 60 - i scenes: 60 distinct counts, capped at the top 50.
        corpus = []
        for j in range(60):
            objs = [corpus_obj("hub", 1, 1, 0.5)]
            objs += [corpus_obj(f"spoke{i:02d}", 2, 1, 0.5) for i in range(j + 1)]
            corpus.append(make_scene(f"s{j}", objs))
        edges, _ = compute_cooccurrence(corpus)
        hub_edges = edges["hub"]
        assert len(hub_edges) == 50
        counts = [e.count for e in hub_edges.values()]
        assert counts == sorted(counts, reverse=True)
        assert counts[0] == 60 and counts[-1] == 11
        assert "spoke50" not in hub_edges  # count 10 fell past the cap

    def test_npmi_in_bounds_everywhere(self):
        edges, by_room = compute_cooccurrence(synth_corpus(5))
        for emap in list(edges.values()) + [m for room in by_room.values() for m in room.values()]:
            for edge in emap.values():
                assert -1.0 <= edge.npmi <= 1.0
                assert 0.0 < edge.p_b_given_a <= 1.0


class TestOrientationStats:
    def test_back_to_wall_flush_counted(self):
        # sofa against the bottom wall, facing in (yaw 90 = inward normal)
        scene = make_scene("s", [corpus_obj("sofa", 4.0, 0.5, 0.4, w=2.0, h=0.8, d=0.8, yaw=90.0)])
        stats = compute_orientation_stats([scene])["sofa"]
        assert stats.back_to_wall.fraction == 1.0
        assert stats.back_to_wall.mean_angle_deg == pytest.approx(0.0)

    def test_facing_away_from_centroid_not_counted(self):
        # centroid of the square room is (4, 4); chair at (4, 2) facing away (270)
        scene = make_scene("s", [corpus_obj("chair", 4.0, 2.0, 0.25, w=0.5, h=0.5, d=0.5, yaw=270.0)])
        stats = compute_orientation_stats([scene])["chair"]
        assert stats.faces_center.fraction == 0.0
        assert stats.faces_center.mean_angle_deg == pytest.approx(180.0)

    def test_faces_pair_hand_fixture(self):
        # chair 1 m from table, facing it at delta 30
        scene = make_scene("s", [
            corpus_obj("chair", 3.0, 4.0, 0.25, w=0.5, h=0.5, d=0.5, yaw=30.0),
            corpus_obj("table", 4.0, 4.0, 0.4, w=1.2, h=0.8, d=0.8),
        ])
        stats = compute_orientation_stats([scene])["chair"]
        pair = stats.faces_pair["table"]
        assert pair.n == 1
        assert pair.fraction == 1.0  # 30 <= 60
        assert pair.mean_angle_deg == pytest.approx(30.0)
        assert pair.mean_distance_m == pytest.approx(1.0)

    def test_pair_radius_limit(self):
        scene = make_scene("s", [
            corpus_obj("chair", 1.0, 1.0, 0.25, w=0.5, h=0.5, d=0.5),
            corpus_obj("table", 7.5, 1.0, 0.4, w=1.2, h=0.8, d=0.8),  # 6.5 m away
        ])
        stats = compute_orientation_stats([scene])["chair"]
        assert "table" not in stats.faces_pair


class TestBuildOntology:
    def test_empty_corpus_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        ontology = build_ontology([path])
        assert ontology.categories == {}
        save_ontology(ontology, tmp_path / "onto.json")  # valid file

    def test_shard_determinism(self, tmp_path):
        scenes = synth_corpus(42, n=50)
        outputs = []
        for shards in (1, 2, 8):
            shard_dir = tmp_path / f"shards{shards}"
            shard_dir.mkdir()
            paths = []
            for s in range(shards):
                path = shard_dir / f"part{s}.jsonl"
                save_corpus(scenes[s::shards], path)
                paths.append(path)
            ontology = build_ontology(paths)
            out = shard_dir / "onto.json"
            save_ontology(ontology, out)
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_parallel_build_identical(self, tmp_path):
        scenes = synth_corpus(43, n=24)
        paths = []
        for s in range(4):
            path = tmp_path / f"part{s}.jsonl"
            save_corpus(scenes[s::4], path)
            paths.append(path)
        seq = build_ontology(paths, jobs=1)
        par = build_ontology(paths, jobs=4)
        a, b = tmp_path / "seq.json", tmp_path / "par.json"
        save_ontology(seq, a)
        save_ontology(par, b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_records_skipped_and_reported(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        save_corpus(synth_corpus(7, n=3), path)
        with open(path, "a", encoding="utf-8") as fh:
            fh.write('{"scene_id": "bad", "room_type": "x", "floor_polygon": [[0,0],[1,0]]}\n')
            fh.write("not json\n")
        ontology = build_ontology([path])
        assert ontology.meta["scene_count"] == 3
        assert len(ontology.meta["skipped_records"]) == 2

    def test_merge_associativity(self):
        scenes = synth_corpus(9, n=12)
        cfg = BuilderConfig()
        chunks = [scenes[0:4], scenes[4:8], scenes[8:12]]

        def stats_for(chunk):
            p = PartialStats()
            for s in chunk:
                p.add_scene(s, cfg)
            return p

        left = stats_for(chunks[0])
        left.merge(stats_for(chunks[1]))
        left.merge(stats_for(chunks[2]))

        right = stats_for(chunks[2])
        right.merge(stats_for(chunks[0]))
        right.merge(stats_for(chunks[1]))

        from layouteval.ontology import ontology_to_dict

        assert ontology_to_dict(left.finalize(cfg)) == ontology_to_dict(right.finalize(cfg))

    def test_relations_feed_support(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        save_corpus([make_scene("s", [corpus_obj("cup", 1, 1, 0.05, w=0.1, h=0.1, d=0.1)])], path)
        triples = [RelationTriple("cup", "on", "table", (10, 10, 10, 10), (5, 15, 30, 20))]
        ontology = build_ontology([path], relations=triples)
        shares = ontology.categories["cup"].support_surfaces
        assert set(shares) == {"floor", "table"}
        assert shares["table"].count == 1

    def test_requires_at_least_one_path(self):
        with pytest.raises(ValueError):
            build_ontology([])


class TestSummarize:
    def test_positive_fraction_hand_count(self, tmp_path):
        from layouteval.ontology import CategoryEntry, CooccurEdge

        categories = {
            "a": CategoryEntry(cooccurrence={
                "b": CooccurEdge(3, 0.5, 0.5),
                "c": CooccurEdge(2, 0.5, -0.1),
                "d": CooccurEdge(1, 0.5, 0.2),
            }),
            "b": CategoryEntry(), "c": CategoryEntry(), "d": CategoryEntry(),
        }
        summary = summarize(Ontology(categories=categories))
        assert summary.edge_count == 3
        assert summary.npmi_positive_fraction == pytest.approx(2.0 / 3.0)

    def test_empty_ontology_header_only(self):
        summary = summarize(Ontology())
        assert summary.rows() == []

    def test_schema_has_all_three_panels(self):
        ontology = build_ontology_from_scenes(synth_corpus(13, n=8))
        summary = summarize(ontology)
        kinds = {row[0] for row in summary.rows()}
        assert kinds == {"totals", "category", "edge"}
        category_row = next(row for row in summary.rows() if row[0] == "category")
        assert len(category_row) == 11


def build_ontology_from_scenes(scenes) -> Ontology:
    cfg = BuilderConfig()
    stats = PartialStats()
    for scene in scenes:
        stats.add_scene(scene, cfg)
    return stats.finalize(cfg)
