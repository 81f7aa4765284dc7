import math

import pytest

from depotopt import (
    DepotPlacement,
    SolveConfig,
    alternate,
    generate_instance,
    kmeans_init,
    load_gps18,
    placement_distance,
)

from conftest import make_instance, orbit, placement_of, sat


class TestKmeansInit:
    def test_identical_orbits_collapse(self):
        sats = [sat(1.0, 55.0, 120.0) for _ in range(6)]
        inst = make_instance(sats, n_d=3, n_v=1)
        placement = kmeans_init(inst, seed=3)
        for o in placement:
            assert o.a == pytest.approx(1.0, abs=1e-12)
            assert math.degrees(o.i) == pytest.approx(55.0, abs=1e-9)
            assert math.degrees(o.raan) == pytest.approx(120.0, abs=1e-9)

    def test_node_line_wraparound(self):
        inst = make_instance([sat(1.0, 55.0, 1.0), sat(1.0, 55.0, 359.0)])
        placement = kmeans_init(inst, k=1, seed=0)
        raan = math.degrees(placement[0].raan)
        assert min(raan, 360.0 - raan) < 1.5  # near zero, never near 180

    def test_gps_centroids_sane(self):
        inst = load_gps18()
        placement = kmeans_init(inst, seed=0)
        raans = sorted(math.degrees(o.raan) for o in placement)
        for o in placement:
            assert 26_500.0 < inst.scale.to_km(o.a) < 26_620.0
            assert 50.0 < math.degrees(o.i) < 60.0
        assert raans[1] - raans[0] > 30.0 and raans[2] - raans[1] > 30.0

    def test_deterministic(self):
        inst = generate_instance(n_d=3, n_t=12, seed=8)
        a = kmeans_init(inst, seed=5)
        b = kmeans_init(inst, seed=5)
        assert a.orbits == b.orbits

    def test_too_few_satellites(self):
        inst = make_instance([sat()], n_d=1)
        with pytest.raises(ValueError):
            kmeans_init(inst, k=2, seed=0)


class TestPlacementDistance:
    def test_identical(self):
        p = placement_of(orbit(1.0, 55.0, 10.0))
        assert placement_distance(p, p) == 0.0

    def test_full_turn_wraps(self):
        p1 = placement_of(orbit(1.0, 55.0, 0.0))
        p2 = placement_of(orbit(1.0, 55.0, 360.0))
        assert placement_distance(p1, p2) == pytest.approx(0.0, abs=1e-12)

    def test_pure_radius_offset(self):
        p1 = placement_of(orbit(1.0, 55.0, 10.0))
        p2 = placement_of(orbit(1.1, 55.0, 10.0))
        assert placement_distance(p1, p2) == pytest.approx(0.1, abs=1e-12)

    def test_mismatched_counts(self):
        p1 = placement_of(orbit())
        p2 = placement_of(orbit(), orbit())
        with pytest.raises(ValueError):
            placement_distance(p1, p2)


class TestAlternate:
    def test_fixed_point_returns_immediately(self):
        inst = generate_instance(n_d=2, n_t=4, seed=17, n_v=2)
        cfg = SolveConfig(max_outer_iter=20, milp_time_limit_s=20.0, seed=17)
        first = alternate(inst, kmeans_init(inst, seed=17), cfg)
        assert first.outcome == "converged"
        again = alternate(inst, first.final_placement, cfg)
        assert again.outcome == "converged"
        assert again.reported_iterations == 0
        assert again.final_emleo == pytest.approx(first.final_emleo, abs=1e-6)

    def test_monotone_and_bounded_by_initial(self):
        for seed in range(6):
            inst = generate_instance(n_d=2, n_t=4, seed=50 + seed, n_v=2)
            cfg = SolveConfig(max_outer_iter=20, milp_time_limit_s=20.0, seed=seed)
            rep = alternate(inst, kmeans_init(inst, seed=seed), cfg)
            assert rep.outcome in ("converged", "max_iterations")
            values = []
            for rec in rep.iterations:
                values.append(rec.milp_objective)
                if rec.nlp_objective is not None:
                    values.append(rec.nlp_objective)
            assert all(b <= a + 1e-6 for a, b in zip(values, values[1:]))
            assert rep.final_emleo <= rep.initial_emleo + 1e-6

    def test_evaluation_only_mode(self):
        inst = generate_instance(n_d=2, n_t=4, seed=23, n_v=2)
        cfg = SolveConfig(max_outer_iter=0, milp_time_limit_s=20.0, seed=23)
        rep = alternate(inst, kmeans_init(inst, seed=23), cfg)
        assert rep.outcome == "evaluation"
        assert rep.reported_iterations == 0
        assert rep.final_emleo == rep.initial_emleo
        assert rep.final_routing is not None

    def test_deterministic_report(self):
        inst = generate_instance(n_d=2, n_t=4, seed=77, n_v=2)
        cfg = SolveConfig(max_outer_iter=20, milp_time_limit_s=None, seed=77)
        a = alternate(inst, kmeans_init(inst, seed=77), cfg)
        b = alternate(inst, kmeans_init(inst, seed=77), cfg)
        assert a.final_emleo == b.final_emleo
        assert a.reported_iterations == b.reported_iterations
        assert a.final_placement.orbits == b.final_placement.orbits

    def test_iteration_count_convention(self):
        # an instance whose clustering start is already a fixed point
        # reports zero iterations
        sats = [sat(1.0, 55.0, 10.0, payload=100.0) for _ in range(2)]
        inst = make_instance(sats, n_d=1, n_v=2)
        cfg = SolveConfig(max_outer_iter=10, milp_time_limit_s=20.0, seed=0)
        rep = alternate(inst, kmeans_init(inst, seed=0), cfg)
        assert rep.outcome == "converged"
        assert rep.reported_iterations == 0

    def test_infeasible_initial_guess_reported(self):
        # dry masses alone violate the cap at the clustering altitude
        sats = [sat(1.0, 55.0, 0.0), sat(1.0, 55.0, 40.0)]
        inst = make_instance(sats, n_d=1, n_v=1, m_max_l=2001.0)
        cfg = SolveConfig(max_outer_iter=5, milp_time_limit_s=10.0, seed=0)
        rep = alternate(inst, kmeans_init(inst, seed=0), cfg)
        assert rep.outcome == "no_incumbent"
        assert rep.failure_reason
