"""Network physics: BPR latency, per-mode risks, aggregate totals, config IO."""

import numpy as np
import pytest

from fareopt.network import (
    ConfigError,
    FlowState,
    NetworkConfig,
    RailSpec,
    RoadSpec,
    WalkSpec,
    load_network,
    network_to_dict,
    rail_trip_risk,
    road_latency,
    taxi_trip_risk,
    total_latency,
    total_risk,
    validate_network_text,
    walk_trip_risk,
)

ROAD_1 = RoadSpec(free_flow_latency=30, capacity=900, car_cost=15, min_taxi_fare=9)
ROAD_2 = RoadSpec(free_flow_latency=45, capacity=600, car_cost=9, min_taxi_fare=5)
RAIL = RailSpec(latency=35, capacity=1500, fare=3, full_capacity_risk_rate=10)
WALK = WalkSpec(latency=120, risk_rate=1)


def case_study() -> NetworkConfig:
    return NetworkConfig(
        roads=(ROAD_1, ROAD_2), demand=3000, taxi_risk_rate=1,
        rail=RAIL, walk=WALK, bpr_alpha=0.15, bpr_beta=4,
    )


class TestRoadLatency:
    def test_free_flow(self):
        assert road_latency(ROAD_1, 0.15, 4, 0.0) == 30.0

    def test_at_capacity(self):
        # 30 * (1 + 0.15 * 1^4)
        assert abs(road_latency(ROAD_1, 0.15, 4, 900.0) - 34.5) <= 1e-12

    def test_overloaded_road(self):
        # 45 * (1 + 0.15 * 2^4) = 45 * 3.4
        assert abs(road_latency(ROAD_2, 0.15, 4, 1200.0) - 153.0) <= 1e-12

    def test_negative_flow_rejected(self):
        with pytest.raises(ValueError):
            road_latency(ROAD_1, 0.15, 4, -1.0)

    def test_strictly_increasing(self):
        flows = np.linspace(0, 3000, 400)
        latencies = [road_latency(ROAD_1, 0.15, 4, f) for f in flows]
        assert all(b > a for a, b in zip(latencies, latencies[1:]))
        assert latencies[0] == ROAD_1.free_flow_latency


class TestTripRisks:
    def test_taxi_risk_is_rate_times_latency(self):
        assert taxi_trip_risk(1.0, 34.5) == 34.5
        assert taxi_trip_risk(1.0, 30.0) == 30.0

    def test_taxi_zero_rate(self):
        assert taxi_trip_risk(0.0, 100.0) == 0.0

    def test_taxi_requires_positive_latency(self):
        with pytest.raises(ValueError):
            taxi_trip_risk(1.0, 0.0)

    def test_rail_full_capacity(self):
        assert rail_trip_risk(RAIL, 1500.0) == 350.0

    def test_rail_empty_train(self):
        assert rail_trip_risk(RAIL, 0.0) == 0.0

    def test_rail_half_capacity_halves_risk(self):
        assert rail_trip_risk(RAIL, 750.0) == 175.0

    def test_walk(self):
        assert walk_trip_risk(WALK) == 120.0


class TestAggregates:
    def test_zero_flows(self):
        config = case_study()
        flows = FlowState(np.zeros(2), np.zeros(2))
        assert total_latency(config, flows) == 0.0
        assert total_risk(config, flows) == 0.0

    def test_walk_only_latency(self):
        config = case_study()
        flows = FlowState(np.zeros(2), np.zeros(2), walk_flow=100.0)
        assert total_latency(config, flows) == 100.0 * 120.0

    def test_congested_road_latency(self):
        config = case_study()
        flows = FlowState(np.array([900.0, 0.0]), np.zeros(2))
        assert abs(total_latency(config, flows) - 900 * 34.5) <= 1e-9

    def test_cars_are_risk_free(self):
        config = case_study()
        flows = FlowState(np.array([500.0, 700.0]), np.zeros(2))
        assert total_risk(config, flows) == 0.0

    def test_rail_risk_at_capacity(self):
        config = case_study()
        flows = FlowState(np.zeros(2), np.zeros(2), rail_flow=1500.0)
        assert abs(total_risk(config, flows) - 350.0 * 1500.0) <= 1e-9

    def test_rail_risk_quadratic(self):
        config = case_study()
        risk_1 = total_risk(config, FlowState(np.zeros(2), np.zeros(2), rail_flow=400.0))
        risk_2 = total_risk(config, FlowState(np.zeros(2), np.zeros(2), rail_flow=800.0))
        assert abs(risk_2 - 4.0 * risk_1) <= 1e-12 * risk_2

    def test_rail_risk_degree_two_homogeneous(self):
        config = case_study()
        rng = np.random.default_rng(3)
        for _ in range(50):
            base = rng.uniform(0, 1500)
            k = rng.uniform(0, 2)
            risk_base = total_risk(config, FlowState(np.zeros(2), np.zeros(2), rail_flow=base))
            risk_scaled = total_risk(
                config, FlowState(np.zeros(2), np.zeros(2), rail_flow=k * base)
            )
            assert abs(risk_scaled - k * k * risk_base) <= 1e-9 * max(1.0, risk_base)

    def test_zero_risk_rates_mean_zero_risk(self):
        config = NetworkConfig(
            roads=(ROAD_1, ROAD_2), demand=3000, taxi_risk_rate=0,
            rail=RailSpec(35, 1500, 3, 0), walk=WalkSpec(120, 0),
        )
        rng = np.random.default_rng(4)
        for _ in range(30):
            flows = FlowState(rng.uniform(0, 900, 2), rng.uniform(0, 900, 2),
                              rail_flow=rng.uniform(0, 1500), walk_flow=rng.uniform(0, 500))
            assert total_risk(config, flows) == 0.0

    def test_additive_over_disjoint_assignments(self):
        config = case_study()
        # disjoint: one assignment rides rail, the other walks
        rail_only = FlowState(np.zeros(2), np.zeros(2), rail_flow=600.0)
        walk_only = FlowState(np.zeros(2), np.zeros(2), walk_flow=300.0)
        both = FlowState(np.zeros(2), np.zeros(2), rail_flow=600.0, walk_flow=300.0)
        for fn in (total_latency, total_risk):
            assert abs(fn(config, both) - fn(config, rail_only) - fn(config, walk_only)) <= 1e-9


class TestTypes:
    def test_road_invariants(self):
        with pytest.raises(ValueError):
            RoadSpec(0, 900, 15, 9)
        with pytest.raises(ValueError):
            RoadSpec(30, -1, 15, 9)
        with pytest.raises(ValueError):
            RoadSpec(30, 900, -0.1, 9)

    def test_network_needs_a_road(self):
        with pytest.raises(ValueError):
            NetworkConfig(roads=(), demand=100, taxi_risk_rate=1)

    def test_flow_state_rejects_negative(self):
        with pytest.raises(ValueError):
            FlowState(np.array([-1.0]), np.array([0.0]))

    def test_absent_mode_must_have_zero_flow(self):
        config = NetworkConfig(roads=(ROAD_1,), demand=100, taxi_risk_rate=1)
        with pytest.raises(ValueError):
            total_latency(config, FlowState(np.zeros(1), np.zeros(1), rail_flow=5.0))


class TestConfigIO:
    def test_case_study_file_valid(self, casestudy_path):
        config = load_network(casestudy_path)
        assert config.n_roads == 2
        assert config.roads[0].free_flow_latency == 30
        assert config.roads[1].free_flow_latency == 45
        assert config.rail.capacity == 1500
        assert config.walk.latency == 120
        assert config.demand == 3000

    def test_round_trip(self, casestudy_path):
        config = load_network(casestudy_path)
        doc = network_to_dict(config)
        import json
        reparsed, problems = validate_network_text(json.dumps(doc))
        assert problems == []
        assert reparsed == config

    def test_missing_rail_is_valid(self):
        text = """{"roads": [{"free_flow_latency": 30, "capacity": 900,
                    "car_cost": 15, "min_taxi_fare": 9}],
                   "taxi_risk_rate": 1, "demand": 100}"""
        config, problems = validate_network_text(text)
        assert problems == []
        assert config.rail is None and config.walk is None
        assert config.bpr_alpha == 0.15 and config.bpr_beta == 4.0

    def test_negative_capacity_names_field_and_line(self):
        text = '{\n "roads": [\n  {"free_flow_latency": 30,\n   "capacity": -900,\n   "car_cost": 15, "min_taxi_fare": 9}],\n "taxi_risk_rate": 1, "demand": 100}'
        config, problems = validate_network_text(text, source_name="net.json")
        assert config is None
        assert len(problems) == 1
        assert "capacity" in problems[0]
        assert "net.json:4" in problems[0]

    def test_all_errors_enumerated_not_first_only(self):
        text = '{"roads": [], "alpha": -1, "taxi_risk_rate": -2, "demand": 0}'
        config, problems = validate_network_text(text)
        assert config is None
        assert len(problems) == 4

    def test_unknown_key_rejected(self):
        text = """{"roads": [{"free_flow_latency": 30, "capacity": 900,
                    "car_cost": 15, "min_taxi_fare": 9}],
                   "taxi_risk_rate": 1, "demand": 100, "extra": 1}"""
        config, problems = validate_network_text(text)
        assert config is None
        assert any("extra" in p for p in problems)

    def test_config_error_collects_problems(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"roads": [], "demand": 0}')
        with pytest.raises(ConfigError) as err:
            load_network(path)
        assert len(err.value.problems) >= 2
