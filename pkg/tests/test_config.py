import numpy as np
import pytest

from cdtransport.config import (
    CANONICAL_INITIAL_POSITIONS,
    dump_flat,
    format_float,
    hover_scenario,
    load,
    loads,
    canonical_scenario,
    parse_flat,
    pull_inside,
)
from cdtransport.errors import ConfigError
from cdtransport.guidance import compute_weights


def test_format_float_round_trip(rng):
    for x in rng.normal(size=50) * 10.0 ** rng.integers(-8, 8, size=50):
        assert float(format_float(x)) == x
        assert float(format_float(x, shortest=True)) == x
    assert format_float(0.468, shortest=True) == "0.468"
    assert format_float(100.0, shortest=True) == "100"


def test_format_rejects_nonfinite():
    with pytest.raises(ValueError):
        format_float(float("nan"))


def test_parse_flat_comments_and_lines():
    raw = parse_flat("# header\n\na.b = 1\nc = [1, 2]\nname = \"x\"\n")
    assert raw == {"a.b": (1, 3), "c": ([1, 2], 4), "name": ("x", 5)}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("a.b 1", ":1: expected 'key = value'"),
        ("a = 1\na = 2", ":2: duplicate key 'a'"),
        ("a = [1,", ":1: field 'a': invalid value"),
    ],
)
def test_parse_errors_carry_line(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_flat(text, "f.cfg")


def test_dump_flat_comments():
    text = dump_flat([("a", 1.5), ("b", True)], comments={"a": "first"})
    assert text == "# first\na = 1.5\nb = true\n"


class TestCanonicalScenario:
    def test_valid_and_round_trips(self):
        cfg = canonical_scenario()
        assert cfg.violations() == []
        again = loads(cfg.dumps())
        assert again.dumps() == cfg.dumps()
        np.testing.assert_array_equal(again.positions, cfg.positions)
        np.testing.assert_array_equal(again.noise.E, cfg.noise.E)

    def test_table_constants_in_file(self):
        text = canonical_scenario().dumps()
        for line in ("quad.m = 0.468", "quad.izz = 0.008801", "quad.ax = 0.25",
                     "payload.mass = 10", "payload.drag = [4, 4, 4]", "fleet.count = 20"):
            assert line in text
        assert "cables.k = [" + ", ".join(["100"] * 20) + "]" in text

    def test_only_one_follower_moved(self):
        tri0 = CANONICAL_INITIAL_POSITIONS[:3]
        moved = pull_inside(CANONICAL_INITIAL_POSITIONS, tri0)
        changed = np.flatnonzero(np.any(moved != CANONICAL_INITIAL_POSITIONS, axis=1))
        assert changed.tolist() == [5]
        assert np.linalg.norm(moved[5] - CANONICAL_INITIAL_POSITIONS[5]) < 0.1
        assert compute_weights(moved[5], tri0).min() == pytest.approx(1e-3, rel=1e-2)

    def test_table_follower_six_is_outside(self):
        cfg = canonical_scenario().with_flags(positions=CANONICAL_INITIAL_POSITIONS.copy())
        assert any("follower 6" in v for v in cfg.violations())


class TestViolations:
    def test_collinear_waypoint_names_time(self):
        cfg = canonical_scenario()
        text = cfg.dumps().replace(
            "guidance.leader_waypoints = [[[-20, -20, 50], [0, 20, 50], [20, -18, 50]], "
            "[[-15, 0, 50], [0, 35, 50], [15, 10, 50]]]",
            "guidance.leader_waypoints = [[[-20, -20, 50], [0, 20, 50], [20, -18, 50]], "
            "[[0, 0, 50], [1, 1, 50], [2, 2, 50]]]",
        )
        assert text != cfg.dumps()
        v = loads(text).violations()
        assert any("t=20 s" in item for item in v)

    def test_follower_outside(self):
        pos = canonical_scenario().positions.copy()
        pos[4] = [100.0, 100.0, 50.0]
        v = canonical_scenario().with_flags(positions=pos).violations()
        assert any("follower 5" in item for item in v)

    def test_too_few_agents_and_bad_steps(self):
        cfg = canonical_scenario()
        bad = cfg.with_flags(positions=cfg.positions[:3], cable_k=cfg.cable_k[:3], dt_sim=0.02)
        v = bad.violations()
        assert any("at least 4 agents" in item for item in v)
        assert any("sim.dt must not exceed" in item for item in v)

    def test_duplicate_leaders(self):
        v = canonical_scenario().with_flags(leaders=(0, 0, 2)).violations()
        assert any("distinct" in item for item in v)

    def test_validate_raises_with_list(self):
        with pytest.raises(ConfigError) as info:
            canonical_scenario().with_flags(hang_depth=-1.0).validate()
        assert "payload.hang_depth must be positive" in info.value.violations

    def test_hover_single_agent_allowed(self):
        assert hover_scenario().violations() == []


class TestLoads:
    def test_unknown_key(self):
        text = hover_scenario().dumps() + "bogus.key = 1\n"
        with pytest.raises(ConfigError, match="unknown field 'bogus.key'"):
            loads(text, "h.cfg")

    def test_type_error_context(self):
        text = hover_scenario().dumps().replace("sim.seed = 0", "sim.seed = 1.5")
        with pytest.raises(ConfigError, match=r"h\.cfg:\d+: field 'sim.seed'"):
            loads(text, "h.cfg")

    def test_overrides(self):
        cfg = loads(hover_scenario().dumps(), overrides={"lqg.literal_innovation": True, "sim.seed": 7})
        assert cfg.literal_innovation and cfg.seed == 7

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load(tmp_path / "nope.cfg")

    def test_one_based_leaders(self):
        text = canonical_scenario().dumps()
        assert "guidance.leaders = [1, 2, 3]" in text
        assert loads(text).leaders == (0, 1, 2)
