import math

import pytest
from hypothesis import given, strategies as st

from proxsim.geometry import (
    Arena,
    Pose,
    SimConfig,
    VOI,
    Vec2,
    clamp_to_arena,
    normalize_angle,
)


class TestNormalizeAngle:
    @pytest.mark.parametrize("a,expected", [
        (0.0, 0.0),
        (3 * math.pi, math.pi),
        (-3 * math.pi / 2, math.pi / 2),
        (math.pi, math.pi),
        (-math.pi, math.pi),
    ])
    def test_examples(self, a, expected):
        assert normalize_angle(a) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(ValueError):
            normalize_angle(bad)

    @given(st.floats(-1e6, 1e6))
    def test_idempotent_and_in_range(self, a):
        r = normalize_angle(a)
        assert -math.pi < r <= math.pi
        assert normalize_angle(r) == r

    @given(st.floats(-100.0, 100.0))
    def test_congruent_mod_two_pi(self, a):
        r = normalize_angle(a)
        k = (a - r) / (2 * math.pi)
        assert abs(k - round(k)) < 1e-9


class TestClampToArena:
    arena = Arena(4.0, 4.0, 0.02)

    @pytest.mark.parametrize("p,expected", [
        (Vec2(2.0, 2.0), Vec2(2.0, 2.0)),
        (Vec2(-1.0, 2.0), Vec2(0.02, 2.0)),
        (Vec2(4.0, 4.0), Vec2(3.98, 3.98)),
    ])
    def test_examples(self, p, expected):
        assert clamp_to_arena(p, self.arena) == expected

    @given(st.floats(-10, 10), st.floats(-10, 10))
    def test_idempotent_and_bounded(self, x, y):
        q = clamp_to_arena(Vec2(x, y), self.arena)
        assert clamp_to_arena(q, self.arena) == q
        assert 0.02 <= q.x <= 3.98
        assert 0.02 <= q.y <= 3.98


class TestTypes:
    def test_pose_normalizes_heading(self):
        assert Pose(Vec2(0, 0), 3 * math.pi).heading == pytest.approx(math.pi)

    def test_arena_validation(self):
        with pytest.raises(ValueError):
            Arena(0.0, 4.0)
        with pytest.raises(ValueError):
            Arena(4.0, 4.0, safety_margin=2.0)

    def test_voi_validation(self):
        with pytest.raises(ValueError):
            VOI("a", Vec2(1, 1), radius=0.0)
        with pytest.raises(ValueError):
            VOI("a", Vec2(1, 1), prior=1.2)

    def test_voi_physical_position(self):
        v = VOI("a", Vec2(1, 1), physical_offset=Vec2(0.1, -0.2))
        assert v.physical_position() == Vec2(1.1, 0.8)
        assert VOI("b", Vec2(1, 1)).physical_position() == Vec2(1, 1)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(omega=1.5)
        with pytest.raises(ValueError):
            SimConfig(dt=0.0)
        with pytest.raises(ValueError):
            SimConfig(obstacle_radius_near=0.5, obstacle_radius_far=0.4)

    def test_vec2_arithmetic(self):
        assert Vec2(1, 2) + Vec2(3, 4) == Vec2(4, 6)
        assert Vec2(3, 4).norm() == pytest.approx(5.0)
        assert (Vec2(1, 2) * 2.0).y == 4.0
