import pytest

from proxsim.geometry import Pose, VOI, Vec2
from proxsim.intention import angular_offset
from proxsim.walker import Walker, WalkerParams, default_personas

DT = 1.0 / 75.0


def run_to_contact(walker, max_t=60.0):
    t = 0.0
    states = []
    while t < max_t:
        t += DT
        states.append(walker.step(t, DT))
        if walker.arrived:
            return t, states
    raise AssertionError("walker never arrived")


class TestWalker:
    start = Pose(Vec2(1.0, 1.0), 0.0)
    target = VOI("target", Vec2(3.0, 1.0), 0.05)

    def test_scan_phase_holds_position(self):
        walker = Walker([self.target], self.start, WalkerParams(), seed=1)
        headings = set()
        for k in range(1, int(walker.decision_time / DT)):
            s = walker.step(k * DT, DT)
            assert s.pose.position == self.start.position
            headings.add(round(s.pose.heading, 6))
        assert len(headings) > 10  # the gaze sweeps

    def test_arrival_time_matches_kinematics(self):
        params = WalkerParams(walk_speed=1.0, gaze_noise=0.0, glance_rate=0.0)
        walker = Walker([self.target], self.start, params, seed=3)
        t, _ = run_to_contact(walker)
        distance = 2.0 - 0.05  # start gap minus the contact ring
        turn_time = 0.05  # already facing +x up to the commit threshold
        expected = walker.decision_time + distance / 1.0
        assert t == pytest.approx(expected, abs=0.5)

    def test_faces_target_at_contact(self):
        for seed in range(5):
            walker = Walker([self.target], self.start, WalkerParams(), seed=seed)
            _, states = run_to_contact(walker)
            final = states[-1]
            assert angular_offset(final.pose, self.target) == 0.0
            gap = final.pose.position.distance_to(self.target.position)
            assert gap == pytest.approx(self.target.radius, abs=1e-9)

    def test_deterministic_in_seed(self):
        def trajectory():
            walker = Walker([self.target], self.start, WalkerParams(), seed=42)
            _, states = run_to_contact(walker)
            return [(s.pose.position.x, s.pose.position.y, s.pose.heading) for s in states]

        assert trajectory() == trajectory()

    def test_different_seeds_differ(self):
        def arrival(seed):
            walker = Walker([self.target], self.start, WalkerParams(), seed=seed)
            t, _ = run_to_contact(walker)
            return t

        assert len({round(arrival(s), 3) for s in range(4)}) > 1

    def test_scan_ends_on_target(self):
        distractors = [VOI(f"d{i}", Vec2(1.0 + i * 0.5, 3.0), 0.05) for i in range(3)]
        walker = Walker([self.target, *distractors], self.start, WalkerParams(), seed=9)
        assert walker.scan_points[-1] == self.target.position

    def test_glances_happen_mid_walk(self):
        params = WalkerParams(glance_rate=5.0, gaze_noise=0.0)
        distractor = VOI("d", Vec2(2.0, 3.0), 0.05)
        walker = Walker([self.target, distractor], self.start, params, seed=5)
        _, states = run_to_contact(walker)
        walk_states = [s for s in states if s.pose.position != self.start.position]
        off_axis = [s for s in walk_states if abs(s.pose.heading) > 0.4]
        assert off_axis  # gaze left the target bearing at least once

    def test_contact_radius_override(self):
        params = WalkerParams(contact_radius=0.15, gaze_noise=0.0, glance_rate=0.0)
        walker = Walker([self.target], self.start, params, seed=1)
        _, states = run_to_contact(walker)
        gap = states[-1].pose.position.distance_to(self.target.position)
        assert gap == pytest.approx(0.15, abs=1e-9)

    def test_personas_are_valid_and_distinct(self):
        personas = default_personas()
        assert len(personas) == 6
        assert all(p.walk_speed <= 1.0 for p in personas)
        assert len({p.walk_speed for p in personas}) > 1
