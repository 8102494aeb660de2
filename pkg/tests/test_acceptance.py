"""Acceptance suite: one test per release criterion, at the stated tolerance.

Run with `pytest tests/test_acceptance.py -v -s` to see one [PASS]/[FAIL]
line per criterion. The heavyweight sweep corpora are computed once per
session and shared across criteria.
"""

import math
import time

import pytest

from proxsim.geometry import Arena, Pose, SimConfig, UserState, VOI, Vec2
from proxsim.engine import SimEngine
from proxsim.harness import (
    SweepResult,
    derive_seed,
    generate_trial,
    replay_trace,
    run_sweep,
    run_trial,
    summarize,
    two_phase_sweep,
)
from proxsim.intention import (
    CommandPosition,
    WeightEntry,
    WeightVector,
    apply_prior,
    apply_stickiness,
    command_position,
    distance_score,
    orientation_score,
    raw_weight,
)
from proxsim.persistence import Scenario, load_trace, save_trace, write_results
from proxsim.robot import STATUS_TRACKING_LOSS
from proxsim.service import LiveSession
from proxsim.service.protocol import RecordStartMessage, SteerMessage
from proxsim.walker import WalkerParams, default_personas

from test_proxy import dense_reference, detour_cases

BASE_SEED = 2026
CONDITIONS = [0, 1, 2, 3, 4]
BLOCKS = 10
ARENA = Arena()
CONFIG = SimConfig()
PAPER_OMEGA = 0.175


def report(name, detail):
    print(f"\n[PASS] {name}: {detail}")


# ---------------------------------------------------------------------------
# shared corpora
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def sweep_run():
    t0 = time.perf_counter()
    sweep = two_phase_sweep(CONDITIONS, BLOCKS, BASE_SEED, CONFIG, jobs=2)
    return sweep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def single_voi_run():
    t0 = time.perf_counter()
    sweep = run_sweep([PAPER_OMEGA], [0], 50, derive_seed(BASE_SEED, "single"),
                      CONFIG, jobs=2)
    return sweep, time.perf_counter() - t0


@pytest.fixture(scope="module")
def prior_runs():
    # The prior experiment follows the original protocol: the reference
    # omega, target prior 0.75, distractors splitting the remainder.
    base = run_sweep([PAPER_OMEGA], CONDITIONS, BLOCKS, BASE_SEED, CONFIG, jobs=2)
    prior = run_sweep([PAPER_OMEGA], CONDITIONS, BLOCKS, BASE_SEED, CONFIG,
                      target_prior=0.75, jobs=2)
    return base, prior


# ---------------------------------------------------------------------------
# criterion 1: formula exactness
# ---------------------------------------------------------------------------

class TestFormulaExactness:
    def test_closed_form_table(self):
        t0 = time.perf_counter()
        tol = 1e-9
        checks = 0

        def close(a, b):
            nonlocal checks
            checks += 1
            assert abs(a - b) <= tol, f"{a} != {b}"

        # distance score 1/(1+d)
        for d in (0.0, 0.5, 1.0, 2.0, 3.0):
            close(distance_score(d), 1.0 / (1.0 + d))
        # orientation score e^(cos(theta)-1)
        for theta in (0.0, 0.3, math.pi / 2, 2.0, math.pi):
            close(orientation_score(theta), math.exp(math.cos(theta) - 1.0))
        # blended weight
        for d, theta, omega in (
            (0.0, 0.0, 0.175), (1.0, math.pi / 2, 0.175), (1.0, math.pi / 2, 1.0),
            (2.0, 1.0, 0.0), (0.5, 2.0, 0.6),
        ):
            expected = omega / (1.0 + d) + (1.0 - omega) * math.exp(math.cos(theta) - 1.0)
            close(raw_weight(d, theta, omega), expected)
        # stickiness rounding
        close(apply_stickiness(0.81, 0.8), 1.0)
        close(apply_stickiness(0.8, 0.8), 0.8)
        close(apply_stickiness(0.3, 0.8), 0.3)
        # prior scaling
        close(apply_prior(0.6, 1.0), 0.6)
        close(apply_prior(1.0, 0.75), 0.75)
        close(apply_prior(0.4, 0.0), 0.0)
        # weighted centroid of positions
        previous = CommandPosition(Vec2(2, 2))

        def centroid(pairs, positions):
            wv = WeightVector(tuple(WeightEntry(k, w, w) for k, w in pairs))
            vois = [VOI(k, p) for (k, _), p in zip(pairs, positions)]
            return command_position(wv, vois, previous, ARENA).target

        c = centroid([("a", 0.5), ("b", 0.5)], [Vec2(0.5, 2.0), Vec2(2.5, 2.0)])
        close(c.x, 1.5); close(c.y, 2.0)
        c = centroid([("a", 1.0), ("b", 0.0)], [Vec2(0.5, 2.0), Vec2(2.5, 2.0)])
        close(c.x, 0.5); close(c.y, 2.0)
        c = centroid([("a", 0.2), ("b", 0.6)], [Vec2(0.02, 2.0), Vec2(3.98, 2.0)])
        close(c.x, (0.2 * 0.02 + 0.6 * 3.98) / 0.8); close(c.y, 2.0)
        c = centroid([("a", 0.3), ("b", 0.2), ("c", 0.5)],
                     [Vec2(1.0, 1.0), Vec2(3.0, 1.0), Vec2(2.0, 3.0)])
        close(c.x, (0.3 * 1 + 0.2 * 3 + 0.5 * 2))
        close(c.y, (0.3 * 1 + 0.2 * 1 + 0.5 * 3))

        elapsed = time.perf_counter() - t0
        assert checks >= 20
        assert elapsed < 1.0
        report("formula exactness",
               f"{checks} closed-form cases within {tol} in {elapsed * 1000:.0f} ms")


# ---------------------------------------------------------------------------
# criterion 2: single-VOI success rate
# ---------------------------------------------------------------------------

class TestSingleVoiSuccess:
    def test_three_hundred_trials(self, single_voi_run):
        sweep, elapsed = single_voi_run
        rows = sweep.rows
        assert len(rows) == 300
        assert all(r["omega"] == PAPER_OMEGA for r in rows)
        rate = sum(1 for r in rows if r["success"]) / len(rows)
        assert rate >= 0.99
        assert elapsed < 120.0
        report("single-VOI success",
               f"{rate:.1%} over {len(rows)} trials in {elapsed:.0f} s")


# ---------------------------------------------------------------------------
# criterion 3: distractor monotonicity at the fitted omega
# ---------------------------------------------------------------------------

class TestDistractorMonotonicity:
    def test_non_increasing_up_to_ci_overlap(self, sweep_run):
        sweep, _ = sweep_run
        omega = sweep.fitted_omega()
        stats = {c: sweep.success_ci(omega, c) for c in CONDITIONS}
        for c in CONDITIONS:
            assert len(sweep._cell_rows(omega, c)) == BLOCKS * len(default_personas())
        for lo, hi in zip(CONDITIONS, CONDITIONS[1:]):
            rate_lo, hw_lo = stats[lo]
            rate_hi, hw_hi = stats[hi]
            assert rate_hi <= rate_lo + hw_lo + hw_hi, (
                f"success rose {rate_lo:.3f}->{rate_hi:.3f} from {lo} to {hi} "
                f"distractors beyond CI overlap"
            )
        detail = ", ".join(f"{c}: {stats[c][0]:.2f}±{stats[c][1]:.2f}" for c in CONDITIONS)
        report("distractor monotonicity", f"omega={omega:g}; {detail}")


# ---------------------------------------------------------------------------
# criterion 4: prior uplift on paired seeds
# ---------------------------------------------------------------------------

class TestPriorUplift:
    def test_never_lower_and_uplift_at_three_four(self, prior_runs):
        base, prior = prior_runs
        omega = base.omegas[0]
        uplifts = {}
        for c in CONDITIONS:
            b = base.success_rate(omega, c)
            p = prior.success_rate(omega, c)
            assert p >= b - 1e-12, f"prior lowered success at {c} distractors"
            uplifts[c] = p - b
        for c in (3, 4):
            assert uplifts[c] >= 0.05, (
                f"uplift at {c} distractors only {uplifts[c] * 100:.1f} pp"
            )
        detail = ", ".join(f"{c}: {uplifts[c] * 100:+.1f}pp" for c in CONDITIONS)
        report("prior uplift", f"omega={omega:g}; {detail}")


# ---------------------------------------------------------------------------
# criterion 5: two-phase omega sweep reproduction
# ---------------------------------------------------------------------------

class TestOmegaSweep:
    def test_two_phase_runs_and_reports(self, sweep_run):
        sweep, elapsed = sweep_run
        assert elapsed < 1800.0
        # broad phase at step 0.25 plus a refinement grid
        assert all(o in sweep.omegas for o in (0.0, 0.25, 0.5, 0.75, 1.0))
        assert any(o not in (0.0, 0.25, 0.5, 0.75, 1.0) for o in sweep.omegas)
        per_condition = {c: sweep.fitted_omega(c) for c in CONDITIONS}
        print(f"\n    argmax omega per condition: {per_condition}")
        print(f"    overall fitted omega: {sweep.fitted_omega():g} "
              f"(reference reported value: {PAPER_OMEGA})")
        report("omega sweep runtime",
               f"{len(sweep.omegas)} omegas x {len(CONDITIONS)} conditions "
               f"in {elapsed:.0f} s")

    def test_fitted_omega_interior_with_distractors(self, sweep_run):
        # Known-red: both evidence scores are bounded below in this arena
        # (closeness >= ~0.17, facing >= e^-2), so with >= 2 distractors the
        # weighted centroid keeps an irreducible ~0.3-0.8 m offset from the
        # target at contact. Success there is cancellation luck for every
        # omega (rates 0-5% with no omega structure across seeds), and the
        # accuracy tie-break weakly but consistently favors omega 0, so the
        # fit lands on the boundary. Asserted as specified regardless.
        sweep, _ = sweep_run
        multi = [c for c in CONDITIONS if c >= 2]
        sub = SweepResult(
            sweep.omegas, multi, sweep.blocks, sweep.base_seed,
            [r for r in sweep.rows if r["n_distractors"] in multi],
        )
        fitted = sub.fitted_omega()
        assert 0.0 < fitted < 1.0, (
            f"fitted omega over >=2-distractor conditions is {fitted:g}, "
            "not interior"
        )
        report("omega sweep interior argmax", f"fitted omega {fitted:g}")


# ---------------------------------------------------------------------------
# criterion 6: safety suite
# ---------------------------------------------------------------------------

class TestSafetySuite:
    def test_zero_violations_across_all_corpora(self, sweep_run, single_voi_run,
                                                prior_runs):
        rows = (sweep_run[0].rows + single_voi_run[0].rows
                + prior_runs[0].rows + prior_runs[1].rows)
        assert rows
        collisions = sum(1 for r in rows if r["collision"])
        speed = sum(r["speed_cap_violations"] for r in rows)
        margins = sum(r["margin_violations"] for r in rows)
        worst_pen = max(r["max_obstacle_penetration"] for r in rows)
        assert collisions == 0
        assert speed == 0
        assert margins == 0
        assert worst_pen <= 1e-9
        # the robot never enters the user disc beyond its own lag behind the
        # (never-penetrating) proxy, plus one frame of travel at full speed
        worst_deficit = max(r["robot_clearance_deficit"] for r in rows)
        assert worst_deficit <= 1.1 * CONFIG.dt + 1e-9
        # per-trial metric consistency
        for r in rows:
            if r["success"]:
                assert r["distance_at_contact"] <= CONFIG.success_distance
            if r["detection_time"] is not None:
                assert r["detection_time"] >= 0.0
        report("safety suite",
               f"{len(rows)} trials: 0 collisions, 0 speed-cap violations, "
               f"0 margin violations, max penetration {worst_pen:.1e}, "
               f"robot clearance deficit {max(0.0, worst_deficit):.1e}")

    def test_tracking_loss_halt_within_timeout_plus_frame(self):
        vois = [VOI("a", Vec2(3.0, 3.0), 0.05)]
        engine = SimEngine(ARENA, vois, CONFIG)
        dt = CONFIG.dt
        t = 0.0
        for _ in range(30):
            t += dt
            engine.step(UserState(Pose(Vec2(1.0, 1.0), 0.0), True, t))
        last_seen = t
        halted_at = None
        for _ in range(60):
            t += dt
            rec = engine.step(UserState(Pose(Vec2(1.0, 1.0), 0.0), False, t))
            if rec.robot.status == STATUS_TRACKING_LOSS:
                halted_at = t
                break
        assert halted_at is not None
        lag = halted_at - last_seen
        assert lag <= CONFIG.tracking_loss_timeout + dt + 1e-9
        assert rec.robot.velocity == Vec2(0.0, 0.0)
        report("tracking-loss halt", f"halted {lag * 1000:.0f} ms after last sighting")


# ---------------------------------------------------------------------------
# criterion 7: proxy-robot tracking analog
# ---------------------------------------------------------------------------

class TestProxyRobotTracking:
    def test_final_second_mean_below_two_centimeters(self, sweep_run,
                                                     single_voi_run):
        # tracking-accuracy cohort: the intention-model runs at the fitted
        # omega plus the single-VOI set (the prior experiment reports
        # success/target-distance, not proxy tracking; see notes)
        sweep, _ = sweep_run
        omega = sweep.fitted_omega()
        rows = [r for r in sweep.rows if r["omega"] == omega]
        rows += single_voi_run[0].rows
        samples = [
            r["proxy_robot_final_mean"] for r in rows
            if r["success"] and r["proxy_robot_final_mean"] is not None
        ]
        assert len(samples) > 300
        mean = sum(samples) / len(samples)
        assert mean <= 0.02, f"mean final-second robot-proxy gap {mean:.4f} m"
        report("proxy-robot tracking",
               f"mean {mean * 100:.2f} cm over {len(samples)} successful trials")


# ---------------------------------------------------------------------------
# criterion 8: determinism
# ---------------------------------------------------------------------------

class TestDeterminism:
    def test_sweep_files_byte_identical(self, tmp_path):
        kwargs = dict(
            personas=[WalkerParams(walk_speed=0.9, decision_delay=(0.8, 1.5))],
            jobs=2,
        )
        a = run_sweep([0.1, 0.9], [0, 2], 2, 77, CONFIG, **kwargs)
        b = run_sweep([0.1, 0.9], [0, 2], 2, 77, CONFIG, **kwargs)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        write_results(a, d1)
        write_results(b, d2)
        assert (d1 / "summary.csv").read_bytes() == (d2 / "summary.csv").read_bytes()
        assert (d1 / "trials.csv").read_bytes() == (d2 / "trials.csv").read_bytes()
        report("sweep determinism", "two runs produced byte-identical tables")

    def test_dense_timestep_oracle_fifty_cases(self):
        from proxsim.proxy import ObstacleState, ProxyState, step_proxy
        from proxsim.intention import CommandPosition as CP

        worst = 0.0
        for start, cmd, obs in detour_cases(50, seed=BASE_SEED):
            proxy = ProxyState(Vec2(*start))
            command = CP(Vec2(*cmd))
            obstacle = ObstacleState(Vec2(obs[0], obs[1]), obs[2], obs[3])
            for _ in range(int(8.0 / CONFIG.dt)):
                proxy = step_proxy(proxy, command, obstacle, ARENA, CONFIG)
                assert proxy.position.distance_to(obstacle.center) >= obs[2] - 1e-9
            ref = dense_reference(start, cmd, obs, CONFIG, 8.0)
            err = math.hypot(proxy.position.x - ref[0], proxy.position.y - ref[1])
            worst = max(worst, err)
        assert worst < 1e-3
        report("dense-timestep oracle",
               f"50 detours, worst final disagreement {worst:.2e} m")


# ---------------------------------------------------------------------------
# criterion 9: round-trip and live/replay equivalence
# ---------------------------------------------------------------------------

class TestRoundTrip:
    def test_trace_save_load_identity(self, tmp_path):
        spec = generate_trial(derive_seed(BASE_SEED, "rt"), 2)
        path = tmp_path / "trial.jsonl"
        run_trial(spec, WalkerParams(), CONFIG, record_path=path)
        trace = load_trace(path)
        out = tmp_path / "copy.jsonl"
        save_trace(trace, out)
        again = load_trace(out)
        assert again.frames == trace.frames
        report("trace round-trip", f"{len(trace.frames)} frames identical")

    def test_ten_live_sessions_replay_identically(self, tmp_path):
        checked_frames = 0
        for i in range(10):
            scenario = Scenario(
                vois=(
                    VOI("ball-0", Vec2(1.0, 3.0), 0.05),
                    VOI("ball-1", Vec2(3.0, 2.5), 0.05),
                ),
                user_start=Pose(Vec2(2.0, 0.8), math.pi / 2 + i * 0.2),
            )
            session = LiveSession(scenario, recordings_dir=tmp_path)
            path = tmp_path / f"live-{i}.jsonl"
            session.enqueue(RecordStartMessage(type="record_start", path=str(path)))
            session.enqueue(SteerMessage(
                type="steer", forward=0.6 + 0.05 * i,
                strafe=0.1 * (i % 3 - 1), heading_rate=0.3 - 0.06 * i,
            ))
            for _ in range(150 + 10 * i):
                session.step()
            session.enqueue(SteerMessage(type="steer", forward=1.0))
            for _ in range(75):
                session.step()
            session.writer.close()
            session.writer = None

            trace = load_trace(path)
            _, records = replay_trace(trace, collect=True)
            assert len(records) == len(trace.frames)
            for recorded, recomputed in zip(trace.frames, records):
                assert recorded.robot.x == recomputed.robot.position.x
                assert recorded.robot.y == recomputed.robot.position.y
                assert recorded.robot_status == recomputed.robot.status
                got = {e.voi_id: (e.raw, e.effective)
                       for e in recomputed.weights.entries}
                assert recorded.weights == got
                checked_frames += 1
        report("live/replay equivalence",
               f"10 sessions, {checked_frames} frames with identical "
               "weights and robot states")
