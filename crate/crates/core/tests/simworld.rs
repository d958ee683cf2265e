use std::f64::consts::PI;
use std::sync::Arc;

use hrlnav::simworld::*;
use proptest::prelude::*;

fn empty_env(config: EnvConfig) -> NavEnv {
    NavEnv::new(Arc::new(World::builtin("empty").unwrap()), config)
}

/// Distance from `o` along `angle` to the walls of an axis-aligned box.
fn box_exit(o: Point2, angle: f64, b: &Aabb) -> f64 {
    let (dx, dy) = (angle.cos(), angle.sin());
    let mut t = f64::INFINITY;
    if dx > 1e-12 {
        t = t.min((b.max.x - o.x) / dx);
    }
    if dx < -1e-12 {
        t = t.min((b.min.x - o.x) / dx);
    }
    if dy > 1e-12 {
        t = t.min((b.max.y - o.y) / dy);
    }
    if dy < -1e-12 {
        t = t.min((b.min.y - o.y) / dy);
    }
    t
}

#[test]
fn episode_times_out_at_exactly_the_step_cap() {
    let mut env = empty_env(EnvConfig::default());
    env.reset(1);
    let mut kinds = Vec::new();
    loop {
        let (_, out) = env.step(Action::new(0.0, 0.3)).unwrap();
        kinds.push(out.kind);
        if out.kind.is_terminal() {
            break;
        }
    }
    assert_eq!(kinds.len(), 500);
    assert!(kinds[..499].iter().all(|k| *k == OutcomeKind::Running));
    assert_eq!(kinds[499], OutcomeKind::Timeout);
    assert_eq!(env.counters().steps, 500);
    assert!(matches!(env.step(Action::new(0.0, 0.0)), Err(SimError::EpisodeFinished(OutcomeKind::Timeout))));
    assert_eq!(env.counters().steps, 500);
}

#[test]
fn goal_is_reached_driving_straight_at_it() {
    let mut env = empty_env(EnvConfig::default());
    env.reset(0);
    let g = env.goal();
    let p = env.pose().position();
    env.set_pose(Pose::new(p.x, p.y, p.angle_to(g)));
    let expected = ((p.distance(g) - env.world().goal_radius) / 0.1).ceil() as usize;
    let mut steps = 0usize;
    loop {
        let (_, out) = env.step(Action::new(1.0, 0.0)).unwrap();
        steps += 1;
        if out.kind.is_terminal() {
            assert_eq!(out.kind, OutcomeKind::GoalReached);
            break;
        }
    }
    assert!(steps.abs_diff(expected) <= 1, "{steps} vs {expected}");
}

#[test]
fn empty_arena_scan_matches_box_geometry() {
    let world = World::builtin("empty").unwrap();
    assert!(world.obstacles.is_empty());
    let cfg = EnvConfig::default();
    for (x, y, h) in [(5.0, 5.0, 0.0), (1.0, 2.0, 1.0), (8.5, 9.0, -2.5)] {
        let pose = Pose::new(x, y, h);
        let scan = raycast_scan(&pose, &world, cfg.n_beams, cfg.fov(), cfg.max_range);
        for (i, r) in scan.iter().enumerate() {
            let angle = h - PI / 2.0 + i as f64 * PI / 19.0;
            let want = box_exit(pose.position(), angle, &world.bounds).min(cfg.max_range);
            assert!((r - want).abs() < 1e-9, "beam {i}: {r} vs {want}");
        }
    }
}

proptest! {
    #[test]
    fn heading_stays_wrapped(h0 in -50.0f64..50.0, w in -5.0f64..5.0, n in 1usize..200) {
        let mut pose = Pose::new(0.0, 0.0, h0);
        for _ in 0..n {
            pose = integrate(&pose, Action::new(0.0, w), 0.1);
            prop_assert!(pose.heading > -PI && pose.heading <= PI);
        }
        // Turning in place composes to the wrapped total rotation.
        let total = wrap_angle(h0 + w * 0.1 * n as f64);
        let diff = wrap_angle(pose.heading - total);
        prop_assert!(diff.abs() < 1e-9);
        prop_assert_eq!((pose.x, pose.y), (0.0, 0.0));
    }

    #[test]
    fn wrap_is_idempotent_and_periodic(a in -1000.0f64..1000.0, k in -20i32..20) {
        let w = wrap_angle(a);
        prop_assert_eq!(wrap_angle(w), w);
        prop_assert!(wrap_angle(wrap_angle(a + k as f64 * 2.0 * PI) - w).abs() < 1e-8);
        let d = wrap_degrees(a);
        prop_assert!(d > -180.0 && d <= 180.0);
    }

    #[test]
    fn applied_actions_are_clamped(lin in -5.0f64..5.0, ang in -5.0f64..5.0) {
        let mut env = empty_env(EnvConfig::default());
        env.reset(3);
        let before = env.pose();
        let (obs, _) = env.step(Action::new(lin, ang)).unwrap();
        let applied = obs.last_action;
        prop_assert!(applied.in_bounds());
        prop_assert_eq!(applied.linear, lin.clamp(0.0, 1.0));
        prop_assert_eq!(applied.angular, ang.clamp(-1.0, 1.0));
        prop_assert_eq!(env.pose(), integrate(&before, applied, 0.1));
        let outside = !(0.0..=1.0).contains(&lin) || !(-1.0..=1.0).contains(&ang);
        prop_assert_eq!(env.counters().clamped_actions, outside as u64);
    }

    #[test]
    fn scan_is_within_range(x in 0.5f64..9.5, y in 0.5f64..9.5, h in -PI..PI) {
        for name in World::builtin_names() {
            let world = World::builtin(name).unwrap();
            let scan = raycast_scan(&Pose::new(x, y, h), &world, 20, PI, 7.0);
            prop_assert_eq!(scan.len(), 20);
            prop_assert!(scan.iter().all(|r| (MIN_RANGE..=7.0).contains(r)));
        }
    }

    #[test]
    fn reset_is_a_function_of_the_seed(seed: u64) {
        let cfg = EnvConfig { randomize_goal: true, randomize_start: true, ..EnvConfig::default() };
        let mut a = empty_env(cfg.clone());
        let mut b = empty_env(cfg);
        a.reset(seed.wrapping_add(1));
        let oa = a.reset(seed);
        let ob = b.reset(seed);
        prop_assert_eq!(oa, ob);
        prop_assert_eq!(a.start(), b.start());
        prop_assert_eq!(a.goal(), b.goal());
        prop_assert!(a.goal().distance(a.start().position()) >= 1.0);
    }
}
