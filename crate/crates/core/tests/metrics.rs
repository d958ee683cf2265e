use std::f64::consts::SQRT_2;

use hrlnav::benchmarks::{astar_cells, astar_reference, path_efficiency, path_length, trajectory_smoothness, Grid, MetricError};
use hrlnav::simworld::{Point2, World};
use proptest::prelude::*;

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

#[test]
fn l_shaped_path_efficiency() {
    // 3-4-5 triangle walked along the legs.
    let path = [p(0.0, 0.0), p(3.0, 0.0), p(3.0, 4.0)];
    assert_eq!(path_length(&path), 7.0);
    assert!((path_efficiency(&path, p(0.0, 0.0), p(3.0, 4.0)).unwrap() - 5.0 / 7.0).abs() < 1e-15);
    let straight = [p(0.0, 0.0), p(1.5, 2.0), p(3.0, 4.0)];
    assert!((path_efficiency(&straight, p(0.0, 0.0), p(3.0, 4.0)).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(path_efficiency(&[p(1.0, 1.0)], p(1.0, 1.0), p(2.0, 2.0)), Err(MetricError::ZeroLength));
}

#[test]
fn smoothness_fixtures() {
    let straight = [p(0.0, 0.0), p(1.0, 0.0), p(2.0, 0.0), p(3.0, 0.0)];
    assert_eq!(trajectory_smoothness(&straight).unwrap(), 1.0);
    // Alternating ±45° headings: every turn is 90°.
    let zigzag = [p(0.0, 0.0), p(1.0, 1.0), p(2.0, 0.0), p(3.0, 1.0), p(4.0, 0.0)];
    assert!((trajectory_smoothness(&zigzag).unwrap() - 0.5).abs() < 1e-12);
    // Out and straight back: a single 180° turn.
    let u_turn = [p(0.0, 0.0), p(1.0, 0.0), p(0.0, 0.0)];
    assert!(trajectory_smoothness(&u_turn).unwrap().abs() < 1e-12);
    // A right angle among three segments: turns of 90° and 0°.
    let corner = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 1.0), p(1.0, 2.0)];
    assert!((trajectory_smoothness(&corner).unwrap() - 0.75).abs() < 1e-12);
    // Spinning in place adds repeated points that carry no heading.
    let spin = [p(0.0, 0.0), p(1.0, 0.0), p(1.0, 0.0), p(2.0, 0.0)];
    assert_eq!(trajectory_smoothness(&spin).unwrap(), 1.0);
    assert!(trajectory_smoothness(&straight[..2]).is_err());
}

/// Plain Dijkstra over the same 8-connected, no-corner-cutting move set.
fn dijkstra(blocked: &[Vec<bool>], res: f64, start: (usize, usize), goal: (usize, usize)) -> Option<f64> {
    let (nx, ny) = (blocked.len(), blocked[0].len());
    let free = |i: i64, j: i64| i >= 0 && j >= 0 && i < nx as i64 && j < ny as i64 && !blocked[i as usize][j as usize];
    let mut dist = vec![vec![f64::INFINITY; ny]; nx];
    let mut done = vec![vec![false; ny]; nx];
    dist[start.0][start.1] = 0.0;
    loop {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..nx {
            for j in 0..ny {
                if !done[i][j] && dist[i][j].is_finite() && best.is_none_or(|(bi, bj)| dist[i][j] < dist[bi][bj]) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best?;
        if (i, j) == goal {
            return Some(dist[i][j]);
        }
        done[i][j] = true;
        for di in -1i64..=1 {
            for dj in -1i64..=1 {
                let (ni, nj) = (i as i64 + di, j as i64 + dj);
                if (di, dj) == (0, 0) || !free(ni, nj) {
                    continue;
                }
                let diagonal = di != 0 && dj != 0;
                if diagonal && (!free(ni, j as i64) || !free(i as i64, nj)) {
                    continue;
                }
                let step = if diagonal { SQRT_2 } else { 1.0 } * res;
                let (ni, nj) = (ni as usize, nj as usize);
                if dist[i][j] + step < dist[ni][nj] {
                    dist[ni][nj] = dist[i][j] + step;
                }
            }
        }
    }
}

fn build(blocked: &[Vec<bool>], res: f64) -> Grid {
    let mut g = Grid::new(p(0.0, 0.0), res, blocked.len(), blocked[0].len()).unwrap();
    for (i, col) in blocked.iter().enumerate() {
        for (j, &b) in col.iter().enumerate() {
            g.set_blocked((i, j), b);
        }
    }
    g
}

#[test]
fn astar_hand_grids() {
    let free = vec![vec![false; 5]; 5];
    let g = build(&free, 0.5);
    assert!((astar_cells(&g, (0, 0), (4, 4)).unwrap() - 4.0 * SQRT_2 * 0.5).abs() < 1e-12);
    assert!((astar_cells(&g, (0, 0), (4, 1)).unwrap() - (3.0 + SQRT_2) * 0.5).abs() < 1e-12);

    // A wall at x = 2 with a gap at the top forces a detour.
    let mut walled = vec![vec![false; 5]; 5];
    for j in 0..4 {
        walled[2][j] = true;
    }
    let g = build(&walled, 1.0);
    // Corner rules stop the path squeezing diagonally through the gap.
    let want = dijkstra(&walled, 1.0, (0, 0), (4, 0)).unwrap();
    assert!((astar_cells(&g, (0, 0), (4, 0)).unwrap() - want).abs() < 1e-12);
    assert!(want > 8.0);

    let mut sealed = walled.clone();
    sealed[2][4] = true;
    assert_eq!(astar_cells(&build(&sealed, 1.0), (0, 0), (4, 0)), Err(MetricError::Unreachable));
    assert_eq!(astar_cells(&build(&sealed, 1.0), (2, 0), (4, 0)), Err(MetricError::BlockedEndpoint));
}

#[test]
fn diagonal_moves_do_not_cut_corners() {
    // Two blocked cells touching only at a corner separate the free diagonal.
    let mut b = vec![vec![false; 2]; 2];
    b[1][0] = true;
    b[0][1] = true;
    assert_eq!(astar_cells(&build(&b, 1.0), (0, 0), (1, 1)), Err(MetricError::Unreachable));
}

#[test]
fn empty_arena_reference_is_octile() {
    let world = World::builtin("empty").unwrap();
    let res = 0.25;
    let grid = Grid::rasterize(&world, res).unwrap();
    let (a, b) = (p(1.1, 1.1), p(8.9, 6.4));
    let (ca, cb) = (grid.cell_of(a).unwrap(), grid.cell_of(b).unwrap());
    let dx = ca.0.abs_diff(cb.0) as f64;
    let dy = ca.1.abs_diff(cb.1) as f64;
    let octile = (dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)) * res;
    assert!((astar_reference(&world, a, b, res).unwrap() - octile).abs() < 1e-12);
}

#[test]
fn astar_matches_dijkstra_on_builtin_worlds() {
    for name in World::builtin_names() {
        let world = World::builtin(name).unwrap();
        let grid = Grid::rasterize(&world, 0.5).unwrap();
        let blocked: Vec<Vec<bool>> = (0..grid.nx).map(|i| (0..grid.ny).map(|j| grid.is_blocked((i, j))).collect()).collect();
        let free: Vec<(usize, usize)> = (0..grid.nx).flat_map(|i| (0..grid.ny).map(move |j| (i, j))).filter(|&c| !grid.is_blocked(c)).collect();
        for k in 0..12 {
            let s = free[(k * 37) % free.len()];
            let g = free[(k * 101 + 13) % free.len()];
            let want = dijkstra(&blocked, 0.5, s, g);
            match (astar_cells(&grid, s, g), want) {
                (Ok(a), Some(d)) => assert!((a - d).abs() < 1e-9, "{name} {s:?}->{g:?}: {a} vs {d}"),
                (Err(MetricError::Unreachable), None) => {}
                (got, want) => panic!("{name} {s:?}->{g:?}: {got:?} vs {want:?}"),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn astar_matches_dijkstra_on_random_grids(
        nx in 2usize..9, ny in 2usize..9, density in 0.0f64..0.45, seed: u64,
        s in (0usize..64, 0usize..64), g in (0usize..64, 0usize..64),
    ) {
        let mut state = seed | 1;
        let mut blocked = vec![vec![false; ny]; nx];
        for col in blocked.iter_mut() {
            for cell in col.iter_mut() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                *cell = (state % 1000) as f64 / 1000.0 < density;
            }
        }
        let s = (s.0 % nx, s.1 % ny);
        let g = (g.0 % nx, g.1 % ny);
        blocked[s.0][s.1] = false;
        blocked[g.0][g.1] = false;
        let grid = build(&blocked, 0.3);
        match (astar_cells(&grid, s, g), dijkstra(&blocked, 0.3, s, g)) {
            (Ok(a), Some(d)) => prop_assert!((a - d).abs() < 1e-9),
            (Err(MetricError::Unreachable), None) => {}
            (got, want) => prop_assert!(false, "{:?} vs {:?}", got, want),
        }
    }

    #[test]
    fn efficiency_never_exceeds_one(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..12)) {
        let pts: Vec<Point2> = pts.into_iter().map(|(x, y)| p(x, y)).collect();
        if let Ok(e) = path_efficiency(&pts, pts[0], *pts.last().unwrap()) {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
        }
        if let Ok(s) = trajectory_smoothness(&pts) {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
