use crate::simworld::{wrap_degrees, Point2};

use super::MetricError;

/// Sum of segment lengths.
pub fn path_length(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Straight-line distance from `start` to `goal` over the travelled length.
pub fn path_efficiency(points: &[Point2], start: Point2, goal: Point2) -> Result<f64, MetricError> {
    if points.is_empty() {
        return Err(MetricError::TooFewPoints { needed: 1, got: 0 });
    }
    let travelled = path_length(points);
    if travelled <= 0.0 {
        return Err(MetricError::ZeroLength);
    }
    Ok(start.distance(goal) / travelled)
}

/// `1 - mean(|Δheading|) / 180` over consecutive segment headings, in degrees.
///
/// Zero-length segments (turning in place) have no heading and are skipped.
/// With fewer than two headed segments there is no turn to measure and the
/// result is 1.
pub fn trajectory_smoothness(points: &[Point2]) -> Result<f64, MetricError> {
    if points.len() < 3 {
        return Err(MetricError::TooFewPoints { needed: 3, got: points.len() });
    }
    let headings: Vec<f64> = points
        .windows(2)
        .filter(|w| w[0].distance(w[1]) > 1e-12)
        .map(|w| w[0].angle_to(w[1]).to_degrees())
        .collect();
    if headings.len() < 2 {
        return Ok(1.0);
    }
    let total: f64 = headings.windows(2).map(|w| wrap_degrees(w[1] - w[0]).abs()).sum();
    let mean = total / (headings.len() - 1) as f64;
    Ok(1.0 - mean / 180.0)
}
