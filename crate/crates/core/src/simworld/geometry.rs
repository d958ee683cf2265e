//! Planar primitives used by the simulator: points, obstacle shapes and the
//! arena rectangle, with exact ray intersection and point distance queries.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point reached by travelling `dist` along absolute direction `angle`.
    pub fn offset_polar(self, angle: f64, dist: f64) -> Point2 {
        Point2::new(self.x + dist * angle.cos(), self.y + dist * angle.sin())
    }

    /// Absolute direction of the vector from `self` to `other`.
    pub fn angle_to(self, other: Point2) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Wraps an angle in radians into `(-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Wraps an angle in degrees into `(-180, 180]`.
pub fn wrap_degrees(angle: f64) -> f64 {
    let r = angle.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Axis-aligned rectangle given by its min and max corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(self.min.x, self.max.x), p.y.clamp(self.min.y, self.max.y))
    }

    /// Euclidean distance from `p` to the filled rectangle (0 inside).
    pub fn distance_outside(&self, p: Point2) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx.hypot(dy)
    }

    /// Distance from an interior point to the nearest edge (0 outside).
    pub fn distance_inside(&self, p: Point2) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        (p.x - self.min.x)
            .min(self.max.x - p.x)
            .min(p.y - self.min.y)
            .min(self.max.y - p.y)
    }

    /// Entry distance of a ray into the filled rectangle (slab method).
    /// Returns `Some(0.0)` when the origin is already inside.
    pub fn ray_entry(&self, origin: Point2, dir: Point2) -> Option<f64> {
        if self.contains(origin) {
            return Some(0.0);
        }
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        for (o, d, lo, hi) in [
            (origin.x, dir.x, self.min.x, self.max.x),
            (origin.y, dir.y, self.min.y, self.max.y),
        ] {
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
            } else {
                let a = (lo - o) / d;
                let b = (hi - o) / d;
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                t_near = t_near.max(a);
                t_far = t_far.min(b);
            }
        }
        if t_near <= t_far && t_near >= 0.0 {
            Some(t_near)
        } else {
            None
        }
    }

    /// Exit distance of a ray whose origin lies inside the rectangle.
    pub fn ray_exit(&self, origin: Point2, dir: Point2) -> f64 {
        if !self.contains(origin) {
            return 0.0;
        }
        let mut t = f64::INFINITY;
        if dir.x > 0.0 {
            t = t.min((self.max.x - origin.x) / dir.x);
        } else if dir.x < 0.0 {
            t = t.min((self.min.x - origin.x) / dir.x);
        }
        if dir.y > 0.0 {
            t = t.min((self.max.y - origin.y) / dir.y);
        } else if dir.y < 0.0 {
            t = t.min((self.min.y - origin.y) / dir.y);
        }
        t
    }
}

/// Static obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Circle { center: Point2, radius: f64 },
    Rect(Aabb),
}

impl Shape {
    /// Distance from `p` to the obstacle surface, 0 when `p` is inside.
    pub fn distance(&self, p: Point2) -> f64 {
        match *self {
            Shape::Circle { center, radius } => (p.distance(center) - radius).max(0.0),
            Shape::Rect(r) => r.distance_outside(p),
        }
    }

    /// Smallest non-negative ray parameter at which a unit-direction ray
    /// meets the obstacle.
    pub fn ray_hit(&self, origin: Point2, dir: Point2) -> Option<f64> {
        match *self {
            Shape::Circle { center, radius } => {
                let ox = origin.x - center.x;
                let oy = origin.y - center.y;
                let c = ox * ox + oy * oy - radius * radius;
                if c <= 0.0 {
                    return Some(0.0);
                }
                let b = ox * dir.x + oy * dir.y;
                if b >= 0.0 {
                    return None;
                }
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                // c / (-b + sqrt) is the numerically stable near root.
                Some(c / (-b + disc.sqrt()))
            }
            Shape::Rect(r) => r.ray_entry(origin, dir),
        }
    }

    /// Bounding box of the shape.
    pub fn aabb(&self) -> Aabb {
        match *self {
            Shape::Circle { center, radius } => Aabb::new(
                Point2::new(center.x - radius, center.y - radius),
                Point2::new(center.x + radius, center.y + radius),
            ),
            Shape::Rect(r) => r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_pi_and_maps_minus_pi() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
        assert_eq!(wrap_degrees(270.0), -90.0);
    }

    #[test]
    fn circle_ray_quadratic() {
        let c = Shape::Circle { center: Point2::new(2.0, 0.0), radius: 0.5 };
        let t = c.ray_hit(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)).unwrap();
        assert!((t - 1.5).abs() < 1e-12);
        assert!(c.ray_hit(Point2::new(0.0, 0.0), Point2::new(-1.0, 0.0)).is_none());
        assert!(c.ray_hit(Point2::new(0.0, 0.0), Point2::new(0.0, 1.0)).is_none());
    }

    #[test]
    fn rect_ray_and_distances() {
        let r = Aabb::new(Point2::new(1.0, -1.0), Point2::new(2.0, 1.0));
        let s = Shape::Rect(r);
        assert_eq!(s.ray_hit(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)), Some(1.0));
        assert_eq!(s.ray_hit(Point2::new(0.0, 2.0), Point2::new(1.0, 0.0)), None);
        assert!((s.distance(Point2::new(0.0, 2.0)) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.distance(Point2::new(1.5, 0.0)), 0.0);
        assert_eq!(r.ray_exit(Point2::new(1.5, 0.0), Point2::new(1.0, 0.0)), 0.5);
    }
}
