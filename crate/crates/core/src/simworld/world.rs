//! Static arena description and its on-disk format.
//!
//! A world file is a TOML document:
//!
//! ```toml
//! format_version = 1
//! robot_radius = 0.2
//! goal_radius = 0.3
//! bounds = { min = [0.0, 0.0], max = [10.0, 10.0] }
//! start = { x = 1.0, y = 1.0, heading = 0.0 }
//! goal = { x = 9.0, y = 9.0 }
//!
//! [[obstacles]]
//! type = "circle"
//! center = [5.0, 5.0]
//! radius = 0.5
//!
//! [[obstacles]]
//! type = "rect"
//! min = [3.0, 0.0]
//! max = [7.0, 3.5]
//! ```
//!
//! Headings are radians. Unknown keys are rejected.

use super::geometry::{Aabb, Point2, Shape};
use super::Pose;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const WORLD_FORMAT_VERSION: u32 = 1;

const EMPTY_WORLD: &str = include_str!("../../worlds/empty.world");
const CORRIDOR_WORLD: &str = include_str!("../../worlds/corridor.world");

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("world parse error: {0}")]
    Parse(String),
    #[error("unsupported world format_version {found} (expected {WORLD_FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("world validation error: {0}")]
    Invalid(String),
    #[error("unknown built-in world `{0}`")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsDoc {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseDoc {
    x: f64,
    y: f64,
    #[serde(default)]
    heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalDoc {
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ObstacleDoc {
    Circle { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldDoc {
    format_version: u32,
    #[serde(default)]
    name: Option<String>,
    bounds: BoundsDoc,
    robot_radius: f64,
    goal_radius: f64,
    start: PoseDoc,
    goal: GoalDoc,
    #[serde(default)]
    obstacles: Vec<ObstacleDoc>,
}

/// Validated, immutable arena.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub name: String,
    pub bounds: Aabb,
    pub obstacles: Vec<Shape>,
    pub start: Pose,
    pub goal: Point2,
    pub goal_radius: f64,
    pub robot_radius: f64,
}

/// Parses and validates a world document.
pub fn load_world(text: &str) -> Result<World, WorldError> {
    let doc: WorldDoc = toml::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))?;
    if doc.format_version != WORLD_FORMAT_VERSION {
        return Err(WorldError::Version { found: doc.format_version });
    }
    let obstacles = doc
        .obstacles
        .iter()
        .map(|o| match *o {
            ObstacleDoc::Circle { center, radius } => Shape::Circle {
                center: Point2::new(center[0], center[1]),
                radius,
            },
            ObstacleDoc::Rect { min, max } => {
                Shape::Rect(Aabb::new(Point2::new(min[0], min[1]), Point2::new(max[0], max[1])))
            }
        })
        .collect();
    let world = World {
        name: doc.name.unwrap_or_else(|| "unnamed".to_string()),
        bounds: Aabb::new(
            Point2::new(doc.bounds.min[0], doc.bounds.min[1]),
            Point2::new(doc.bounds.max[0], doc.bounds.max[1]),
        ),
        obstacles,
        start: Pose::new(doc.start.x, doc.start.y, doc.start.heading),
        goal: Point2::new(doc.goal.x, doc.goal.y),
        goal_radius: doc.goal_radius,
        robot_radius: doc.robot_radius,
    };
    world.validate()?;
    Ok(world)
}

impl World {
    /// Bundled fixture worlds: `empty` and `corridor`.
    pub fn builtin(name: &str) -> Result<World, WorldError> {
        match name {
            "empty" => load_world(EMPTY_WORLD),
            "corridor" => load_world(CORRIDOR_WORLD),
            other => Err(WorldError::UnknownBuiltin(other.to_string())),
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["empty", "corridor"]
    }

    /// Empty rectangular arena with the given start and goal.
    pub fn empty(width: f64, height: f64, start: Pose, goal: Point2) -> World {
        World {
            name: "empty".into(),
            bounds: Aabb::new(Point2::new(0.0, 0.0), Point2::new(width, height)),
            obstacles: Vec::new(),
            start,
            goal,
            goal_radius: 0.3,
            robot_radius: 0.2,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let fin = |v: f64| v.is_finite();
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(WorldError::Invalid("bounds must have positive extent".into()));
        }
        if !(self.robot_radius > 0.0 && fin(self.robot_radius)) {
            return Err(WorldError::Invalid("robot_radius must be > 0".into()));
        }
        if !(self.goal_radius > 0.0 && fin(self.goal_radius)) {
            return Err(WorldError::Invalid("goal_radius must be > 0".into()));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let ok = match *o {
                Shape::Circle { radius, center } => {
                    radius > 0.0 && fin(radius) && fin(center.x) && fin(center.y)
                }
                Shape::Rect(r) => r.width() > 0.0 && r.height() > 0.0,
            };
            if !ok {
                return Err(WorldError::Invalid(format!("obstacle {i} is degenerate")));
            }
        }
        if !self.is_free(self.start.position(), self.robot_radius) {
            return Err(WorldError::Invalid(
                "start pose lies outside bounds or inside an inflated obstacle".into(),
            ));
        }
        if !self.is_free(self.goal, self.robot_radius) {
            return Err(WorldError::Invalid(
                "goal lies outside bounds or inside an inflated obstacle".into(),
            ));
        }
        Ok(())
    }

    /// Distance from `p` to the nearest obstacle surface or boundary wall,
    /// measured from the point itself. Zero inside an obstacle or outside
    /// the arena.
    pub fn clearance(&self, p: Point2) -> f64 {
        let walls = self.bounds.distance_inside(p);
        self.obstacles.iter().map(|o| o.distance(p)).fold(walls, f64::min)
    }

    /// True when a disk of `radius` centred at `p` touches nothing.
    pub fn is_free(&self, p: Point2, radius: f64) -> bool {
        self.clearance(p) >= radius
    }

    /// Uniform sample over positions whose clearance is at least
    /// `robot_radius + margin`. Falls back to `fallback` after many rejections.
    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64, fallback: Point2) -> Point2 {
        let need = self.robot_radius + margin;
        for _ in 0..10_000 {
            let p = Point2::new(
                rng.random_range(self.bounds.min.x..=self.bounds.max.x),
                rng.random_range(self.bounds.min.y..=self.bounds.max.y),
            );
            if self.clearance(p) >= need {
                return p;
            }
        }
        fallback
    }

    /// Serialises back to the world file format.
    pub fn to_document(&self) -> String {
        let doc = WorldDoc {
            format_version: WORLD_FORMAT_VERSION,
            name: Some(self.name.clone()),
            bounds: BoundsDoc {
                min: [self.bounds.min.x, self.bounds.min.y],
                max: [self.bounds.max.x, self.bounds.max.y],
            },
            robot_radius: self.robot_radius,
            goal_radius: self.goal_radius,
            start: PoseDoc { x: self.start.x, y: self.start.y, heading: self.start.heading },
            goal: GoalDoc { x: self.goal.x, y: self.goal.y },
            obstacles: self
                .obstacles
                .iter()
                .map(|o| match *o {
                    Shape::Circle { center, radius } => ObstacleDoc::Circle {
                        center: [center.x, center.y],
                        radius,
                    },
                    Shape::Rect(r) => ObstacleDoc::Rect {
                        min: [r.min.x, r.min.y],
                        max: [r.max.x, r.max.y],
                    },
                })
                .collect(),
        };
        toml::to_string(&doc).expect("world document serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EMPTY_10: &str = r#"
format_version = 1
robot_radius = 0.2
goal_radius = 0.3
bounds = { min = [0.0, 0.0], max = [10.0, 10.0] }
start = { x = 1.0, y = 1.0, heading = 0.0 }
goal = { x = 9.0, y = 9.0 }
"#;

    #[test]
    fn empty_arena_loads() {
        let w = load_world(EMPTY_10).unwrap();
        assert!(w.obstacles.is_empty());
        assert_eq!(w.goal, Point2::new(9.0, 9.0));
    }

    #[test]
    fn obstacle_on_start_is_rejected() {
        let text = format!(
            "{EMPTY_10}\n[[obstacles]]\ntype = \"circle\"\ncenter = [1.0, 1.0]\nradius = 0.5\n"
        );
        assert!(matches!(load_world(&text), Err(WorldError::Invalid(_))));
    }

    #[test]
    fn corridor_fixture_has_two_rects() {
        let w = World::builtin("corridor").unwrap();
        assert_eq!(w.obstacles.len(), 2);
        assert!(w.obstacles.iter().all(|o| matches!(o, Shape::Rect(_))));
    }

    #[test]
    fn malformed_and_unknown_keys_fail_to_parse() {
        assert!(matches!(load_world("format_version = ["), Err(WorldError::Parse(_))));
        let text = format!("{EMPTY_10}\nfriction = 0.3\n");
        assert!(matches!(load_world(&text), Err(WorldError::Parse(_))));
        let text = EMPTY_10.replace("format_version = 1", "format_version = 7");
        assert!(matches!(load_world(&text), Err(WorldError::Version { found: 7 })));
    }

    #[test]
    fn document_round_trips() {
        let w = World::builtin("corridor").unwrap();
        let again = load_world(&w.to_document()).unwrap();
        assert_eq!(w, again);
    }
}
