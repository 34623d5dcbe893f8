//! Procedural training and testing worlds.
//!
//! Obstacles are converted to point clouds by sampling their surfaces at a
//! fixed spacing. Every generator is a pure function of its spec (seed
//! included).

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{Point3, PointCloud, Vec3};
use crate::trajectory::{self, DiscreteTrajectory, InitialState};

/// Default surface sampling spacing in meters (one point per 0.01 m²).
pub const DEFAULT_POINT_SPACING: f64 = 0.1;
/// Success radius around the goal, meters.
pub const GOAL_RADIUS: f64 = 5.0;

/// Placement shared by the forest and shape generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Extent along x, meters.
    pub length: f64,
    /// Extent along y, meters.
    pub width: f64,
    /// Obstacles per square meter.
    pub intensity: f64,
}

impl Region {
    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err(invalid("region length and width must be positive"));
        }
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(invalid("intensity must be non-negative"));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Start corner `(-l/2, -w/2)` at `altitude`.
    pub fn start(&self, altitude: f64) -> Point3 {
        Point3::new(-self.length / 2.0, -self.width / 2.0, altitude)
    }

    /// Homogeneous Poisson process: count `~ Poisson(δ·l·w)`, uniform positions.
    pub fn sample_points(&self, rng: &mut crate::Rng) -> Vec<(f64, f64)> {
        let mean = self.intensity * self.area();
        let count = if mean > 0.0 {
            Poisson::new(mean).expect("positive mean").sample(rng) as usize
        } else {
            0
        };
        (0..count)
            .map(|_| {
                (
                    rng.random_range(-self.length / 2.0..self.length / 2.0),
                    rng.random_range(-self.width / 2.0..self.width / 2.0),
                )
            })
            .collect()
    }
}

/// Flight setup shared by the generated scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightSetup {
    /// Flight altitude, meters.
    pub altitude: f64,
    /// Length of the straight reference, meters.
    pub reference_length: f64,
    /// Speed used to time-stamp the reference, m/s.
    pub nominal_speed: f64,
    /// Obstacles closer than this to the start are not spawned, meters.
    pub start_clearance: f64,
    /// Surface sampling spacing, meters.
    pub point_spacing: f64,
}

impl Default for FlightSetup {
    fn default() -> Self {
        Self {
            altitude: 2.0,
            reference_length: 40.0,
            nominal_speed: 3.0,
            start_clearance: 1.5,
            point_spacing: DEFAULT_POINT_SPACING,
        }
    }
}

impl FlightSetup {
    fn validate(&self) -> Result<()> {
        if !(self.reference_length > 0.0 && self.nominal_speed > 0.0 && self.point_spacing > 0.0) {
            return Err(invalid("reference length, speed and point spacing must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestSpec {
    pub region: Region,
    pub tree_diameter: f64,
    pub tree_height: f64,
    pub flight: FlightSetup,
    pub seed: u64,
}

impl Default for ForestSpec {
    fn default() -> Self {
        Self {
            region: Region { length: 60.0, width: 30.0, intensity: 1.0 / 25.0 },
            tree_diameter: 0.6,
            tree_height: 8.0,
            flight: FlightSetup::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ellipsoid,
    Cuboid,
    Cylinder,
}

/// Axis-aligned convex obstacle resting on the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shape {
    pub kind: ShapeKind,
    pub center: Point3,
    /// Full extents along x, y, z (diameters for round shapes).
    pub extents: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFieldSpec {
    pub region: Region,
    pub extent_x: (f64, f64),
    pub extent_y: (f64, f64),
    pub extent_z: (f64, f64),
    pub kinds: Vec<ShapeKind>,
    pub flight: FlightSetup,
    pub seed: u64,
}

impl Default for ShapeFieldSpec {
    fn default() -> Self {
        Self {
            region: Region { length: 60.0, width: 30.0, intensity: 1.0 / 49.0 },
            extent_x: (0.5, 4.0),
            extent_y: (0.5, 4.0),
            extent_z: (0.5, 8.0),
            kinds: vec![ShapeKind::Ellipsoid, ShapeKind::Cuboid, ShapeKind::Cylinder],
            flight: FlightSetup::default(),
            seed: 0,
        }
    }
}

impl ShapeFieldSpec {
    fn validate(&self) -> Result<()> {
        self.region.validate()?;
        self.flight.validate()?;
        for (lo, hi) in [self.extent_x, self.extent_y, self.extent_z] {
            if !(lo > 0.0 && lo < hi) {
                return Err(invalid(format!("extent bounds must satisfy 0 < low < high, got ({lo}, {hi})")));
            }
        }
        if self.kinds.is_empty() {
            return Err(invalid("at least one shape kind is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapWallSpec {
    pub wall_length: f64,
    pub wall_height: f64,
    pub wall_thickness: f64,
    /// Fixed gap width; drawn uniformly from `gap_range` when `None`.
    pub gap_width: Option<f64>,
    pub gap_range: (f64, f64),
    /// Fixed lateral gap offset; drawn from `offset_range` when `None`.
    pub lateral_offset: Option<f64>,
    pub offset_range: (f64, f64),
    /// Distance from the start to the wall, meters.
    pub wall_distance: f64,
    pub flight: FlightSetup,
    pub seed: u64,
}

/// Gap widths used for testing.
pub const GAP_TEST_RANGE: (f64, f64) = (0.8, 1.0);
/// Gap widths used for training.
pub const GAP_TRAIN_RANGE: (f64, f64) = (0.7, 1.2);

impl Default for GapWallSpec {
    fn default() -> Self {
        Self {
            wall_length: 40.0,
            wall_height: 10.0,
            wall_thickness: 0.2,
            gap_width: None,
            gap_range: GAP_TEST_RANGE,
            lateral_offset: None,
            offset_range: (-5.0, 5.0),
            wall_distance: 10.0,
            flight: FlightSetup::default(),
            seed: 0,
        }
    }
}

/// Single vertical pole in front of the start, centered on the reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleSpec {
    pub distance: f64,
    pub diameter: f64,
    pub height: f64,
    /// Lateral offset of the pole from the reference line, meters.
    pub lateral_offset: f64,
    pub flight: FlightSetup,
}

impl Default for PoleSpec {
    fn default() -> Self {
        Self {
            distance: 1.5,
            diameter: 0.6,
            height: 10.0,
            lateral_offset: 0.0,
            flight: FlightSetup { reference_length: 20.0, ..FlightSetup::default() },
        }
    }
}

/// A benchmark world: obstacle cloud, reference, start and goal.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: String,
    pub cloud: PointCloud,
    /// Reference trajectory; need not be collision-free.
    pub reference: DiscreteTrajectory,
    pub goal: Point3,
    pub goal_radius: f64,
    pub start: InitialState,
    pub nominal_speed: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    kind: String,
    cloud: PathBuf,
    reference: PathBuf,
    goal: [f64; 3],
    goal_radius: f64,
    start: InitialState,
    nominal_speed: f64,
}

impl Scenario {
    fn straight(kind: &str, cloud: PointCloud, start: Point3, direction: Vec3, flight: &FlightSetup) -> Result<Self> {
        let reference = trajectory::straight_line(start, direction, flight.reference_length, flight.nominal_speed)?;
        Ok(Self {
            kind: kind.to_string(),
            cloud,
            goal: reference.last().position,
            reference,
            goal_radius: GOAL_RADIUS,
            start: InitialState::at_rest(start),
            nominal_speed: flight.nominal_speed,
        })
    }

    /// Write `scenario.json`, `cloud.xyz` and `reference.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.cloud.save(dir.join("cloud.xyz"))?;
        self.reference.save_csv(dir.join("reference.csv"))?;
        let file = ScenarioFile {
            kind: self.kind.clone(),
            cloud: "cloud.xyz".into(),
            reference: "reference.csv".into(),
            goal: self.goal.into(),
            goal_radius: self.goal_radius,
            start: self.start,
            nominal_speed: self.nominal_speed,
        };
        let path = dir.join("scenario.json");
        std::fs::write(&path, serde_json::to_string_pretty(&file)?)?;
        Ok(path)
    }

    /// Load a scenario JSON; relative cloud/reference paths resolve against
    /// the JSON file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file: ScenarioFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        if !(file.goal_radius > 0.0 && file.nominal_speed > 0.0) {
            return Err(invalid("goal radius and nominal speed must be positive"));
        }
        Ok(Self {
            kind: file.kind,
            cloud: PointCloud::load(resolve(&file.cloud))?,
            reference: DiscreteTrajectory::load_csv(resolve(&file.reference))?,
            goal: Point3::from(file.goal),
            goal_radius: file.goal_radius,
            start: file.start,
            nominal_speed: file.nominal_speed,
        })
    }
}

/// Tree trunk centers of a forest (before the start-clearance filter).
pub fn sample_tree_centers(spec: &ForestSpec) -> Vec<(f64, f64)> {
    let mut rng = crate::rng_from_seed(spec.seed);
    spec.region.sample_points(&mut rng)
}

/// Poisson forest of vertical cylindrical trunks; the reference runs 40 m
/// from the `(-l/2, -w/2)` corner toward the region center.
pub fn gen_forest(spec: &ForestSpec) -> Result<Scenario> {
    spec.region.validate()?;
    spec.flight.validate()?;
    if !(spec.tree_diameter > 0.0 && spec.tree_height > 0.0) {
        return Err(invalid("tree diameter and height must be positive"));
    }
    let start = spec.region.start(spec.flight.altitude);
    let radius = spec.tree_diameter / 2.0;
    let spacing = spec.flight.point_spacing;
    let mut points = Vec::new();
    for (x, y) in sample_tree_centers(spec) {
        if ((x - start.x).powi(2) + (y - start.y).powi(2)).sqrt() - radius < spec.flight.start_clearance {
            continue;
        }
        let trunk = Shape {
            kind: ShapeKind::Cylinder,
            center: Point3::new(x, y, spec.tree_height / 2.0),
            extents: Vec3::new(spec.tree_diameter, spec.tree_diameter, spec.tree_height),
        };
        trunk.sample_surface(spacing, &mut points);
        // Trunk axis, so the inside of a thin trunk is occupied as well.
        let n = (spec.tree_height / spacing).ceil() as usize;
        points.extend((0..=n).map(|k| Point3::new(x, y, spec.tree_height * k as f64 / n as f64)));
    }
    let direction = Vec3::new(-start.x, -start.y, 0.0);
    Scenario::straight("forest", PointCloud::new(points)?, start, direction, &spec.flight)
}

/// Obstacles of a shape field (before the start-clearance filter).
pub fn sample_shapes(spec: &ShapeFieldSpec) -> Result<Vec<Shape>> {
    spec.validate()?;
    let mut rng = crate::rng_from_seed(spec.seed);
    let centers = spec.region.sample_points(&mut rng);
    Ok(centers
        .into_iter()
        .map(|(x, y)| {
            let kind = spec.kinds[rng.random_range(0..spec.kinds.len())];
            let ext = Vec3::new(
                rng.random_range(spec.extent_x.0..spec.extent_x.1),
                rng.random_range(spec.extent_y.0..spec.extent_y.1),
                rng.random_range(spec.extent_z.0..spec.extent_z.1),
            );
            Shape { kind, center: Point3::new(x, y, ext.z / 2.0), extents: ext }
        })
        .collect())
}

/// Poisson field of ellipsoids, cuboids and cylinders.
pub fn gen_shapes(spec: &ShapeFieldSpec) -> Result<Scenario> {
    let shapes = sample_shapes(spec)?;
    let start = spec.region.start(spec.flight.altitude);
    let mut points = Vec::new();
    for shape in shapes {
        let mut local = Vec::new();
        shape.sample_surface(spec.flight.point_spacing, &mut local);
        if local.iter().all(|p| (p - start).norm() >= spec.flight.start_clearance) {
            points.extend(local);
        }
    }
    let direction = Vec3::new(-start.x, -start.y, 0.0);
    Scenario::straight("shapes", PointCloud::new(points)?, start, direction, &spec.flight)
}

/// Gap parameters actually used by [`gen_gap_wall`] (after random draws).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapGeometry {
    /// x coordinate of the wall's front face.
    pub wall_x: f64,
    pub gap_width: f64,
    /// y coordinate of the gap center.
    pub gap_center: f64,
}

pub fn gap_geometry(spec: &GapWallSpec) -> Result<GapGeometry> {
    let mut rng = crate::rng_from_seed(spec.seed);
    let gap_width = match spec.gap_width {
        Some(w) => w,
        None => rng.random_range(spec.gap_range.0..spec.gap_range.1),
    };
    let offset = match spec.lateral_offset {
        Some(o) => o,
        None => rng.random_range(spec.offset_range.0..spec.offset_range.1),
    };
    if !(gap_width > 0.0 && gap_width <= spec.wall_length) {
        return Err(invalid(format!("gap width {gap_width} must lie in (0, wall length]")));
    }
    if offset.abs() > spec.wall_length / 2.0 {
        return Err(invalid(format!("gap offset {offset} lies outside the wall")));
    }
    if !(spec.wall_height > 0.0 && spec.wall_thickness >= 0.0 && spec.wall_distance > 0.0) {
        return Err(invalid("wall height and distance must be positive"));
    }
    Ok(GapGeometry { wall_x: spec.wall_distance, gap_width, gap_center: offset })
}

/// Wall across the flight direction with one full-height vertical opening.
/// The start is at `(0, 0, altitude)` and the reference flies along +x.
pub fn gen_gap_wall(spec: &GapWallSpec) -> Result<Scenario> {
    spec.flight.validate()?;
    let g = gap_geometry(spec)?;
    let spacing = spec.flight.point_spacing;
    let ny = (spec.wall_length / spacing).round() as usize;
    let nz = (spec.wall_height / spacing).ceil() as usize;
    let nx = (spec.wall_thickness / spacing).ceil() as usize;
    let mut points = Vec::new();
    for ix in 0..=nx {
        let x = g.wall_x + if nx == 0 { 0.0 } else { spec.wall_thickness * ix as f64 / nx as f64 };
        for iy in 0..=ny {
            let y = -spec.wall_length / 2.0 + spec.wall_length * iy as f64 / ny as f64;
            if (y - g.gap_center).abs() < g.gap_width / 2.0 {
                continue;
            }
            for iz in 0..=nz {
                points.push(Point3::new(x, y, spec.wall_height * iz as f64 / nz as f64));
            }
        }
    }
    let start = Point3::new(0.0, 0.0, spec.flight.altitude);
    Scenario::straight("gap", PointCloud::new(points)?, start, Vec3::x(), &spec.flight)
}

/// One vertical pole straddling the straight reference.
pub fn gen_pole(spec: &PoleSpec) -> Result<Scenario> {
    spec.flight.validate()?;
    if !(spec.diameter > 0.0 && spec.height > 0.0 && spec.distance > 0.0) {
        return Err(invalid("pole distance, diameter and height must be positive"));
    }
    let pole = Shape {
        kind: ShapeKind::Cylinder,
        center: Point3::new(spec.distance, spec.lateral_offset, spec.height / 2.0),
        extents: Vec3::new(spec.diameter, spec.diameter, spec.height),
    };
    let mut points = Vec::new();
    pole.sample_surface(spec.flight.point_spacing, &mut points);
    let start = Point3::new(0.0, 0.0, spec.flight.altitude);
    Scenario::straight("pole", PointCloud::new(points)?, start, Vec3::x(), &spec.flight)
}

/// Horizontal circle reference of `radius` around `center` in an empty world.
pub fn circle_scenario(center: Point3, radius: f64, speed: f64) -> Result<Scenario> {
    let reference = trajectory::circle(center, radius, speed, 1.0)?;
    let first = *reference.first();
    Ok(Scenario {
        kind: "circle".into(),
        cloud: PointCloud::empty(),
        goal: reference.last().position,
        start: InitialState::new(first.position, first.velocity.unwrap_or_default(), Vec3::zeros()),
        reference,
        goal_radius: GOAL_RADIUS,
        nominal_speed: speed,
    })
}

fn ring_count(circumference: f64, spacing: f64) -> usize {
    ((circumference / spacing).ceil() as usize).max(3)
}

impl Shape {
    /// Append surface samples spaced by at most about `spacing`.
    pub fn sample_surface(&self, spacing: f64, out: &mut Vec<Point3>) {
        let half = self.extents / 2.0;
        let c = self.center;
        match self.kind {
            ShapeKind::Cuboid => {
                let n: Vec<usize> = (0..3).map(|k| ((self.extents[k] / spacing).ceil() as usize).max(1)).collect();
                let coord = |k: usize, i: usize| c[k] - half[k] + self.extents[k] * i as f64 / n[k] as f64;
                for ix in 0..=n[0] {
                    for iy in 0..=n[1] {
                        for iz in 0..=n[2] {
                            let on_face = ix == 0 || ix == n[0] || iy == 0 || iy == n[1] || iz == 0 || iz == n[2];
                            if on_face {
                                out.push(Point3::new(coord(0, ix), coord(1, iy), coord(2, iz)));
                            }
                        }
                    }
                }
            }
            ShapeKind::Cylinder => {
                let (rx, ry) = (half.x, half.y);
                let nz = ((self.extents.z / spacing).ceil() as usize).max(1);
                let circumference = PI * (3.0 * (rx + ry) - ((3.0 * rx + ry) * (rx + 3.0 * ry)).sqrt());
                let nt = ring_count(circumference, spacing);
                for iz in 0..=nz {
                    let z = c.z - half.z + self.extents.z * iz as f64 / nz as f64;
                    for it in 0..nt {
                        let th = 2.0 * PI * it as f64 / nt as f64;
                        out.push(Point3::new(c.x + rx * th.cos(), c.y + ry * th.sin(), z));
                    }
                }
                // End caps as concentric rings.
                let nr = ((rx.max(ry) / spacing).ceil() as usize).max(1);
                for z in [c.z - half.z, c.z + half.z] {
                    out.push(Point3::new(c.x, c.y, z));
                    for ir in 1..nr {
                        let f = ir as f64 / nr as f64;
                        let n = ring_count(circumference * f, spacing);
                        for it in 0..n {
                            let th = 2.0 * PI * it as f64 / n as f64;
                            out.push(Point3::new(c.x + f * rx * th.cos(), c.y + f * ry * th.sin(), z));
                        }
                    }
                }
            }
            ShapeKind::Ellipsoid => {
                let max_axis = half.x.max(half.y).max(half.z);
                let nl = ((PI * max_axis / spacing).ceil() as usize).max(2);
                for il in 0..=nl {
                    let lat = -PI / 2.0 + PI * il as f64 / nl as f64;
                    let (s, co) = lat.sin_cos();
                    let (rx, ry) = (half.x * co, half.y * co);
                    let z = c.z + half.z * s;
                    if rx.max(ry) < 1e-9 {
                        out.push(Point3::new(c.x, c.y, z));
                        continue;
                    }
                    let circumference = PI * (3.0 * (rx + ry) - ((3.0 * rx + ry) * (rx + 3.0 * ry)).sqrt());
                    let n = ring_count(circumference, spacing);
                    for it in 0..n {
                        let th = 2.0 * PI * it as f64 / n as f64;
                        out.push(Point3::new(c.x + rx * th.cos(), c.y + ry * th.sin(), z));
                    }
                }
            }
        }
    }

    /// Whether `p` lies on the boundary of the shape (to `tol`).
    pub fn on_boundary(&self, p: &Point3, tol: f64) -> bool {
        let half = self.extents / 2.0;
        let d = p - self.center;
        match self.kind {
            ShapeKind::Cuboid => {
                let inside = (0..3).all(|k| d[k].abs() <= half[k] + tol);
                inside && (0..3).any(|k| (d[k].abs() - half[k]).abs() <= tol)
            }
            ShapeKind::Cylinder => {
                let r = (d.x / half.x).powi(2) + (d.y / half.y).powi(2);
                let in_height = d.z.abs() <= half.z + tol;
                let on_side = (r.sqrt() - 1.0).abs() <= tol && in_height;
                let on_cap = (d.z.abs() - half.z).abs() <= tol && r <= 1.0 + tol;
                on_side || on_cap
            }
            ShapeKind::Ellipsoid => {
                let r = (d.x / half.x).powi(2) + (d.y / half.y).powi(2) + (d.z / half.z).powi(2);
                (r.sqrt() - 1.0).abs() <= tol
            }
        }
    }
}
