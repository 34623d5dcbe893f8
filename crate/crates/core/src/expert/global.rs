use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::environment::Scenario;
use crate::error::{invalid, Error, Result};
use crate::geometry::{in_collision, CollisionModel, Point3, PointCloud};
use crate::trajectory::{DiscreteTrajectory, ReferencePath};

/// Default grid resolution in meters.
pub const DEFAULT_GRID_RESOLUTION: f64 = 0.25;
/// Margin added around start, goal and reference when sizing the grid.
const GRID_MARGIN: f64 = 5.0;
/// An occupied goal is moved to the nearest free cell within this distance.
const GOAL_SNAP: f64 = 1.0;

/// Collision-free reference through the whole scenario.
#[derive(Debug, Clone)]
pub struct GlobalPlan {
    pub waypoints: Vec<Point3>,
    /// Waypoints resampled every 0.1 s at the scenario's nominal speed.
    pub trajectory: DiscreteTrajectory,
    /// Whether the resampled trajectory clears the cloud by `r_q`.
    pub collision_free: bool,
}

impl GlobalPlan {
    pub fn path(&self) -> Result<ReferencePath> {
        ReferencePath::from_points(self.waypoints.iter().copied())
    }
}

struct Grid {
    origin: Point3,
    res: f64,
    dims: [usize; 3],
    occupied: Vec<bool>,
}

impl Grid {
    fn index(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    fn center(&self, c: [usize; 3]) -> Point3 {
        self.origin + Point3::new(c[0] as f64, c[1] as f64, c[2] as f64) * self.res
    }

    fn cell(&self, p: &Point3) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for k in 0..3 {
            let f = ((p[k] - self.origin[k]) / self.res).round();
            if f < 0.0 || f >= self.dims[k] as f64 {
                return None;
            }
            out[k] = f as usize;
        }
        Some(out)
    }

    fn build(lo: Point3, hi: Point3, res: f64, cloud: &PointCloud, inflation: f64) -> Result<Self> {
        let mut dims = [0; 3];
        for k in 0..3 {
            dims[k] = ((hi[k] - lo[k]) / res).floor() as usize + 1;
        }
        let total = dims.iter().product::<usize>();
        if total > 50_000_000 {
            return Err(invalid(format!("planning grid of {total} cells is too large; use a coarser resolution")));
        }
        let mut grid = Self { origin: lo, res, dims, occupied: vec![false; total] };
        let reach = (inflation / res).ceil() as i64;
        let r2 = inflation * inflation;
        for p in cloud.points() {
            let base: Vec<i64> = (0..3).map(|k| ((p[k] - lo[k]) / res).round() as i64).collect();
            for dz in -reach..=reach {
                for dy in -reach..=reach {
                    for dx in -reach..=reach {
                        let c = [base[0] + dx, base[1] + dy, base[2] + dz];
                        if (0..3).any(|k| c[k] < 0 || c[k] >= dims[k] as i64) {
                            continue;
                        }
                        let c = [c[0] as usize, c[1] as usize, c[2] as usize];
                        if (grid.center(c) - p).norm_squared() < r2 {
                            let i = grid.index(c);
                            grid.occupied[i] = true;
                        }
                    }
                }
            }
        }
        Ok(grid)
    }

    fn nearest_free(&self, p: &Point3, within: f64) -> Option<[usize; 3]> {
        let reach = (within / self.res).ceil() as i64;
        let base = self.cell_unclamped(p);
        let mut best: Option<(f64, [usize; 3])> = None;
        for dz in -reach..=reach {
            for dy in -reach..=reach {
                for dx in -reach..=reach {
                    let c = [base[0] + dx, base[1] + dy, base[2] + dz];
                    if (0..3).any(|k| c[k] < 0 || c[k] >= self.dims[k] as i64) {
                        continue;
                    }
                    let c = [c[0] as usize, c[1] as usize, c[2] as usize];
                    let d = (self.center(c) - p).norm();
                    if d <= within && !self.occupied[self.index(c)] && best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
        }
        best.map(|(_, c)| c)
    }

    fn cell_unclamped(&self, p: &Point3) -> [i64; 3] {
        std::array::from_fn(|k| ((p[k] - self.origin[k]) / self.res).round() as i64)
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 26-connected path on an occupancy grid inflated by `r_q`.
///
/// The grid spans start, goal and reference plus a margin; vertically it is
/// confined to the cloud's height range so the path cannot climb over the
/// obstacles. An occupied goal is snapped to a free cell within 1 m.
pub fn global_plan(scenario: &Scenario, grid_resolution: f64) -> Result<GlobalPlan> {
    global_plan_with(scenario, grid_resolution, &CollisionModel::default())
}

pub fn global_plan_with(scenario: &Scenario, grid_resolution: f64, model: &CollisionModel) -> Result<GlobalPlan> {
    if !(grid_resolution > 0.0 && grid_resolution.is_finite()) {
        return Err(invalid(format!("grid resolution must be positive, got {grid_resolution}")));
    }
    let start = scenario.start.position;
    let goal = scenario.goal;
    let cloud = &scenario.cloud;
    if cloud.is_empty() {
        let waypoints = vec![start, goal];
        return finish(scenario, waypoints, model);
    }

    let mut lo = start.inf(&goal);
    let mut hi = start.sup(&goal);
    for p in scenario.reference.positions() {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    lo -= Point3::repeat(GRID_MARGIN);
    hi += Point3::repeat(GRID_MARGIN);
    let (cmin, cmax) = cloud.bounds().expect("non-empty cloud");
    lo.z = cmin.z.min(start.z).min(goal.z);
    hi.z = cmax.z.max(start.z).max(goal.z);
    // Align the grid so that the start lies on a cell center.
    for k in 0..3 {
        lo[k] = start[k] - ((start[k] - lo[k]) / grid_resolution).ceil() * grid_resolution;
    }

    let grid = Grid::build(lo, hi, grid_resolution, cloud, model.radius)?;
    let s = grid.cell(&start).ok_or_else(|| invalid("start lies outside the planning grid"))?;
    if grid.occupied[grid.index(s)] {
        return Err(Error::Blocked);
    }
    let (g, goal_point) = match grid.cell(&goal) {
        Some(c) if !grid.occupied[grid.index(c)] => (c, goal),
        _ => {
            let c = grid.nearest_free(&goal, GOAL_SNAP).ok_or(Error::Blocked)?;
            (c, grid.center(c))
        }
    };

    let cells = astar(&grid, s, g).ok_or(Error::Blocked)?;
    let mut waypoints: Vec<Point3> = cells.iter().map(|&c| grid.center(c)).collect();
    waypoints[0] = start;
    *waypoints.last_mut().expect("path is non-empty") = goal_point;
    finish(scenario, waypoints, model)
}

fn finish(scenario: &Scenario, waypoints: Vec<Point3>, model: &CollisionModel) -> Result<GlobalPlan> {
    let trajectory = ReferencePath::from_points(waypoints.iter().copied())?.resample(scenario.nominal_speed)?;
    let collision_free = !in_collision(&scenario.cloud, model, &trajectory);
    Ok(GlobalPlan { waypoints, trajectory, collision_free })
}

fn astar(grid: &Grid, start: [usize; 3], goal: [usize; 3]) -> Option<Vec<[usize; 3]>> {
    let n = grid.occupied.len();
    let mut g_cost = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let goal_center = grid.center(goal);
    let h = |c: [usize; 3]| (grid.center(c) - goal_center).norm();
    let si = grid.index(start);
    let gi = grid.index(goal);
    g_cost[si] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Open { f: h(start), g: 0.0, idx: si });
    let mut steps = Vec::with_capacity(26);
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    let len = ((dx * dx + dy * dy + dz * dz) as f64).sqrt() * grid.res;
                    steps.push(([dx, dy, dz], len));
                }
            }
        }
    }
    let [nx, ny, _] = grid.dims;
    let unindex = |i: usize| [i % nx, (i / nx) % ny, i / (nx * ny)];
    while let Some(Open { g, idx, .. }) = open.pop() {
        if closed[idx] || g > g_cost[idx] {
            continue;
        }
        if idx == gi {
            let mut path = vec![unindex(gi)];
            let mut cur = gi;
            while cur != si {
                cur = parent[cur];
                path.push(unindex(cur));
            }
            path.reverse();
            return Some(path);
        }
        closed[idx] = true;
        let c = unindex(idx);
        for (d, len) in &steps {
            let nc = [c[0] as i64 + d[0], c[1] as i64 + d[1], c[2] as i64 + d[2]];
            if (0..3).any(|k| nc[k] < 0 || nc[k] >= grid.dims[k] as i64) {
                continue;
            }
            let nc = [nc[0] as usize, nc[1] as usize, nc[2] as usize];
            let ni = grid.index(nc);
            if grid.occupied[ni] || closed[ni] {
                continue;
            }
            let ng = g + len;
            if ng < g_cost[ni] {
                g_cost[ni] = ng;
                parent[ni] = idx;
                open.push(Open { f: ng + h(nc), g: ng, idx: ni });
            }
        }
    }
    None
}
