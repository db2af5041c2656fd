//! Working-mode changes through serial-singular boundary postures.
//!
//! A plan is a chain of straight world segments. Each segment keeps one
//! working mode; consecutive segments in different modes meet at a crossing
//! point where the diagonal entry of `B` separating the two modes vanishes:
//! `P` on the axis for `eps1`, leg `A` stretched (`|AP| = L1 + L2`) for `eps2`,
//! leg `B` stretched for `eps3`. Modes differing in several signs cross in
//! that order.

use std::cmp::Ordering;
use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result, SerialEntry};
use crate::hybrid::{hybrid_ik, jacobians, normalized_det_a, planar_coordinates};
use crate::model::{
    normalize_angle, DesignParams, PlanarPoint, Sign, WorkingMode, WorldPoint, GEOMETRIC_TOL,
    SINGULAR_TOL,
};
use crate::planar::{ik_all, PlanarIkSolution};
use crate::singularity::condition_number_closed;
use crate::workspace::{mode_posture, reachable_annuli, GridSpec};

/// Validation spacing as a fraction of `L2`.
pub const VALIDATION_FRACTION: f64 = 0.01;
/// Tolerance on the serial condition at crossing points.
pub const CROSSING_TOL: f64 = 1e-6;
/// Cells per side of the detour raster.
pub const DETOUR_GRID: usize = 161;
/// `|det A| / L2³` below which a validation interval is resampled.
const REFINE_DET: f64 = 0.05;
/// Resampling spacing as a fraction of `L2`.
const REFINE_FRACTION: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Waypoint {
    pub point: WorldPoint,
    /// Mode of the segment leaving this waypoint (the last one: the goal mode).
    pub mode: WorkingMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub point: WorldPoint,
    pub entry: SerialEntry,
    /// Index of the crossing in the waypoint list.
    pub waypoint: usize,
    /// Normalized serial entry evaluated at the crossing; zero on the boundary.
    pub residual: f64,
    pub from: WorkingMode,
    pub to: WorkingMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModePlan {
    pub design: DesignParams,
    pub waypoints: Vec<Waypoint>,
    pub crossings: Vec<Crossing>,
    pub total_length: f64,
    /// Arc-length spacing of the IK validation samples.
    pub validation_spacing: f64,
}

/// Point in the mechanism plane whose `u` carries the sign of `eps1`, with
/// the base angle that puts it in the world.
#[derive(Debug, Clone, Copy)]
struct Signed {
    theta1: f64,
    plane: PlanarPoint,
}

fn signed(p: WorldPoint, eps1: Sign) -> Signed {
    match planar_coordinates(p, eps1) {
        Ok((theta1, plane)) => Signed { theta1, plane },
        // on the axis the base angle is free
        Err(_) => Signed {
            theta1: 0.0,
            plane: PlanarPoint::new(0.0, p.y),
        },
    }
}

fn segment_distance(p: PlanarPoint, a: PlanarPoint, b: PlanarPoint) -> (f64, f64) {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((a + ab * t).distance(p), t)
}

/// Minimizes `cost` over a curve parameter in `[lo, hi]` restricted to
/// feasible points: dense sampling, then golden-section refinement inside the
/// feasible bracket around the best sample. Ties go to the smaller `v`.
fn nearest_on_curve(
    curve: impl Fn(f64) -> PlanarPoint,
    feasible: impl Fn(PlanarPoint) -> bool,
    cost: impl Fn(PlanarPoint) -> f64,
    lo: f64,
    hi: f64,
) -> Option<PlanarPoint> {
    const SAMPLES: usize = 4096;
    let step = (hi - lo) / SAMPLES as f64;
    let better = |c: f64, p: PlanarPoint, best: &Option<(f64, PlanarPoint, f64)>| match best {
        None => true,
        Some((bc, bp, _)) => c < bc - 1e-12 || ((c - bc).abs() <= 1e-12 && p.v < bp.v),
    };
    let mut best: Option<(f64, PlanarPoint, f64)> = None;
    for k in 0..=SAMPLES {
        let s = lo + k as f64 * step;
        let p = curve(s);
        if !feasible(p) {
            continue;
        }
        let c = cost(p);
        if better(c, p, &best) {
            best = Some((c, p, s));
        }
    }
    let (_, _, s0) = best?;
    let (mut a, mut b) = ((s0 - step).max(lo), (s0 + step).min(hi));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let eval = |s: f64| {
        let p = curve(s);
        if feasible(p) {
            cost(p)
        } else {
            f64::INFINITY
        }
    };
    for _ in 0..80 {
        let x1 = b - g * (b - a);
        let x2 = a + g * (b - a);
        if eval(x1) <= eval(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    let p = curve(0.5 * (a + b));
    match best {
        Some((c, _, _)) if feasible(p) && cost(p) < c => Some(p),
        _ => best.map(|(_, p, _)| p),
    }
}

/// Raster cells of one mode joined to a seed point without meeting a
/// parallel singularity (`|det A| / L2³` above [`COMPONENT_DET`], one sign).
struct Component {
    grid: GridSpec,
    cells: Vec<bool>,
}

/// Clearance from parallel singularities used by the raster searches.
const COMPONENT_DET: f64 = 1e-3;

fn det_field(design: &DesignParams, grid: &GridSpec, mode: WorkingMode) -> Vec<Option<Sign>> {
    (0..grid.len())
        .map(|k| {
            let post = mode_posture(design, grid.center(k % grid.n, k / grid.n), mode).ok()?;
            let det = normalized_det_a(&jacobians(&post).0, design);
            (det.abs() > COMPONENT_DET).then_some(Sign::of(det, 0.0)?)
        })
        .collect()
}

fn nearest_cell(grid: &GridSpec, p: PlanarPoint, ok: impl Fn(usize) -> bool) -> Option<usize> {
    (0..grid.len()).filter(|&k| ok(k)).min_by(|&x, &y| {
        let dx = grid.center(x % grid.n, x / grid.n).distance(p);
        let dy = grid.center(y % grid.n, y / grid.n).distance(p);
        dx.total_cmp(&dy).then(x.cmp(&y))
    })
}

/// Breadth-first search over 8-neighbours of open cells; returns predecessors.
fn flood(grid: &GridSpec, open: impl Fn(usize) -> bool, start: usize, goal: Option<usize>) -> Vec<usize> {
    let mut prev = vec![usize::MAX; grid.len()];
    prev[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(k) = queue.pop_front() {
        if Some(k) == goal {
            break;
        }
        let (i, j) = ((k % grid.n) as isize, (k / grid.n) as isize);
        for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= grid.n as isize || b >= grid.n as isize {
                continue;
            }
            let kn = grid.index(a as usize, b as usize);
            if prev[kn] == usize::MAX && open(kn) {
                prev[kn] = k;
                queue.push_back(kn);
            }
        }
    }
    prev
}

fn seed_sign(design: &DesignParams, p: WorldPoint, mode: WorkingMode) -> Option<Sign> {
    let post = hybrid_ik(design, p, mode).ok()?;
    Sign::of(normalized_det_a(&jacobians(&post).0, design), 0.0)
}

/// Planar solution at `p` in `mode`, a leg on its serial boundary matching
/// either branch sign. Defined on the axis, unlike [`seed_sign`].
fn planar_solution(design: &DesignParams, p: PlanarPoint, mode: WorkingMode) -> Option<PlanarIkSolution> {
    let fits = |b: Option<Sign>, e: Sign| b.map_or(true, |b| b == e);
    ik_all(design, p)
        .into_iter()
        .find(|s| fits(s.branch_a.sign(), mode.eps2) && fits(s.branch_b.sign(), mode.eps3))
}

/// `det A / L2³` of a planar solution.
fn solution_det(s: &PlanarIkSolution) -> f64 {
    -s.joints.delta().sin()
}

impl Component {
    fn new(design: &DesignParams, mode: WorkingMode, seed: WorldPoint) -> Result<Self> {
        let grid = GridSpec::around(design, DETOUR_GRID)?;
        let field = det_field(design, &grid, mode);
        let plane = signed(seed, mode.eps1).plane;
        let sign = seed_sign(design, seed, mode);
        let open = |k: usize| field[k].is_some() && (sign.is_none() || field[k] == sign);
        let cells = match nearest_cell(&grid, plane, open) {
            Some(start) => flood(&grid, open, start, None)
                .into_iter()
                .map(|p| p != usize::MAX)
                .collect(),
            None => vec![false; grid.len()],
        };
        Ok(Self { grid, cells })
    }

    /// True when a member cell lies within two cells of `p`.
    fn near(&self, p: PlanarPoint) -> bool {
        let g = &self.grid;
        let reach = 2.0 * g.du().hypot(g.dv());
        let fi = ((p.u - g.u_min) / g.du()).floor() as isize;
        let fj = ((p.v - g.v_min) / g.dv()).floor() as isize;
        for j in fj - 3..=fj + 3 {
            for i in fi - 3..=fi + 3 {
                if i < 0 || j < 0 || i >= g.n as isize || j >= g.n as isize {
                    continue;
                }
                let (i, j) = (i as usize, j as usize);
                if self.cells[g.index(i, j)] && g.center(i, j).distance(p) <= reach {
                    return true;
                }
            }
        }
        false
    }
}

/// Crossing point for flipping `entry`, nearest to the chord `from -> to`
/// among boundary points accepted by `joined`.
fn find_crossing(
    design: &DesignParams,
    entry: SerialEntry,
    eps1: Sign,
    from: PlanarPoint,
    to: PlanarPoint,
    joined: impl Fn(PlanarPoint) -> bool,
) -> Result<PlanarPoint> {
    let cost = |p: PlanarPoint| segment_distance(p, from, to).0;
    let side_ok = |p: PlanarPoint| {
        Sign::of(p.u, SINGULAR_TOL * design.l1()) == Some(eps1)
            && reachable_annuli(design, p)
            && joined(p)
    };
    let ro = design.outer_radius();
    let found = match entry {
        SerialEntry::Axis => {
            let half = 0.5 * design.l0() + ro;
            nearest_on_curve(
                |y| PlanarPoint::new(0.0, y),
                |p| reachable_annuli(design, p) && joined(p),
                cost,
                -half,
                half,
            )
        }
        SerialEntry::LegA | SerialEntry::LegB => {
            let pivot = if entry == SerialEntry::LegA {
                design.a()
            } else {
                design.b()
            };
            nearest_on_curve(
                |phi| pivot + PlanarPoint::unit(phi) * ro,
                side_ok,
                cost,
                -std::f64::consts::PI,
                std::f64::consts::PI,
            )
        }
    };
    found.ok_or_else(|| {
        Error::NoCrossing(match entry {
            SerialEntry::Axis => "no reachable point on the base axis".to_owned(),
            SerialEntry::LegA => "leg A stretch circle is not reachable".to_owned(),
            SerialEntry::LegB => "leg B stretch circle is not reachable".to_owned(),
        })
    })
}

/// Normalized serial entry at a crossing point, from the boundary IK solution.
fn crossing_residual(design: &DesignParams, p: PlanarPoint, entry: SerialEntry) -> f64 {
    match entry {
        SerialEntry::Axis => p.u.abs() / design.l1(),
        SerialEntry::LegA | SerialEntry::LegB => ik_all(design, p)
            .iter()
            .map(|s| {
                let j = s.joints;
                if entry == SerialEntry::LegA {
                    (j.theta2 - j.theta4).sin().abs()
                } else {
                    (j.theta3 - j.theta5).sin().abs()
                }
            })
            .fold(f64::INFINITY, f64::min),
    }
}

fn validation_spacing(design: &DesignParams) -> f64 {
    VALIDATION_FRACTION * design.l2()
}

/// Checks a straight world segment in `mode`: IK succeeds, `det A` stays
/// clear of zero and keeps its sign. Endpoints flagged as crossings are
/// exempt (they sit on the serial boundary by construction).
fn validate_segment(
    design: &DesignParams,
    a: WorldPoint,
    b: WorldPoint,
    mode: WorkingMode,
    skip_start: bool,
    skip_end: bool,
) -> Result<()> {
    // distance to a pivot is convex along the segment, so only the inner
    // circles can be violated between samples
    let inner = design.inner_radius();
    for pivot in [design.a(), design.b()] {
        let c = WorldPoint::new(0.0, pivot.v, 0.0);
        let ab = [b.x - a.x, b.y - a.y, b.z - a.z];
        let len2: f64 = ab.iter().map(|x| x * x).sum();
        let t = if len2 > 0.0 {
            (((c.x - a.x) * ab[0] + (c.y - a.y) * ab[1] + (c.z - a.z) * ab[2]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if a.lerp(b, t).distance(c) <= inner + GEOMETRIC_TOL * design.l1() {
            return Err(Error::ValidationFailed(format!(
                "segment enters the inner circle of a pivot in mode {mode}"
            )));
        }
    }
    let spacing = validation_spacing(design);
    let m = ((a.distance(b) / spacing).ceil() as usize).max(1);
    let det_at = |t: f64, at_crossing: bool| -> Result<Option<f64>> {
        let p = a.lerp(b, t);
        if at_crossing {
            return Ok(planar_solution(design, signed(p, mode.eps1).plane, mode).map(|s| solution_det(&s)));
        }
        let posture = hybrid_ik(design, p, mode).map_err(|e| {
            Error::ValidationFailed(format!("IK in mode {mode} at t = {t:.6}: {e}"))
        })?;
        Ok(Some(normalized_det_a(&jacobians(&posture).0, design)))
    };
    let mut sign = None;
    let mut check = |det: f64, t: f64| -> Result<()> {
        if det.abs() <= SINGULAR_TOL {
            return Err(Error::ValidationFailed(format!(
                "parallel singularity in mode {mode} at t = {t:.6}"
            )));
        }
        let s = Sign::of(det, 0.0);
        if sign.is_some() && s != sign {
            return Err(Error::ValidationFailed(format!(
                "det A changes sign in mode {mode} at t = {t:.6}"
            )));
        }
        sign = s;
        Ok(())
    };
    let mut prev: Option<f64> = None;
    for k in 0..=m {
        let t = k as f64 / m as f64;
        let Some(det) = det_at(t, (k == 0 && skip_start) || (k == m && skip_end))? else {
            continue;
        };
        // a singular curve grazed between two samples leaves both of them
        // small; resample such intervals finely
        if let Some(d0) = prev {
            if d0.abs().min(det.abs()) < REFINE_DET {
                let fine = ((spacing / (REFINE_FRACTION * design.l2())).ceil() as usize).max(2);
                for q in 1..fine {
                    let tq = (k as f64 - 1.0 + q as f64 / fine as f64) / m as f64;
                    if let Some(dq) = det_at(tq, false)? {
                        check(dq, tq)?;
                    }
                }
            }
        }
        check(det, t)?;
        prev = Some(det);
    }
    Ok(())
}

/// Detour between two points of one mode: breadth-first search over the
/// mode's raster in signed planar coordinates, then greedy shortcutting with
/// validated straight segments. Returns the interior waypoints.
fn detour(
    design: &DesignParams,
    from: WorldPoint,
    to: WorldPoint,
    mode: WorkingMode,
    skip_start: bool,
    skip_end: bool,
) -> Result<Vec<WorldPoint>> {
    let fail = |why: &str| Error::ValidationFailed(format!("no detour in mode {mode}: {why}"));
    let grid = GridSpec::around(design, DETOUR_GRID)?;
    let (sa, sb) = (signed(from, mode.eps1), signed(to, mode.eps1));
    let field = det_field(design, &grid, mode);
    let det_sign = seed_sign(design, if skip_start { to } else { from }, mode);
    let open = |k: usize| field[k].is_some() && (det_sign.is_none() || field[k] == det_sign);
    let start = nearest_cell(&grid, sa.plane, open).ok_or_else(|| fail("empty raster"))?;
    let goal = nearest_cell(&grid, sb.plane, open).ok_or_else(|| fail("empty raster"))?;
    let prev = flood(&grid, open, start, Some(goal));
    if prev[goal] == usize::MAX {
        return Err(fail("endpoints are not connected"));
    }
    let mut cells = vec![goal];
    while *cells.last().unwrap() != start {
        cells.push(prev[*cells.last().unwrap()]);
    }
    cells.reverse();

    // planar route with the base angle interpolated along its arc length
    let mut plane: Vec<PlanarPoint> = vec![sa.plane];
    plane.extend(cells.iter().map(|&k| grid.center(k % grid.n, k / grid.n)));
    plane.push(sb.plane);
    let mut arc = vec![0.0];
    for w in plane.windows(2) {
        arc.push(arc.last().unwrap() + w[0].distance(w[1]));
    }
    let total = arc.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let dtheta = normalize_angle(sb.theta1 - sa.theta1);
    let world: Vec<WorldPoint> = plane
        .iter()
        .zip(&arc)
        .map(|(p, s)| WorldPoint::from_planar(*p, sa.theta1 + dtheta * s / total))
        .collect();
    let last = world.len() - 1;
    let mut route = vec![from];
    let mut at = 0;
    while at < last {
        let mut next = None;
        for cand in (at + 1..=last).rev() {
            let a = if at == 0 { from } else { world[at] };
            let b = if cand == last { to } else { world[cand] };
            if validate_segment(design, a, b, mode, at == 0 && skip_start, cand == last && skip_end)
                .is_ok()
            {
                next = Some(cand);
                break;
            }
        }
        let Some(n) = next else {
            return Err(fail("raster route does not validate"));
        };
        if n != last {
            route.push(world[n]);
        }
        at = n;
    }
    Ok(route.split_off(1))
}

fn check_endpoint(design: &DesignParams, p: WorldPoint, mode: WorkingMode) -> Result<()> {
    match hybrid_ik(design, p, mode) {
        Ok(_) => Ok(()),
        Err(Error::NonFinite) => Err(Error::NonFinite),
        Err(_) => Err(Error::Unreachable),
    }
}

/// Plans a path from `start` to `goal`, each given with its working mode.
/// The plan is built from the endpoint that sorts first (mode, then
/// coordinates) so that swapping the endpoints yields the reversed path.
pub fn plan_mode_change(
    design: &DesignParams,
    start: (WorldPoint, WorkingMode),
    goal: (WorldPoint, WorkingMode),
) -> Result<ModePlan> {
    check_endpoint(design, start.0, start.1)?;
    check_endpoint(design, goal.0, goal.1)?;
    let order = goal.1.index().cmp(&start.1.index()).then_with(|| {
        let (g, s) = (goal.0.to_array(), start.0.to_array());
        g.iter()
            .zip(&s)
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    let swapped = order.is_lt();
    if swapped {
        plan_directed(design, goal, start).map(reversed)
    } else {
        plan_directed(design, start, goal)
    }
}

fn reversed(plan: ModePlan) -> ModePlan {
    let n = plan.waypoints.len();
    let waypoints: Vec<Waypoint> = (0..n)
        .rev()
        .map(|k| Waypoint {
            point: plan.waypoints[k].point,
            mode: plan.waypoints[k.saturating_sub(1)].mode,
        })
        .collect();
    let crossings = plan
        .crossings
        .iter()
        .rev()
        .map(|c| Crossing {
            waypoint: n - 1 - c.waypoint,
            from: c.to,
            to: c.from,
            ..*c
        })
        .collect();
    let total_length = waypoints
        .windows(2)
        .map(|w| w[0].point.distance(w[1].point))
        .sum();
    ModePlan {
        waypoints,
        crossings,
        total_length,
        ..plan
    }
}

fn plan_directed(
    design: &DesignParams,
    start: (WorldPoint, WorkingMode),
    goal: (WorldPoint, WorkingMode),
) -> Result<ModePlan> {
    // det A varies continuously along any motion, serial crossings included
    let det_sign = seed_sign(design, start.0, start.1);
    if det_sign != seed_sign(design, goal.0, goal.1) {
        let why = "start and goal have opposite det A signs; every path between them meets a parallel singularity";
        return Err(if start.1 == goal.1 {
            Error::ValidationFailed(why.to_owned())
        } else {
            Error::NoCrossing(why.to_owned())
        });
    }

    // (point, mode of the segment leaving it, crossing entry if any)
    let mut nodes: Vec<(WorldPoint, WorkingMode, Option<SerialEntry>)> = vec![(start.0, start.1, None)];
    let mut mode = start.1;
    let steps = [
        (SerialEntry::Axis, mode.eps1 != goal.1.eps1),
        (SerialEntry::LegA, mode.eps2 != goal.1.eps2),
        (SerialEntry::LegB, mode.eps3 != goal.1.eps3),
    ];
    let mut crossings = Vec::new();
    for (entry, needed) in steps {
        if !needed {
            continue;
        }
        let from_pt = nodes.last().unwrap().0;
        let next_mode = match entry {
            SerialEntry::Axis => WorkingMode::new(goal.1.eps1, mode.eps2, mode.eps3),
            SerialEntry::LegA => WorkingMode::new(mode.eps1, goal.1.eps2, mode.eps3),
            SerialEntry::LegB => WorkingMode::new(mode.eps1, mode.eps2, goal.1.eps3),
        };
        // chord in signed planar coordinates: the current side for the start
        // of the chord, the goal's side for its end
        let a = signed(from_pt, mode.eps1);
        let b = signed(goal.0, goal.1.eps1);
        let eps1 = if entry == SerialEntry::Axis { mode.eps1 } else { next_mode.eps1 };
        // the crossing must be reachable from the current point without a
        // parallel singularity, and for the last crossing also from the goal
        let behind = Component::new(design, mode, from_pt)?;
        let last = steps.iter().rev().find(|s| s.1).map(|s| s.0) == Some(entry);
        let ahead = if last {
            Some(Component::new(design, goal.1, goal.0)?)
        } else {
            None
        };
        // clear of parallel singularities and of the serial boundaries not
        // being crossed
        let clear = |p: PlanarPoint| {
            let Some(sol) = planar_solution(design, p, mode) else {
                return false;
            };
            let det = solution_det(&sol);
            let j = sol.joints;
            let legs = [
                (SerialEntry::LegA, (j.theta2 - j.theta4).sin()),
                (SerialEntry::LegB, (j.theta3 - j.theta5).sin()),
                (SerialEntry::Axis, p.u / design.l1()),
            ];
            det.abs() > COMPONENT_DET
                && Sign::of(det, 0.0) == det_sign
                && legs.iter().all(|&(e, v)| e == entry || v.abs() > COMPONENT_DET)
        };
        let joined = |p: PlanarPoint| {
            behind.near(p) && ahead.as_ref().map_or(true, |c| c.near(p)) && clear(p)
        };
        let x = find_crossing(design, entry, eps1, a.plane, b.plane, joined)?;
        let point = if entry == SerialEntry::Axis {
            WorldPoint::new(0.0, x.v, 0.0)
        } else {
            let (_, t) = segment_distance(x, a.plane, b.plane);
            let theta1 = if from_pt.axis_distance() == 0.0 {
                b.theta1
            } else {
                a.theta1 + t * normalize_angle(b.theta1 - a.theta1)
            };
            WorldPoint::from_planar(x, theta1)
        };
        let residual = crossing_residual(design, x, entry);
        if !(residual <= CROSSING_TOL) {
            return Err(Error::ValidationFailed(format!(
                "crossing residual {residual:e} on {entry:?}"
            )));
        }
        crossings.push(Crossing {
            point,
            entry,
            waypoint: 0,
            residual,
            from: mode,
            to: next_mode,
        });
        nodes.push((point, next_mode, Some(entry)));
        mode = next_mode;
    }
    nodes.push((goal.0, goal.1, None));

    // validate each segment, detouring where the straight line fails
    let mut waypoints = vec![Waypoint {
        point: nodes[0].0,
        mode: nodes[0].1,
    }];
    let mut crossing_index = Vec::new();
    for w in nodes.windows(2) {
        let ((a, seg_mode, a_cross), (b, _, b_cross)) = (w[0], w[1]);
        if a.distance(b) > 0.0 {
            let skip = (a_cross.is_some(), b_cross.is_some());
            let interior = match validate_segment(design, a, b, seg_mode, skip.0, skip.1) {
                Ok(()) => Vec::new(),
                Err(_) => detour(design, a, b, seg_mode, skip.0, skip.1)?,
            };
            waypoints.extend(interior.into_iter().map(|p| Waypoint { point: p, mode: seg_mode }));
            waypoints.push(Waypoint {
                point: b,
                mode: w[1].1,
            });
        } else if b_cross.is_some() || waypoints.last().unwrap().mode != w[1].1 {
            waypoints.push(Waypoint {
                point: b,
                mode: w[1].1,
            });
        }
        if b_cross.is_some() {
            crossing_index.push(waypoints.len() - 1);
        }
    }
    for (c, k) in crossings.iter_mut().zip(crossing_index) {
        c.waypoint = k;
    }
    let total_length = waypoints
        .windows(2)
        .map(|w| w[0].point.distance(w[1].point))
        .sum();
    Ok(ModePlan {
        design: *design,
        waypoints,
        crossings,
        total_length,
        validation_spacing: validation_spacing(design),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeStats {
    pub mode: WorkingMode,
    pub feasible: bool,
    pub samples: usize,
    pub kappa_max: Option<f64>,
    pub kappa_mean: Option<f64>,
}

/// Samples `path` at the validation spacing and reports `kappa(A)` per mode.
/// Feasible modes come first, by increasing maximum `kappa`; ties and
/// infeasible modes keep the lexicographic mode order.
pub fn compare_modes_along(
    design: &DesignParams,
    path: &[WorldPoint],
    modes: &[WorkingMode],
) -> Vec<ModeStats> {
    let spacing = validation_spacing(design);
    let mut samples = Vec::new();
    if let Some(&first) = path.first() {
        samples.push(first);
    }
    for w in path.windows(2) {
        let m = ((w[0].distance(w[1]) / spacing).ceil() as usize).max(1);
        samples.extend((1..=m).map(|k| w[0].lerp(w[1], k as f64 / m as f64)));
    }
    let mut out: Vec<ModeStats> = modes
        .iter()
        .map(|&mode| {
            let kappas: Option<Vec<f64>> = samples
                .iter()
                .map(|&p| {
                    hybrid_ik(design, p, mode)
                        .ok()
                        .map(|post| condition_number_closed(post.joints.delta()))
                })
                .collect();
            match kappas {
                Some(k) if !k.is_empty() => ModeStats {
                    mode,
                    feasible: true,
                    samples: k.len(),
                    kappa_max: Some(k.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                    kappa_mean: Some(k.iter().sum::<f64>() / k.len() as f64),
                },
                _ => ModeStats {
                    mode,
                    feasible: false,
                    samples: samples.len(),
                    kappa_max: None,
                    kappa_mean: None,
                },
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then_with(|| match (a.kappa_max, b.kappa_max) {
                (Some(x), Some(y)) => x.total_cmp(&y),
                _ => std::cmp::Ordering::Equal,
            })
            .then(a.mode.index().cmp(&b.mode.index()))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn d(l0: f64, l1: f64, l2: f64) -> DesignParams {
        DesignParams::new(l0, l1, l2).unwrap()
    }

    fn m(s: &str) -> WorkingMode {
        s.parse().unwrap()
    }

    #[test]
    fn same_point_same_mode() {
        let design = d(2.0, 1.0, SQRT_2);
        let p = WorldPoint::new(2.0, 0.0, 0.0);
        let plan = plan_mode_change(&design, (p, m("+-+")), (p, m("+-+"))).unwrap();
        assert_eq!(plan.waypoints.len(), 1);
        assert_eq!(plan.total_length, 0.0);
        assert!(plan.crossings.is_empty());
    }

    #[test]
    fn leg_a_crossing() {
        let design = d(2.0, 1.0, SQRT_2);
        let p = WorldPoint::new(2.0, 0.0, 0.0);
        let plan2 = plan_mode_change(&design, (p, m("+-+")), (p, m("+++"))).unwrap();
        assert_eq!(plan2.crossings.len(), 1);
        let x = plan2.crossings[0];
        assert_eq!(x.entry, SerialEntry::LegA);
        let a = WorldPoint::new(0.0, -1.0, 0.0);
        assert!((x.point.distance(a) - (1.0 + SQRT_2)).abs() < 1e-9);
        assert!(x.residual <= CROSSING_TOL);
        assert!(plan2.total_length > 0.0);
        // both sides of the crossing hold IK in their modes
        let k = x.waypoint;
        let before = plan2.waypoints[k - 1].point.lerp(x.point, 0.99);
        let after = x.point.lerp(plan2.waypoints[k + 1].point, 0.01);
        assert!(hybrid_ik(&design, before, m("+-+")).is_ok());
        assert!(hybrid_ik(&design, after, m("+++")).is_ok());
    }

    #[test]
    fn unreachable_endpoints() {
        let design = d(2.0, 1.0, SQRT_2);
        let p = WorldPoint::new(2.0, 0.0, 0.0);
        let far = WorldPoint::new(10.0, 0.0, 0.0);
        assert_eq!(
            plan_mode_change(&design, (p, m("+-+")), (far, m("+-+"))),
            Err(Error::Unreachable)
        );
    }

    #[test]
    fn axis_crossing_requires_reachable_axis() {
        let design = d(5.0, 1.0, 4.0);
        let p = WorldPoint::new(3.0, 0.0, 0.0);
        let err = plan_mode_change(&design, (p, m("+-+")), (p, m("--+"))).unwrap_err();
        assert_eq!(err.reason(), "NoCrossing");

        let design = d(2.0, 1.0, SQRT_2);
        // from (2, 0) the axis lies beyond a flat singularity of this mode
        let p = WorldPoint::new(2.0, 0.0, 0.0);
        let err = plan_mode_change(&design, (p, m("+-+")), (p, m("--+"))).unwrap_err();
        assert_eq!(err.reason(), "NoCrossing");
        let p = WorldPoint::new(0.5, 0.0, 0.0);
        let plan = plan_mode_change(&design, (p, m("+-+")), (p, m("--+"))).unwrap();
        assert_eq!(plan.crossings[0].entry, SerialEntry::Axis);
        assert_eq!(plan.crossings[0].point.axis_distance(), 0.0);
    }

    #[test]
    fn reversal_keeps_length() {
        let design = d(2.0, 1.0, SQRT_2);
        let s = WorldPoint::new(2.0, 0.0, 0.0);
        let g = WorldPoint::new(1.2, 0.5, -0.9);
        let fwd = plan_mode_change(&design, (s, m("+-+")), (g, m("+++"))).unwrap();
        let back = plan_mode_change(&design, (g, m("+++")), (s, m("+-+"))).unwrap();
        assert!((fwd.total_length - back.total_length).abs() < 1e-9);
    }

    #[test]
    fn compare_at_isotropic_point() {
        let design = d(2.0, 1.0, SQRT_2);
        let p = WorldPoint::new(2.0, 0.0, 0.0);
        let stats = compare_modes_along(&design, &[p], &[m("+-+"), m("+++")]);
        let iso = stats.iter().find(|s| s.mode == m("+-+")).unwrap();
        assert!(iso.feasible);
        assert!((iso.kappa_max.unwrap() - 1.0).abs() < 1e-12);
        assert!((iso.kappa_mean.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(stats[0].mode, m("+-+"));
    }

    #[test]
    fn compare_outside_is_infeasible() {
        let design = d(2.0, 1.0, SQRT_2);
        let path = [WorldPoint::new(2.0, 0.0, 0.0), WorldPoint::new(9.0, 0.0, 0.0)];
        let stats = compare_modes_along(&design, &path, &WorkingMode::all());
        assert!(stats.iter().all(|s| !s.feasible));
        let order: Vec<usize> = stats.iter().map(|s| s.mode.index()).collect();
        assert_eq!(order, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn compare_ranking_is_sorted() {
        let design = d(2.0, 1.0, SQRT_2);
        let path = [WorldPoint::new(1.8, -0.3, 0.2), WorldPoint::new(1.6, 0.4, -0.1)];
        let stats = compare_modes_along(&design, &path, &WorkingMode::all());
        let feasible: Vec<_> = stats.iter().filter(|s| s.feasible).collect();
        assert!(!feasible.is_empty());
        for w in feasible.windows(2) {
            assert!(w[0].kappa_max.unwrap() <= w[1].kappa_max.unwrap());
        }
        let mut shuffled = WorkingMode::all();
        shuffled.reverse();
        assert_eq!(compare_modes_along(&design, &path, &shuffled), stats);
    }

    #[test]
    fn opposite_det_signs_have_no_plan() {
        // det A is -0.47 at the start and +0.49 at the goal; the axis lies between
        let design = d(2.0, 1.0, SQRT_2);
        let s = WorldPoint::new(0.2414213562373095, -0.1850920881974102, 0.0);
        let g = WorldPoint::new(-0.2414213562373095, -0.2946711794105198, 0.0);
        let err = plan_mode_change(&design, (s, m("+--")), (g, m("---"))).unwrap_err();
        assert_eq!(err.reason(), "NoCrossing");
    }

    #[test]
    fn crossings_keep_clear_of_other_boundaries() {
        // the nearest axis point (0, -1) sits on leg A's inner circle
        let design = d(1.0, 1.0, 1.5);
        let s = WorldPoint::new(-0.25, -1.0280844391511095, 0.0);
        let g = WorldPoint::new(1.6106438786894381, -0.6656480859146284, 0.0);
        let plan = plan_mode_change(&design, (s, m("--+")), (g, m("+--"))).unwrap();
        for c in &plan.crossings {
            let ap = c.point.distance(WorldPoint::new(0.0, -0.5, 0.0));
            assert!(ap > design.inner_radius() + 1e-7, "{ap}");
        }
        for w in plan.waypoints.windows(2) {
            for k in 1..400 {
                let q = w[0].point.lerp(w[1].point, k as f64 / 400.0);
                assert!(hybrid_ik(&design, q, w[0].mode).is_ok());
            }
        }
    }
}
