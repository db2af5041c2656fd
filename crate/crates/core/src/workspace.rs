//! Workspace cross-sections, joint-space maps, areas and volumes.
//!
//! Cartesian rasters live in the mechanism plane `(u, v)`; the 3-D workspace
//! is the revolution of the half-plane `u >= 0` about `AB`. Cells are sampled
//! at their centers and stored row-major (rows of constant `v`, `u` increasing).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hybrid::{jacobians, normalized_b_entries, normalized_det_a};
use crate::model::{
    DesignParams, JointState, PlanarPoint, Posture, Sign, WorkingMode, WorldPoint,
    GEOMETRIC_TOL, SINGULAR_TOL,
};
use crate::planar::{planar_fk, planar_ik};
use crate::singularity::condition_number_closed;

/// Default Monte-Carlo seed.
pub const DEFAULT_SEED: u64 = 0x5eed_f1be;

/// Cell flag: inverse kinematics hit a leg boundary, or a serial-singular
/// entry changes sign next to this cell.
pub const FLAG_SERIAL: u8 = 1;
/// Cell flag: `P` on the line `AB` (`u = 0`).
pub const FLAG_AXIS: u8 = 2;
/// Cell flag: flat parallel singularity (`C`, `D`, `P` aligned) in or next to the cell.
pub const FLAG_PARALLEL_FLAT: u8 = 4;
/// Cell flag: coincident parallel singularity (`C = D`) in the cell.
pub const FLAG_PARALLEL_COINCIDENT: u8 = 8;
/// Both parallel flags.
pub const FLAG_PARALLEL: u8 = FLAG_PARALLEL_FLAT | FLAG_PARALLEL_COINCIDENT;

/// Rectangular `n x n` cell grid over `[u_min, u_max] x [v_min, v_max]`.
/// Reused for joint space with `u = theta2`, `v = theta3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64, n: usize) -> Result<Self> {
        let g = Self {
            u_min,
            u_max,
            v_min,
            v_max,
            n,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn square(min: f64, max: f64, n: usize) -> Result<Self> {
        Self::new(min, max, min, max, n)
    }

    /// Square-celled grid covering both annuli with a 5% margin.
    pub fn around(design: &DesignParams, n: usize) -> Result<Self> {
        let r = design.outer_radius() * 1.05;
        let half_v = 0.5 * design.l0() + r;
        let half = r.max(half_v);
        Self::new(-half, half, -half, half, n)
    }

    /// The `[-pi, pi]²` joint-space grid.
    pub fn joint_space(n: usize) -> Result<Self> {
        use std::f64::consts::PI;
        Self::square(-PI, PI, n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.u_min, self.u_max, self.v_min, self.v_max]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidGrid("non-finite bounds".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidGrid("zero cells".into()));
        }
        if !(self.u_max > self.u_min && self.v_max > self.v_min) {
            return Err(Error::InvalidGrid("empty range".into()));
        }
        Ok(())
    }

    pub fn du(&self) -> f64 {
        (self.u_max - self.u_min) / self.n as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_max - self.v_min) / self.n as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.du() * self.dv()
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Center of cell `(i, j)`, `i` along `u` and `j` along `v`.
    pub fn center(&self, i: usize, j: usize) -> PlanarPoint {
        PlanarPoint::new(
            self.u_min + (i as f64 + 0.5) * self.du(),
            self.v_min + (j as f64 + 0.5) * self.dv(),
        )
    }

    /// Row-major index of cell `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    /// Cell containing `p`, if inside the grid.
    pub fn locate(&self, p: PlanarPoint) -> Option<(usize, usize)> {
        let fi = (p.u - self.u_min) / self.du();
        let fj = (p.v - self.v_min) / self.dv();
        if fi < 0.0 || fj < 0.0 || fi >= self.n as f64 || fj >= self.n as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    /// 4-neighbours of `(i, j)` inside the grid.
    pub fn neighbours(&self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (i, j) = (i as isize, j as isize);
        [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
            .into_iter()
            .filter(|&(a, b)| a >= 0 && b >= 0 && (a as usize) < self.n && (b as usize) < self.n)
            .map(|(a, b)| (a as usize, b as usize))
    }
}

/// True iff `|AP|` and `|BP|` both lie in `[|L1 - L2|, L1 + L2]`.
pub fn reachable_annuli(design: &DesignParams, p: PlanarPoint) -> bool {
    let (lo, hi) = (design.inner_radius(), design.outer_radius());
    let ok = |r: f64| r >= lo && r <= hi;
    ok(p.distance(design.a())) && ok(p.distance(design.b()))
}

/// Planar working-mode feasibility: IK succeeds and `eps1` matches the side of `AB`.
pub fn mode_posture(design: &DesignParams, p: PlanarPoint, mode: WorkingMode) -> Result<Posture> {
    if p.u.abs() <= GEOMETRIC_TOL * design.l1() {
        return Err(Error::AxisDegenerate);
    }
    if Sign::of(p.u, 0.0) != Some(mode.eps1) {
        return Err(Error::Unreachable);
    }
    let sol = planar_ik(design, p, mode.eps2, mode.eps3)?;
    Ok(Posture {
        design: *design,
        joints: sol.joints,
        c: sol.c,
        d: sol.d,
        p_plane: p,
        p_world: WorldPoint::from_planar(p, 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellRecord {
    pub u: f64,
    pub v: f64,
    /// Inside the annuli intersection.
    pub reachable: bool,
    /// Bit `m.index()` set when IK succeeds in working mode `m`.
    pub mode_mask: u8,
    pub det_a: Option<f64>,
    pub det_b: Option<f64>,
    pub kappa: Option<f64>,
    pub flags: u8,
}

impl CellRecord {
    pub fn in_mode(&self, mode: WorkingMode) -> bool {
        self.mode_mask & (1 << mode.index()) != 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkspaceRaster {
    pub design: DesignParams,
    pub grid: GridSpec,
    /// Mode whose posture supplies `det_a`, `det_b` and `kappa`.
    pub mode: Option<WorkingMode>,
    pub cells: Vec<CellRecord>,
}

impl WorkspaceRaster {
    pub fn cell(&self, i: usize, j: usize) -> &CellRecord {
        &self.cells[self.grid.index(i, j)]
    }

    pub fn reachable_count(&self) -> usize {
        self.cells.iter().filter(|c| c.reachable).count()
    }

    /// Area of the annuli intersection, by cell count.
    pub fn reachable_area(&self) -> f64 {
        self.reachable_count() as f64 * self.grid.cell_area()
    }

    pub fn mode_count(&self, mode: WorkingMode) -> usize {
        self.cells.iter().filter(|c| c.in_mode(mode)).count()
    }

    pub fn mode_area(&self, mode: WorkingMode) -> f64 {
        self.mode_count(mode) as f64 * self.grid.cell_area()
    }

    /// Cells carrying any parallel flag.
    pub fn parallel_singular_count(&self) -> usize {
        self.cells.iter().filter(|c| c.flags & FLAG_PARALLEL != 0).count()
    }

    /// Parallel-flagged cells whose four neighbours are all feasible in the
    /// raster's mode, i.e. singular cells away from the mode's boundary.
    pub fn interior_parallel_cells(&self) -> Vec<(usize, usize)> {
        let Some(mode) = self.mode else {
            return Vec::new();
        };
        let g = &self.grid;
        let mut out = Vec::new();
        for j in 0..g.n {
            for i in 0..g.n {
                let c = self.cell(i, j);
                if c.flags & FLAG_PARALLEL == 0 || !c.in_mode(mode) {
                    continue;
                }
                let nbrs: Vec<_> = g.neighbours(i, j).collect();
                if nbrs.len() == 4 && nbrs.iter().all(|&(a, b)| self.cell(a, b).in_mode(mode)) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn cell_record(design: &DesignParams, p: PlanarPoint, mode: Option<WorkingMode>) -> CellRecord {
    let reachable = reachable_annuli(design, p);
    let mut rec = CellRecord {
        u: p.u,
        v: p.v,
        reachable,
        mode_mask: 0,
        det_a: None,
        det_b: None,
        kappa: None,
        flags: 0,
    };
    if !reachable {
        return rec;
    }
    for m in WorkingMode::all() {
        if mode_posture(design, p, m).is_ok() {
            rec.mode_mask |= 1 << m.index();
        }
    }
    let Some(mode) = mode else {
        if p.u.abs() <= GEOMETRIC_TOL * design.l1() {
            rec.flags |= FLAG_AXIS;
        }
        return rec;
    };
    match mode_posture(design, p, mode) {
        Ok(posture) => {
            let (a, _) = jacobians(&posture);
            let det_a = normalized_det_a(&a, design);
            rec.det_a = Some(det_a);
            rec.det_b = Some(normalized_b_entries(&posture).iter().product());
            rec.kappa = Some(condition_number_closed(posture.joints.delta()));
            if posture.c.distance(posture.d) < SINGULAR_TOL * design.l1() {
                rec.flags |= FLAG_PARALLEL_COINCIDENT;
            } else if det_a.abs() < SINGULAR_TOL {
                rec.flags |= FLAG_PARALLEL_FLAT;
            }
        }
        Err(Error::OnSerialBoundary(_)) => rec.flags |= FLAG_SERIAL,
        Err(Error::AxisDegenerate) => rec.flags |= FLAG_AXIS,
        Err(_) => {}
    }
    rec
}

/// Flags the smaller-magnitude cell of every 4-neighbour pair whose values
/// have opposite signs: a zero level of `value` runs between them.
fn flag_sign_changes(
    grid: &GridSpec,
    value: impl Fn(usize) -> Option<f64>,
    flags: &mut [u8],
    flag: u8,
) {
    for j in 0..grid.n {
        for i in 0..grid.n {
            let k = grid.index(i, j);
            let Some(x) = value(k) else { continue };
            // right and up neighbours cover every pair once
            for (a, b) in [(i + 1, j), (i, j + 1)] {
                if a >= grid.n || b >= grid.n {
                    continue;
                }
                let kn = grid.index(a, b);
                let Some(y) = value(kn) else { continue };
                if x * y < 0.0 {
                    flags[if x.abs() <= y.abs() { k } else { kn }] |= flag;
                }
            }
        }
    }
}

/// Cartesian cross-section in the mechanism plane. With a mode, each
/// feasible cell carries that mode's `det A / L2³`, normalized `det B` and
/// `kappa(A)`, and sign changes of `det A` between neighbours mark the flat
/// parallel-singularity curves.
pub fn cross_section(
    design: &DesignParams,
    grid: &GridSpec,
    mode: Option<WorkingMode>,
) -> Result<WorkspaceRaster> {
    grid.validate()?;
    if grid.n < 2 {
        return Err(Error::InvalidGrid("need at least 2 cells per side".into()));
    }
    let mut cells: Vec<CellRecord> = (0..grid.len())
        .into_par_iter()
        .map(|k| cell_record(design, grid.center(k % grid.n, k / grid.n), mode))
        .collect();
    if mode.is_some() {
        let det: Vec<Option<f64>> = cells.iter().map(|c| c.det_a).collect();
        let mut flags: Vec<u8> = cells.iter().map(|c| c.flags).collect();
        flag_sign_changes(grid, |k| det[k], &mut flags, FLAG_PARALLEL_FLAT);
        for (c, f) in cells.iter_mut().zip(flags) {
            c.flags = f;
        }
    }
    Ok(WorkspaceRaster {
        design: *design,
        grid: *grid,
        mode,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointCell {
    pub theta2: f64,
    pub theta3: f64,
    /// Forward kinematics succeeds in the raster's assembly mode.
    pub feasible: bool,
    pub det_a: Option<f64>,
    /// `|CD| / (2 L2)`; above 1 the distal circles are disjoint.
    pub cd_ratio: f64,
    pub flags: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointSpaceRaster {
    pub design: DesignParams,
    pub grid: GridSpec,
    pub assembly: crate::model::AssemblyMode,
    pub cells: Vec<JointCell>,
}

impl JointSpaceRaster {
    pub fn cell(&self, i: usize, j: usize) -> &JointCell {
        &self.cells[self.grid.index(i, j)]
    }

    pub fn parallel_singular_count(&self) -> usize {
        self.cells.iter().filter(|c| c.flags & FLAG_PARALLEL != 0).count()
    }

    pub fn feasible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.feasible).count()
    }
}

/// Actuated angles `(theta2, theta3)` at which `C = D`; empty when `L0 > 2 L1`.
pub fn coincident_joint_pairs(design: &DesignParams) -> Vec<(f64, f64)> {
    let half = 0.5 * design.l0();
    let l1 = design.l1();
    if half > l1 {
        return Vec::new();
    }
    let w = (l1 * l1 - half * half).max(0.0).sqrt();
    let mut pts = vec![PlanarPoint::new(w, 0.0)];
    if w > 0.0 {
        pts.push(PlanarPoint::new(-w, 0.0));
    }
    pts.into_iter()
        .map(|x| ((x - design.a()).angle(), (x - design.b()).angle()))
        .collect()
}

/// Joint-space map over `(theta2, theta3)` for one assembly mode.
///
/// Flat parallel singularities are the curve `|CD| = 2 L2` where the two
/// assemblies merge; a cell is flagged when `|CD|² - 4 L2²` changes sign
/// across its corners. Coincident singularities are isolated points found in
/// closed form. Serial-entry sign changes between neighbours set [`FLAG_SERIAL`].
pub fn joint_space_map(
    design: &DesignParams,
    grid: &GridSpec,
    assembly: crate::model::AssemblyMode,
) -> Result<JointSpaceRaster> {
    grid.validate()?;
    let (l1, l2) = (design.l1(), design.l2());
    let gap = |t2: f64, t3: f64| {
        let c = design.a() + PlanarPoint::unit(t2) * l1;
        let d = design.b() + PlanarPoint::unit(t3) * l1;
        let cd = c.distance(d);
        (cd, cd * cd - 4.0 * l2 * l2)
    };
    let (du, dv) = (grid.du(), grid.dv());
    let mut cells: Vec<JointCell> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let center = grid.center(k % grid.n, k / grid.n);
            let (t2, t3) = (center.u, center.v);
            let (cd, g) = gap(t2, t3);
            let mut flags = 0;
            let corners = [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)]
                .map(|(a, b)| gap(t2 + a * du, t3 + b * dv).1);
            let straddles = corners.iter().any(|&x| x <= 0.0) && corners.iter().any(|&x| x > 0.0);
            if straddles || g.abs() < SINGULAR_TOL * 4.0 * l2 * l2 {
                flags |= FLAG_PARALLEL_FLAT;
            }
            if cd < SINGULAR_TOL * l1 {
                flags |= FLAG_PARALLEL_COINCIDENT;
            }
            let (feasible, det_a) = match planar_fk(design, t2, t3, assembly) {
                Ok((_, joints)) => (true, Some(-joints.delta().sin())),
                Err(_) => (false, None),
            };
            JointCell {
                theta2: t2,
                theta3: t3,
                feasible,
                det_a,
                cd_ratio: cd / (2.0 * l2),
                flags,
            }
        })
        .collect();

    for (t2, t3) in coincident_joint_pairs(design) {
        if let Some((i, j)) = grid.locate(PlanarPoint::new(t2, t3)) {
            cells[grid.index(i, j)].flags |= FLAG_PARALLEL_COINCIDENT;
        }
    }

    let entries: Vec<Option<[f64; 2]>> = cells
        .iter()
        .map(|c| {
            c.feasible.then(|| {
                let (_, j) = planar_fk(design, c.theta2, c.theta3, assembly).expect("feasible");
                [(j.theta2 - j.theta4).sin(), (j.theta3 - j.theta5).sin()]
            })
        })
        .collect();
    let mut flags: Vec<u8> = cells.iter().map(|c| c.flags).collect();
    for leg in 0..2 {
        flag_sign_changes(grid, |k| entries[k].map(|e| e[leg]), &mut flags, FLAG_SERIAL);
    }
    for (c, f) in cells.iter_mut().zip(flags) {
        c.flags = f;
    }
    Ok(JointSpaceRaster {
        design: *design,
        grid: *grid,
        assembly,
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub volume: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn bounding_box(design: &DesignParams) -> (f64, f64, f64) {
    let r = design.outer_radius();
    (r, -0.5 * design.l0() - r, 0.5 * design.l0() + r)
}

/// Monte-Carlo volume of the revolved workspace, sampling a box around it.
pub fn workspace_volume(design: &DesignParams, samples: usize, seed: u64) -> Result<VolumeEstimate> {
    if samples < 1000 {
        return Err(Error::InvalidGrid(format!(
            "need at least 1000 samples, got {samples}"
        )));
    }
    let (r, y_lo, y_hi) = bounding_box(design);
    let box_volume = (2.0 * r) * (2.0 * r) * (y_hi - y_lo);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        let x = rng.gen_range(-r..r);
        let y = rng.gen_range(y_lo..y_hi);
        let z = rng.gen_range(-r..r);
        if reachable_annuli(design, PlanarPoint::new(x.hypot(z), y)) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let frac = hits as f64 / n;
    Ok(VolumeEstimate {
        volume: box_volume * frac,
        stderr: box_volume * (frac * (1.0 - frac) / n).sqrt(),
        samples,
    })
}

/// Area of the set of `u²` values reachable at height `v`; the revolved
/// slice area is `pi` times this.
fn slice_u2_length(design: &DesignParams, v: f64) -> f64 {
    let ro2 = design.outer_radius().powi(2);
    let ri2 = design.inner_radius().powi(2);
    let leg = |axial: f64| {
        let a2 = axial * axial;
        ((ri2 - a2).max(0.0), ro2 - a2)
    };
    let (lo_a, hi_a) = leg(v + 0.5 * design.l0());
    let (lo_b, hi_b) = leg(v - 0.5 * design.l0());
    (hi_a.min(hi_b) - lo_a.max(lo_b)).max(0.0)
}

/// Volume of the revolved workspace by exact slice integration: the slice
/// function is piecewise quadratic in `v`, so Simpson's rule between its
/// breakpoints is exact.
pub fn workspace_volume_exact(design: &DesignParams) -> f64 {
    let (ro, ri, h) = (
        design.outer_radius(),
        design.inner_radius(),
        0.5 * design.l0(),
    );
    let (_, v_lo, v_hi) = bounding_box(design);
    let mut breaks = vec![v_lo, v_hi, 0.0];
    for s in [-1.0, 1.0] {
        for c in [-h, h] {
            breaks.push(c + s * ri);
            breaks.push(c + s * ro);
        }
        if design.l0() > 0.0 {
            breaks.push(s * (ro * ro - ri * ri) / (2.0 * design.l0()));
            breaks.push(s * ro * ro / (2.0 * design.l0()));
            breaks.push(s * ri * ri / (2.0 * design.l0()));
        }
    }
    breaks.retain(|b| b.is_finite() && *b >= v_lo && *b <= v_hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        // a few panels per piece absorb any breakpoint missed above
        const PANELS: usize = 16;
        let step = (b - a) / PANELS as f64;
        for k in 0..PANELS {
            let x0 = a + k as f64 * step;
            let x1 = x0 + step;
            let f0 = slice_u2_length(design, x0);
            let fm = slice_u2_length(design, 0.5 * (x0 + x1));
            let f1 = slice_u2_length(design, x1);
            total += step / 6.0 * (f0 + 4.0 * fm + f1);
        }
    }
    std::f64::consts::PI * total
}

/// Operability of one planar working mode `(eps2, eps3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeOperability {
    pub eps2: Sign,
    pub eps3: Sign,
    pub operative: bool,
    pub feasible_samples: usize,
    pub max_abs_det_a: f64,
}

/// Samples the half-plane `u > 0` and reports, per planar mode, whether any
/// feasible posture has `|det A| / L2³` above tolerance.
pub fn operative_working_modes(
    design: &DesignParams,
    samples: usize,
    seed: u64,
) -> Vec<ModeOperability> {
    let (r, v_lo, v_hi) = bounding_box(design);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<PlanarPoint> = (0..samples)
        .map(|_| PlanarPoint::new(rng.gen_range(0.0..r), rng.gen_range(v_lo..v_hi)))
        .collect();
    let signs = [Sign::Neg, Sign::Pos];
    let mut out = Vec::with_capacity(4);
    for eps2 in signs {
        for eps3 in signs {
            let mode = WorkingMode::new(Sign::Pos, eps2, eps3);
            let mut feasible = 0;
            let mut max_det = 0.0f64;
            for &p in &points {
                if let Ok(posture) = mode_posture(design, p, mode) {
                    feasible += 1;
                    let (a, _) = jacobians(&posture);
                    max_det = max_det.max(normalized_det_a(&a, design).abs());
                }
            }
            out.push(ModeOperability {
                eps2,
                eps3,
                operative: max_det > SINGULAR_TOL,
                feasible_samples: feasible,
                max_abs_det_a: max_det,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnionWorkspace {
    pub raster: WorkspaceRaster,
    pub modes: Vec<WorkingMode>,
    pub mode_areas: Vec<f64>,
    pub union_area: f64,
    /// Area covered by two or more of the modes.
    pub overlap_area: f64,
}

/// Per-cell union of the given modes' workspaces. In the returned raster
/// `mode_mask` keeps only the selected modes and `reachable` marks the union.
pub fn union_workspace(
    design: &DesignParams,
    grid: &GridSpec,
    modes: &[WorkingMode],
) -> Result<UnionWorkspace> {
    if modes.is_empty() {
        return Err(Error::InvalidGrid("union needs at least one mode".into()));
    }
    let mut raster = cross_section(design, grid, None)?;
    let select = modes.iter().fold(0u8, |m, w| m | (1 << w.index()));
    let mut overlap = 0usize;
    for c in &mut raster.cells {
        c.mode_mask &= select;
        c.reachable = c.mode_mask != 0;
        if c.mode_mask.count_ones() > 1 {
            overlap += 1;
        }
    }
    let mode_areas = modes.iter().map(|&m| raster.mode_area(m)).collect();
    let union_area = raster.reachable_area();
    let overlap_area = overlap as f64 * grid.cell_area();
    Ok(UnionWorkspace {
        raster,
        modes: modes.to_vec(),
        mode_areas,
        union_area,
        overlap_area,
    })
}

/// Joint state of a raster cell's posture, if feasible in `mode`.
pub fn cell_joints(design: &DesignParams, p: PlanarPoint, mode: WorkingMode) -> Option<JointState> {
    mode_posture(design, p, mode).ok().map(|post| post.joints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AssemblyMode;
    use crate::model::Sign::{Neg, Pos};
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    fn d(l0: f64, l1: f64, l2: f64) -> DesignParams {
        DesignParams::new(l0, l1, l2).unwrap()
    }

    fn shell(design: &DesignParams) -> f64 {
        4.0 * PI / 3.0 * (design.outer_radius().powi(3) - design.inner_radius().powi(3))
    }

    #[test]
    fn annuli_membership() {
        assert!(reachable_annuli(&d(0.0, 1.0, 1.0), PlanarPoint::new(1.5, 0.0)));
        assert!(!reachable_annuli(&d(0.0, 1.0, 0.5), PlanarPoint::new(0.2, 0.0)));
        assert!(!reachable_annuli(&d(2.0, 1.0, SQRT_2), PlanarPoint::new(10.0, 0.0)));
    }

    #[test]
    fn cross_section_areas() {
        let g = GridSpec::square(-2.2, 2.2, 221).unwrap();
        let disc = cross_section(&d(0.0, 1.0, 1.0), &g, None).unwrap();
        assert!((disc.reachable_area() / (4.0 * PI) - 1.0).abs() < 0.01);
        let annulus = cross_section(&d(0.0, 1.0, 0.5), &g, None).unwrap();
        assert!((annulus.reachable_area() / (2.0 * PI) - 1.0).abs() < 0.01);
    }

    #[test]
    fn mode_section_is_subset_of_annuli() {
        let design = d(2.0, 1.0, SQRT_2);
        let g = GridSpec::around(&design, 121).unwrap();
        let mode = WorkingMode::new(Pos, Neg, Pos);
        let r = cross_section(&design, &g, Some(mode)).unwrap();
        let in_mode = r.mode_count(mode);
        assert!(in_mode > 0 && in_mode < r.reachable_count());
        for c in &r.cells {
            if c.mode_mask != 0 {
                assert!(c.reachable);
            }
            if c.in_mode(mode) {
                assert!(c.kappa.unwrap() >= 1.0);
            } else {
                assert!(c.kappa.is_none());
            }
        }
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(GridSpec::square(0.0, 1.0, 0), Err(Error::InvalidGrid(_))));
        assert!(matches!(GridSpec::square(1.0, 1.0, 4), Err(Error::InvalidGrid(_))));
        let g1 = GridSpec::square(0.0, 1.0, 1).unwrap();
        assert!(cross_section(&d(0.0, 1.0, 1.0), &g1, None).is_err());
        let zero = GridSpec { n: 0, ..g1 };
        assert!(matches!(
            joint_space_map(&d(0.0, 1.0, 1.0), &zero, AssemblyMode::POS),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn joint_space_feasibility_matches_closed_form() {
        let design = d(2.0, 1.0, SQRT_2);
        let g = GridSpec::joint_space(90).unwrap();
        let map = joint_space_map(&design, &g, AssemblyMode::POS).unwrap();
        for c in &map.cells {
            let ca = design.a() + PlanarPoint::unit(c.theta2);
            let cb = design.b() + PlanarPoint::unit(c.theta3);
            let gap = ca.distance(cb);
            // C = D leaves P undetermined
            let closes = gap > 1e-9 && gap <= 2.0 * SQRT_2;
            assert_eq!(c.feasible, closes, "{} {} {}", c.theta2, c.theta3, ca.distance(cb));
        }
        assert!(map.feasible_count() < g.len());
    }

    #[test]
    fn joint_space_flags_coincident_elbows() {
        let design = d(2.0, SQRT_2, 1.0);
        let g = GridSpec::joint_space(181).unwrap();
        let map = joint_space_map(&design, &g, AssemblyMode::POS).unwrap();
        let (i, j) = g.locate(PlanarPoint::new(FRAC_PI_4, -FRAC_PI_4)).unwrap();
        assert_ne!(map.cell(i, j).flags & FLAG_PARALLEL_COINCIDENT, 0);
        // the closed-form pair really is C = D
        let pairs = coincident_joint_pairs(&design);
        assert_eq!(pairs.len(), 2);
        assert!((pairs[0].0 - FRAC_PI_4).abs() < 1e-12 && (pairs[0].1 + FRAC_PI_4).abs() < 1e-12);
        for (t2, t3) in pairs {
            let c = design.a() + PlanarPoint::unit(t2) * SQRT_2;
            let d = design.b() + PlanarPoint::unit(t3) * SQRT_2;
            assert!(c.distance(d) < 1e-12);
        }
        assert!(coincident_joint_pairs(&d(3.0, 1.0, 1.0)).is_empty());
    }

    #[test]
    fn monte_carlo_volumes() {
        for design in [d(0.0, 1.0, 1.0), d(0.0, 1.0, 0.5)] {
            let est = workspace_volume(&design, 200_000, DEFAULT_SEED).unwrap();
            assert!((est.volume - shell(&design)).abs() <= 3.0 * est.stderr);
        }
        assert!(workspace_volume(&d(0.0, 1.0, 1.0), 999, 1).is_err());
    }

    #[test]
    fn exact_volume_matches_closed_form() {
        for design in [d(0.0, 1.0, 1.0), d(0.0, 1.0, 0.5), d(0.0, 0.3, 1.7)] {
            assert!((workspace_volume_exact(&design) / shell(&design) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_volume_agrees_with_monte_carlo_off_center() {
        for design in [d(2.0, 1.0, SQRT_2), d(1.0, 2.0, 3.0), d(5.0, 1.0, 4.0), d(0.7, 1.3, 0.4)] {
            let est = workspace_volume(&design, 400_000, 11).unwrap();
            let exact = workspace_volume_exact(&design);
            assert!(
                (est.volume - exact).abs() <= 4.0 * est.stderr,
                "{design:?}: mc {} +- {} vs {exact}",
                est.volume,
                est.stderr
            );
        }
        assert!(workspace_volume_exact(&d(2.0, 1.0, SQRT_2)) < workspace_volume_exact(&d(0.0, 1.0, SQRT_2)));
    }

    #[test]
    fn operative_modes() {
        let ops = operative_working_modes(&d(0.0, 1.0, 1.0), 20_000, DEFAULT_SEED);
        let live: Vec<_> = ops.iter().filter(|m| m.operative).map(|m| (m.eps2, m.eps3)).collect();
        assert_eq!(live, vec![(Neg, Pos), (Pos, Neg)]);
        let ops = operative_working_modes(&d(2.0, 1.0, SQRT_2), 20_000, DEFAULT_SEED);
        assert_eq!(ops.iter().filter(|m| m.operative).count(), 4);
    }

    #[test]
    fn union_of_single_mode_is_that_mode() {
        let design = d(2.0, 1.0, SQRT_2);
        let g = GridSpec::around(&design, 81).unwrap();
        let mode = WorkingMode::new(Pos, Pos, Neg);
        let u = union_workspace(&design, &g, &[mode]).unwrap();
        assert_eq!(u.union_area, u.mode_areas[0]);
        assert_eq!(u.overlap_area, 0.0);
        assert!(union_workspace(&design, &g, &[]).is_err());
    }

    #[test]
    fn union_of_disjoint_modes_adds_areas() {
        // opposite eps1 modes live on opposite sides of AB
        let design = d(2.0, 1.0, SQRT_2);
        let g = GridSpec::around(&design, 81).unwrap();
        let modes = [WorkingMode::new(Pos, Pos, Neg), WorkingMode::new(Neg, Pos, Neg)];
        let u = union_workspace(&design, &g, &modes).unwrap();
        assert_eq!(u.overlap_area, 0.0);
        assert!((u.union_area - u.mode_areas.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn raster_reflection_symmetry() {
        // u -> -u maps mode m onto its mirror
        let design = d(1.0, 1.0, 0.8);
        let g = GridSpec::around(&design, 60).unwrap();
        let r = cross_section(&design, &g, None).unwrap();
        for j in 0..g.n {
            for i in 0..g.n {
                let a = r.cell(i, j);
                let b = r.cell(g.n - 1 - i, j);
                assert_eq!(a.reachable, b.reachable);
                for m in WorkingMode::all() {
                    assert_eq!(a.in_mode(m), b.in_mode(m.mirrored()));
                }
            }
        }
    }

    #[test]
    fn raster_translation_by_whole_cells() {
        let design = d(2.0, 1.0, SQRT_2);
        let mode = WorkingMode::new(Pos, Neg, Pos);
        let g = GridSpec::new(0.05, 2.55, -1.5, 1.5, 50).unwrap();
        let shifted = GridSpec::new(
            0.05 + 3.0 * g.du(),
            2.55 + 3.0 * g.du(),
            -1.5 - 2.0 * g.dv(),
            1.5 - 2.0 * g.dv(),
            50,
        )
        .unwrap();
        let a = cross_section(&design, &g, Some(mode)).unwrap();
        let b = cross_section(&design, &shifted, Some(mode)).unwrap();
        for j in 2..g.n {
            for i in 0..g.n - 3 {
                let x = a.cell(i + 3, j - 2);
                let y = b.cell(i, j);
                assert_eq!(x.mode_mask, y.mode_mask);
                let close = |p: Option<f64>, q: Option<f64>| match (p, q) {
                    (Some(p), Some(q)) => (p - q).abs() <= 1e-9 * (1.0 + p.abs()),
                    (None, None) => true,
                    _ => false,
                };
                assert!(close(x.det_a, y.det_a) && close(x.kappa, y.kappa));
            }
        }
    }

    #[test]
    fn parallel_cells_follow_design_rules() {
        // (5, 1, 4) admits no parallel singularity at all
        let design = d(5.0, 1.0, 4.0);
        let g = GridSpec::around(&design, 81).unwrap();
        for mode in WorkingMode::all() {
            let r = cross_section(&design, &g, Some(mode)).unwrap();
            assert_eq!(r.parallel_singular_count(), 0, "mode {mode}");
        }
        // (2, 1, 1) violates the flat rule: some mode shows an interior singular curve
        let design = d(2.0, 1.0, 1.0);
        let g = GridSpec::around(&design, 81).unwrap();
        let any = WorkingMode::all().iter().any(|&m| {
            cross_section(&design, &g, Some(m)).unwrap().parallel_singular_count() > 0
        });
        assert!(any);
    }
}
