//! Design rules, workspace-maximizing search and isoconditioning contours.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DesignParams, PlanarPoint, WorkingMode};
use crate::workspace::{
    cross_section, mode_posture, operative_working_modes, workspace_volume,
    workspace_volume_exact, GridSpec, VolumeEstimate, DEFAULT_SEED,
};

/// Samples used by [`check_design`] to count operative modes.
pub const OPERATIVE_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReport {
    pub design: DesignParams,
    /// `2 L2 > L0 + 2 L1`: the distal circles can never become tangent.
    pub flat_eliminated: bool,
    /// `L0 > 2 L1`: the elbows can never meet.
    pub coincident_eliminated: bool,
    /// `2 L2 - 2 L1 > L0`; equivalent to `flat_eliminated`.
    pub inequality_satisfied: bool,
    /// Exact revolved volume.
    pub workspace_volume: f64,
    pub operative_mode_count: usize,
}

pub fn check_design(design: &DesignParams) -> DesignReport {
    let (l0, l1, l2) = (design.l0(), design.l1(), design.l2());
    DesignReport {
        design: *design,
        flat_eliminated: 2.0 * l2 > l0 + 2.0 * l1,
        coincident_eliminated: l0 > 2.0 * l1,
        inequality_satisfied: 2.0 * l2 - 2.0 * l1 > l0,
        workspace_volume: workspace_volume_exact(design),
        operative_mode_count: operative_working_modes(design, OPERATIVE_SAMPLES, DEFAULT_SEED)
            .iter()
            .filter(|m| m.operative)
            .count(),
    }
}

/// Candidate grid for [`optimize_workspace`]. `L0` takes `l0_steps` evenly
/// spaced values in `[l0_min, l0_max]`; the remainder `R = (budget - L0) / 2`
/// is split as `L1 = R k / (l1_splits + 1)`, `k = 1..=l1_splits`, `L2 = R - L1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignSearch {
    pub l0_min: f64,
    pub l0_max: f64,
    pub l0_steps: usize,
    pub l1_splits: usize,
}

impl DesignSearch {
    pub fn new(l0_min: f64, l0_max: f64, l0_steps: usize, l1_splits: usize) -> Self {
        Self {
            l0_min,
            l0_max,
            l0_steps,
            l1_splits,
        }
    }

    pub fn l0_values(&self) -> Vec<f64> {
        match self.l0_steps {
            0 => Vec::new(),
            1 => vec![self.l0_min],
            n => (0..n)
                .map(|k| self.l0_min + (self.l0_max - self.l0_min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    /// Valid designs on the grid under `budget = L0 + 2 L1 + 2 L2`.
    pub fn candidates(&self, budget: f64) -> Vec<DesignParams> {
        let mut out = Vec::new();
        for l0 in self.l0_values() {
            let rest = 0.5 * (budget - l0);
            if !(rest > 0.0) {
                continue;
            }
            for k in 1..=self.l1_splits {
                let l1 = rest * k as f64 / (self.l1_splits + 1) as f64;
                if let Ok(d) = DesignParams::new(l0, l1, rest - l1) {
                    out.push(d);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub design: DesignParams,
    pub volume: f64,
    pub monte_carlo: Option<VolumeEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub budget: f64,
    pub best: DesignReport,
    /// Best first.
    pub ranking: Vec<Candidate>,
}

/// Relative volume tolerance under which candidates count as tied.
pub const VOLUME_TIE_TOL: f64 = 1e-9;

fn tie_key(d: &DesignParams) -> (f64, f64, f64) {
    (d.l0(), (d.l1() - d.l2()).abs(), d.l1())
}

fn cmp_tie(a: &DesignParams, b: &DesignParams) -> std::cmp::Ordering {
    let (x, y) = (tie_key(a), tie_key(b));
    x.0.total_cmp(&y.0)
        .then(x.1.total_cmp(&y.1))
        .then(x.2.total_cmp(&y.2))
}

/// Orders candidates by decreasing volume; runs of volumes within
/// [`VOLUME_TIE_TOL`] of the run's leader are ordered by smaller `L0`, then
/// smaller `|L1 - L2|`.
pub fn rank_candidates(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    cands.sort_by(|a, b| {
        b.volume
            .total_cmp(&a.volume)
            .then_with(|| cmp_tie(&a.design, &b.design))
    });
    let mut start = 0;
    while start < cands.len() {
        let lead = cands[start].volume;
        let mut end = start + 1;
        while end < cands.len() && lead - cands[end].volume <= VOLUME_TIE_TOL * lead.abs() {
            end += 1;
        }
        cands[start..end].sort_by(|a, b| cmp_tie(&a.design, &b.design));
        start = end;
    }
    cands
}

/// Exhaustive search for the largest workspace under a total-length budget.
/// Ranking uses the exact volume; with `samples > 0` each candidate also
/// carries a Monte-Carlo estimate drawn from `seed`.
pub fn optimize_workspace(
    budget: f64,
    search: &DesignSearch,
    samples: usize,
    seed: u64,
) -> Result<OptimizeResult> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::EmptySearchSpace);
    }
    let designs = search.candidates(budget);
    if designs.is_empty() {
        return Err(Error::EmptySearchSpace);
    }
    let cands = designs
        .par_iter()
        .map(|d| {
            let monte_carlo = if samples > 0 {
                Some(workspace_volume(d, samples, seed)?)
            } else {
                None
            };
            Ok(Candidate {
                design: *d,
                volume: workspace_volume_exact(d),
                monte_carlo,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ranking = rank_candidates(cands);
    Ok(OptimizeResult {
        budget,
        best: check_design(&ranking[0].design),
        ranking,
    })
}

/// Condition-number field of one working mode over a planar grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoField {
    pub design: DesignParams,
    pub grid: GridSpec,
    pub mode: WorkingMode,
    /// `kappa(A)` where the mode's IK succeeds.
    pub kappa: Vec<Option<f64>>,
    /// `cos(theta4 - theta5)`; its zero set is the isotropy locus.
    pub cos_delta: Vec<Option<f64>>,
    /// Raster flags of each cell.
    pub flags: Vec<u8>,
}

impl IsoField {
    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        self.kappa[self.grid.index(i, j)]
    }
}

pub fn isoconditioning_field(
    design: &DesignParams,
    grid: &GridSpec,
    mode: WorkingMode,
) -> Result<IsoField> {
    let raster = cross_section(design, grid, Some(mode))?;
    let cos_delta = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = grid.center(k % grid.n, k / grid.n);
            raster.cells[k]
                .kappa
                .and_then(|_| mode_posture(design, p, mode).ok())
                .map(|post| post.joints.delta().cos())
        })
        .collect();
    Ok(IsoField {
        design: *design,
        grid: *grid,
        mode,
        kappa: raster.cells.iter().map(|c| c.kappa).collect(),
        cos_delta,
        flags: raster.cells.iter().map(|c| c.flags).collect(),
    })
}

/// `kappa` of `mode` at an arbitrary planar point.
pub fn kappa_at(design: &DesignParams, p: PlanarPoint, mode: WorkingMode) -> Option<f64> {
    mode_posture(design, p, mode)
        .ok()
        .map(|post| crate::singularity::condition_number_closed(post.joints.delta()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub level: f64,
    pub points: Vec<PlanarPoint>,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContourSet {
    pub levels: Vec<f64>,
    pub contours: Vec<Contour>,
}

impl ContourSet {
    pub fn at_level(&self, level: f64) -> impl Iterator<Item = &Contour> {
        self.contours.iter().filter(move |c| c.level == level)
    }
}

/// Lattice edge between grid-cell centers: `(i, j, horizontal)`.
type EdgeId = (usize, usize, bool);

fn march(
    grid: &GridSpec,
    values: &[Option<f64>],
    iso: f64,
) -> Vec<(EdgeId, EdgeId, PlanarPoint, PlanarPoint)> {
    let n = grid.n;
    let value = |i: usize, j: usize| values[grid.index(i, j)];
    let point = |e: EdgeId| {
        let (i, j, horizontal) = e;
        let (i2, j2) = if horizontal { (i + 1, j) } else { (i, j + 1) };
        let (a, b) = (value(i, j).unwrap(), value(i2, j2).unwrap());
        let (pa, pb) = (grid.center(i, j), grid.center(i2, j2));
        let t = if b.is_infinite() {
            0.0
        } else if a.is_infinite() {
            1.0
        } else {
            ((iso - a) / (b - a)).clamp(0.0, 1.0)
        };
        pa + (pb - pa) * t
    };
    let mut segs = Vec::new();
    for j in 0..n.saturating_sub(1) {
        for i in 0..n.saturating_sub(1) {
            let corners = [value(i, j), value(i + 1, j), value(i + 1, j + 1), value(i, j + 1)];
            let Some(v) = corners.iter().copied().collect::<Option<Vec<f64>>>() else {
                continue;
            };
            let above: Vec<bool> = v.iter().map(|&x| x > iso).collect();
            // bottom, right, top, left
            let edges: [EdgeId; 4] = [(i, j, true), (i + 1, j, false), (i, j + 1, true), (i, j, false)];
            let cut = [
                above[0] != above[1],
                above[1] != above[2],
                above[3] != above[2],
                above[0] != above[3],
            ];
            let pairs: Vec<(usize, usize)> = match cut.iter().filter(|&&c| c).count() {
                2 => {
                    let mut it = (0..4).filter(|&k| cut[k]);
                    vec![(it.next().unwrap(), it.next().unwrap())]
                }
                4 => {
                    let finite: Vec<f64> = v.iter().map(|x| x.min(f64::MAX)).collect();
                    let center = finite.iter().map(|x| 0.25 * x).sum::<f64>() > iso;
                    if center == above[0] {
                        vec![(0, 1), (2, 3)]
                    } else {
                        vec![(3, 0), (1, 2)]
                    }
                }
                _ => Vec::new(),
            };
            for (a, b) in pairs {
                segs.push((edges[a], edges[b], point(edges[a]), point(edges[b])));
            }
        }
    }
    segs
}

fn chain(segs: Vec<(EdgeId, EdgeId, PlanarPoint, PlanarPoint)>, level: f64) -> Vec<Contour> {
    let mut adj: BTreeMap<EdgeId, Vec<usize>> = BTreeMap::new();
    let mut pos: BTreeMap<EdgeId, PlanarPoint> = BTreeMap::new();
    for (k, s) in segs.iter().enumerate() {
        adj.entry(s.0).or_default().push(k);
        adj.entry(s.1).or_default().push(k);
        pos.insert(s.0, s.2);
        pos.insert(s.1, s.3);
    }
    let mut used = vec![false; segs.len()];
    let mut out = Vec::new();
    let walk = |start: EdgeId, used: &mut Vec<bool>| {
        let mut nodes = vec![start];
        let mut at = start;
        loop {
            let next = adj[&at].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            at = if segs[k].0 == at { segs[k].1 } else { segs[k].0 };
            nodes.push(at);
        }
        nodes
    };
    // open chains start at degree-1 nodes, then the remaining cycles
    let starts: Vec<EdgeId> = adj
        .iter()
        .filter(|(_, v)| v.len() == 1)
        .map(|(e, _)| *e)
        .chain(adj.keys().copied())
        .collect();
    for s in starts {
        if adj[&s].iter().all(|&k| used[k]) {
            continue;
        }
        let nodes = walk(s, &mut used);
        let closed = nodes.len() > 2 && nodes.first() == nodes.last();
        out.push(Contour {
            level,
            points: nodes.iter().map(|e| pos[e]).collect(),
            closed,
        });
    }
    out
}

/// Marching squares over the cell-center lattice with linear interpolation
/// and the midpoint rule at saddles. Level 1 is traced as the zero set of
/// `cos delta`, since `kappa >= 1` never straddles it. Infinite `kappa`
/// counts as above every level; cells without a value break the contour.
pub fn extract_contours(field: &IsoField, levels: &[f64]) -> ContourSet {
    let mut contours = Vec::new();
    for &level in levels {
        if !level.is_finite() || level < 1.0 {
            continue;
        }
        let segs = if level == 1.0 {
            march(&field.grid, &field.cos_delta, 0.0)
        } else {
            march(&field.grid, &field.kappa, level)
        };
        contours.extend(chain(segs, level));
    }
    ContourSet {
        levels: levels.to_vec(),
        contours,
    }
}
