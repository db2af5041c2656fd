use std::f64::consts::PI;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fivebar_hybrid::design::{check_design, kappa_at, rank_candidates, Candidate};
use fivebar_hybrid::hybrid::normalized_det_a;
use fivebar_hybrid::planner::plan_mode_change;
use fivebar_hybrid::singularity::{classify_default, SingularityKind};
use fivebar_hybrid::workspace::{cross_section, reachable_annuli, workspace_volume_exact, GridSpec};
use fivebar_hybrid::{
    hybrid_fk, hybrid_ik, jacobians, AssemblyMode, DesignParams, PlanarPoint, WorkingMode,
    WorldPoint,
};

fn design() -> impl Strategy<Value = DesignParams> {
    (0.0f64..3.0, 0.3f64..2.0, 0.3f64..2.0).prop_map(|(l0, l1, l2)| DesignParams::new(l0, l1, l2).unwrap())
}

fn mode() -> impl Strategy<Value = WorkingMode> {
    (0usize..8).prop_map(|i| WorkingMode::all()[i])
}

fn gamma(pos: bool) -> AssemblyMode {
    if pos {
        AssemblyMode::POS
    } else {
        AssemblyMode::NEG
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fk_then_ik_recovers_joints(d in design(), t1 in -3.1f64..3.1, t2 in -3.1f64..3.1, t3 in -3.1f64..3.1, pos in any::<bool>()) {
        let Ok(post) = hybrid_fk(&d, t1, t2, t3, gamma(pos)) else { return Ok(()) };
        let Ok(m) = post.working_mode() else { return Ok(()) };
        prop_assume!(classify_default(&post).kinds.is_empty());
        prop_assume!(post.p_world.axis_distance() > 1e-6 * d.l1());
        let back = hybrid_ik(&d, post.p_world, m).unwrap();
        for (a, b) in [(t1, back.joints.theta1), (t2, back.joints.theta2), (t3, back.joints.theta3)] {
            let diff = fivebar_hybrid::normalize_angle(a - b).abs();
            prop_assert!(diff < 1e-7, "{} vs {}", a, b);
        }
    }

    #[test]
    fn kappa_is_invariant_under_revolution(d in design(), m in mode(), u in 0.05f64..4.0, v in -4.0f64..4.0, a in -PI..PI, b in -PI..PI) {
        let p = PlanarPoint::new(m.eps1.value() * u, v);
        let Ok(q0) = hybrid_ik(&d, WorldPoint::from_planar(p, a), m) else { return Ok(()) };
        let q1 = hybrid_ik(&d, WorldPoint::from_planar(p, b), m).unwrap();
        let k0 = classify_default(&q0).kappa;
        let k1 = classify_default(&q1).kappa;
        prop_assume!(k0.is_finite());
        prop_assert!((k0 - k1).abs() <= 1e-9 * k0);
        if let Some(k) = kappa_at(&d, p, m) {
            prop_assert!((k - k0).abs() <= 1e-9 * k0);
        }
    }

    #[test]
    fn stretched_leg_is_a_boundary_serial_singularity(d in design(), t2 in -3.1f64..3.1, t1 in -3.1f64..3.1, pick in any::<bool>()) {
        // P on the outer circle of leg A, then leg B closed by circle intersection
        let (l1, l2) = (d.l1(), d.l2());
        let p = d.a() + PlanarPoint::unit(t2) * (l1 + l2);
        let bp = p - d.b();
        let r = bp.norm();
        prop_assume!(r > (l1 - l2).abs() + 1e-3 && r < l1 + l2 - 1e-3);
        let along = (l1 * l1 - l2 * l2 + r * r) / (2.0 * r);
        let h = (l1 * l1 - along * along).sqrt();
        let dir = bp * (1.0 / r);
        let side = if pick { 1.0 } else { -1.0 };
        let dpt = d.b() + dir * along + dir.perp() * (side * h);
        let t3 = (dpt - d.b()).angle();
        let post = [true, false]
            .into_iter()
            .filter_map(|g| hybrid_fk(&d, t1, t2, t3, gamma(g)).ok())
            .find(|q| q.p_plane.distance(p) < 1e-9 * (l1 + l2));
        let Some(post) = post else { return Ok(()) };
        let report = classify_default(&post);
        prop_assert!(report.has(SingularityKind::SerialLegA), "{:?}", report.kinds);
        let ap = post.p_plane.distance(d.a());
        prop_assert!((ap - (l1 + l2)).abs() < 1e-9 * (l1 + l2));
    }

    #[test]
    fn serial_kinds_only_on_boundaries(d in design(), t1 in -3.1f64..3.1, t2 in -3.1f64..3.1, t3 in -3.1f64..3.1, pos in any::<bool>()) {
        let Ok(post) = hybrid_fk(&d, t1, t2, t3, gamma(pos)) else { return Ok(()) };
        let report = classify_default(&post);
        let (lo, hi) = ((d.l1() - d.l2()).abs(), d.l1() + d.l2());
        let at_bound = |r: f64| (r - hi).abs() < 1e-6 * hi || (r - lo).abs() < 1e-6 * hi;
        for k in &report.kinds {
            match k {
                SingularityKind::SerialLegA => prop_assert!(at_bound(post.p_plane.distance(d.a()))),
                SingularityKind::SerialLegB => prop_assert!(at_bound(post.p_plane.distance(d.b()))),
                SingularityKind::SerialAxis => prop_assert!(post.p_plane.u.abs() < 1e-6 * hi),
                _ => {}
            }
        }
    }
}

fn raster_masks(d: &DesignParams, grid: &GridSpec) -> Vec<u8> {
    cross_section(d, grid, None).unwrap().cells.iter().map(|c| c.mode_mask).collect()
}

fn mirrored_mask(mask: u8) -> u8 {
    WorkingMode::all()
        .iter()
        .filter(|m| mask & (1 << m.index()) != 0)
        .fold(0, |acc, m| acc | (1 << m.mirrored().index()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn raster_mirror_and_translation(d in design(), shift in 1usize..6) {
        let n = 61;
        let grid = GridSpec::around(&d, n).unwrap();
        let masks = raster_masks(&d, &grid);
        let raster = cross_section(&d, &grid, None).unwrap();
        for c in &raster.cells {
            if c.mode_mask != 0 {
                prop_assert!(reachable_annuli(&d, PlanarPoint::new(c.u, c.v)));
            }
        }
        // cell centers of mirrored or shifted grids agree only to rounding, so
        // a handful of cells exactly on a boundary may disagree
        let slack = 2 * n;
        let mut mirror_bad = 0;
        for j in 0..n {
            for i in 0..n {
                if mirrored_mask(masks[grid.index(i, j)]) != masks[grid.index(n - 1 - i, j)] {
                    mirror_bad += 1;
                }
            }
        }
        prop_assert!(mirror_bad <= slack, "mirror mismatches {}", mirror_bad);

        let du = grid.du() * shift as f64;
        let moved = GridSpec::new(grid.u_min + du, grid.u_max + du, grid.v_min, grid.v_max, n).unwrap();
        let shifted = raster_masks(&d, &moved);
        let mut shift_bad = 0;
        for j in 0..n {
            for i in 0..n - shift {
                if shifted[moved.index(i, j)] != masks[grid.index(i + shift, j)] {
                    shift_bad += 1;
                }
            }
        }
        prop_assert!(shift_bad <= slack, "translation mismatches {}", shift_bad);
    }

    #[test]
    fn ranking_ignores_enumeration_order(seed in any::<u64>()) {
        let mut cands: Vec<Candidate> = [(0.0, 1.0, 1.0), (0.0, 0.5, 1.5), (0.0, 1.5, 0.5), (1.0, 0.75, 0.75), (2.0, 0.5, 0.5), (0.5, 0.8, 0.95)]
            .iter()
            .map(|&(a, b, c)| {
                let design = DesignParams::new(a, b, c).unwrap();
                Candidate { design, volume: workspace_volume_exact(&design), monte_carlo: None }
            })
            .collect();
        let reference: Vec<_> = rank_candidates(cands.clone()).iter().map(|c| c.design).collect();
        cands.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<_> = rank_candidates(cands).iter().map(|c| c.design).collect();
        prop_assert_eq!(reference, shuffled);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn plans_are_reversible_and_avoid_parallel_singularities(
        which in 0usize..3, m0 in mode(), m1 in mode(),
        a in (0.1f64..1.0, -1.0f64..1.0, -PI..PI), b in (0.1f64..1.0, -1.0f64..1.0, -PI..PI),
    ) {
        let d = [(2.0, 1.0, std::f64::consts::SQRT_2), (0.0, 1.0, 1.0), (1.0, 1.0, 1.5)][which];
        let d = DesignParams::new(d.0, d.1, d.2).unwrap();
        let r = d.l1() + d.l2();
        let place = |(s, v, t): (f64, f64, f64), m: WorkingMode| {
            WorldPoint::from_planar(PlanarPoint::new(m.eps1.value() * s * r, v * r), t)
        };
        let (p0, p1) = (place(a, m0), place(b, m1));
        if hybrid_ik(&d, p0, m0).is_err() || hybrid_ik(&d, p1, m1).is_err() {
            return Ok(());
        }
        let Ok(fwd) = plan_mode_change(&d, (p0, m0), (p1, m1)) else { return Ok(()) };

        let crossings: Vec<WorldPoint> = fwd.crossings.iter().map(|c| c.point).collect();
        // within IK tolerance of a crossing the posture is still on its boundary
        let near_crossing = |q: WorldPoint| crossings.iter().any(|c| c.distance(q) < 1e-6 * r);
        for w in fwd.waypoints.windows(2) {
            let mode = w[0].mode;
            let steps = 200;
            let mut sign = None;
            for s in 1..steps {
                let q = w[0].point.lerp(w[1].point, s as f64 / steps as f64);
                if near_crossing(q) {
                    continue;
                }
                let post = hybrid_ik(&d, q, mode);
                prop_assert!(post.is_ok(), "segment leaves mode {}", mode);
                let (am, _) = jacobians(&post.unwrap());
                let det = normalized_det_a(&am, &d);
                prop_assert!(det.abs() > 1e-9);
                let sg = det > 0.0;
                prop_assert!(sign.map_or(true, |x| x == sg), "det A changes sign along a segment");
                sign = Some(sg);
            }
        }
        if let Ok(back) = plan_mode_change(&d, (p1, m1), (p0, m0)) {
            prop_assert!((back.total_length - fwd.total_length).abs() <= 1e-9 * fwd.total_length.max(1.0));
        }
    }
}

#[test]
fn check_design_is_sound_on_dense_joint_scans() {
    // independent scan: |CD| over a 721² grid of actuated angles
    let designs = [(5.0, 1.0, 4.0), (3.0, 1.0, 3.0), (0.0, 1.0, 1.0), (2.0, 1.0, 1.5), (4.5, 2.0, 5.0)];
    let n = 721;
    for (l0, l1, l2) in designs {
        let d = DesignParams::new(l0, l1, l2).unwrap();
        let report = check_design(&d);
        let (mut min_cd, mut max_cd) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let t2 = -PI + 2.0 * PI * (i as f64 + 0.5) / n as f64;
            let c = d.a() + PlanarPoint::unit(t2) * l1;
            for j in 0..n {
                let t3 = -PI + 2.0 * PI * (j as f64 + 0.5) / n as f64;
                let cd = c.distance(d.b() + PlanarPoint::unit(t3) * l1);
                min_cd = min_cd.min(cd);
                max_cd = max_cd.max(cd);
            }
        }
        if report.flat_eliminated {
            // every actuated pair assembles and C, D, P are never collinear
            assert!(max_cd < 2.0 * l2 * (1.0 - 1e-9), "{}: max |CD| {max_cd}", d.label());
        }
        if report.coincident_eliminated {
            assert!(min_cd > 1e-9 * l1, "{}: min |CD| {min_cd}", d.label());
        }
    }
}
