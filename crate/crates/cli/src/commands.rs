use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use fivebar_hybrid::design::{
    check_design, extract_contours, isoconditioning_field, optimize_workspace, DesignSearch,
};
use fivebar_hybrid::export::{
    contours_csv, contours_svg, design_json, design_report_json, fmt_g12, iso_field_csv,
    joint_space_csv, json_num, mode_slug, mode_stats_json, optimize_csv, plan_json,
    raster_csv, to_json_string,
};
use fivebar_hybrid::hybrid::normalized_det_a;
use fivebar_hybrid::planner::{compare_modes_along, plan_mode_change};
use fivebar_hybrid::singularity::{
    classify_default, condition_number_b, condition_number_closed, condition_number_svd,
};
use fivebar_hybrid::workspace::{
    cross_section, joint_space_map, operative_working_modes, workspace_volume,
    workspace_volume_exact, DEFAULT_SEED, FLAG_PARALLEL,
};
use fivebar_hybrid::{hybrid_fk, hybrid_ik, jacobians, Mat3, WorkingMode, WorldPoint};

use crate::config::Settings;
use crate::{CliError, Command};

pub const DEFAULT_GRID: usize = 221;
pub const DEFAULT_JOINT_GRID: usize = 181;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_LEVELS: [f64; 4] = [1.0, 1.5, 2.0, 3.0];

pub fn dispatch(command: Command, s: &Settings) -> Result<(), CliError> {
    let summary = match command {
        Command::Analyze => analyze(s)?,
        Command::Workspace => workspace(s)?,
        Command::SingularityMap => singularity_map(s)?,
        Command::Isocond => isocond(s)?,
        Command::Optimize => optimize(s)?,
        Command::Plan => plan(s)?,
    };
    print!("{}", to_json_string(&summary));
    Ok(())
}

fn out_dir(s: &Settings) -> PathBuf {
    s.out().unwrap_or_else(|| PathBuf::from("."))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<String, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(name.to_owned())
}

fn matrix(m: &Mat3) -> Value {
    Value::Array((0..3).map(|i| json!(m.row(i).map(json_num))).collect())
}

fn point(p: WorldPoint) -> Value {
    json!([json_num(p.x), json_num(p.y), json_num(p.z)])
}

fn analyze(s: &Settings) -> Result<Value, CliError> {
    let design = s.design()?;
    let posture = match s.point("point")? {
        Some(p) => {
            let mode = s
                .mode()?
                .ok_or_else(|| CliError::usage("--point needs --mode"))?;
            hybrid_ik(&design, p, mode)?
        }
        None => {
            let [t1, t2, t3] = s.theta()?;
            hybrid_fk(&design, t1, t2, t3, s.assembly()?)?
        }
    };
    let (a, b) = jacobians(&posture);
    let report = classify_default(&posture);
    let j = posture.joints;
    let joints = [j.theta1, j.theta2, j.theta3, j.theta4, j.theta5].map(json_num);
    let summary = json!({
        "command": "analyze",
        "design": design_json(&design),
        "joints": joints,
        "p": point(posture.p_world),
        "c": point(posture.c_world()),
        "d": point(posture.d_world()),
        "working_mode": posture.working_mode().ok().map(|m| m.to_string()),
        "assembly": posture.assembly().map(|m| m.gamma.symbol().to_string()),
        "A": matrix(&a),
        "B": matrix(&b),
        "det_A": json_num(a.det()),
        "det_B": json_num(b.det()),
        "det_A_norm": json_num(normalized_det_a(&a, &design)),
        "det_B_norm": json_num(report.det_b_norm),
        "delta": json_num(report.delta),
        "kappa": json_num(condition_number_closed(report.delta)),
        "kappa_svd": json_num(condition_number_svd(&a)),
        "kappa_B": json_num(condition_number_b(&posture)),
        "singularity": format!("{:?}", report.kind),
        "singularities": report.kinds.iter().map(|k| format!("{k:?}")).collect::<Vec<_>>(),
    });
    if let Some(dir) = s.out() {
        write(&dir, &format!("analyze_{}.json", design.label()), &to_json_string(&summary))?;
    }
    Ok(summary)
}

fn mode_areas(raster: &fivebar_hybrid::workspace::WorkspaceRaster) -> Value {
    let mut m = serde_json::Map::new();
    for mode in WorkingMode::all() {
        m.insert(mode.to_string(), json_num(raster.mode_area(mode)));
    }
    Value::Object(m)
}

fn workspace(s: &Settings) -> Result<Value, CliError> {
    let design = s.design()?;
    let grid = s.grid(&design, DEFAULT_GRID)?;
    let mode = s.mode()?;
    let seed = s.seed(DEFAULT_SEED)?;
    let samples = s.samples(DEFAULT_SAMPLES)?;
    let raster = cross_section(&design, &grid, mode)?;
    let name = match mode {
        Some(m) => format!("workspace_{}_{}.csv", design.label(), mode_slug(m)),
        None => format!("workspace_{}.csv", design.label()),
    };
    let file = write(&out_dir(s), &name, &raster_csv(&raster))?;
    let mc = workspace_volume(&design, samples, seed)?;
    let operative: Vec<String> = operative_working_modes(&design, 20_000, seed)
        .iter()
        .filter(|m| m.operative)
        .map(|m| format!("{}{}", m.eps2.symbol(), m.eps3.symbol()))
        .collect();
    Ok(json!({
        "command": "workspace",
        "design": design_json(&design),
        "files": [file],
        "cells": grid.len(),
        "cell_area": json_num(grid.cell_area()),
        "reachable_cells": raster.reachable_count(),
        "reachable_area": json_num(raster.reachable_area()),
        "mode_areas": mode_areas(&raster),
        "volume_exact": json_num(workspace_volume_exact(&design)),
        "volume_monte_carlo": {"volume": json_num(mc.volume), "stderr": json_num(mc.stderr), "samples": mc.samples, "seed": seed},
        "operative_planar_modes": operative,
    }))
}

fn singularity_map(s: &Settings) -> Result<Value, CliError> {
    let design = s.design()?;
    let grid = s.grid(&design, DEFAULT_GRID)?;
    let joint_grid = s.joint_grid(DEFAULT_JOINT_GRID)?;
    let assembly = s.assembly()?;
    let dir = out_dir(s);
    let label = design.label();

    let joint = joint_space_map(&design, &joint_grid, assembly)?;
    let mut files = vec![write(&dir, &format!("singularity-map_{label}_joint.csv"), &joint_space_csv(&joint))?];
    let modes = match s.mode()? {
        Some(m) => vec![m],
        None => WorkingMode::all().to_vec(),
    };
    let mut per_mode = serde_json::Map::new();
    let mut cartesian_total = 0;
    for mode in modes {
        let raster = cross_section(&design, &grid, Some(mode))?;
        files.push(write(
            &dir,
            &format!("singularity-map_{label}_{}.csv", mode_slug(mode)),
            &raster_csv(&raster),
        )?);
        cartesian_total += raster.parallel_singular_count();
        per_mode.insert(
            mode.to_string(),
            json!({
                "feasible_cells": raster.mode_count(mode),
                "parallel_cells": raster.parallel_singular_count(),
                "interior_parallel_cells": raster.interior_parallel_cells().len(),
            }),
        );
    }
    Ok(json!({
        "command": "singularity-map",
        "design": design_json(&design),
        "report": design_report_json(&check_design(&design)),
        "files": files,
        "joint_space": {
            "cells": joint_grid.len(),
            "feasible_cells": joint.feasible_count(),
            "parallel_cells": joint.cells.iter().filter(|c| c.flags & FLAG_PARALLEL != 0).count(),
        },
        "cartesian_parallel_cells": cartesian_total,
        "modes": Value::Object(per_mode),
    }))
}

fn isocond(s: &Settings) -> Result<Value, CliError> {
    let design = s.design()?;
    let grid = s.grid(&design, DEFAULT_GRID)?;
    let mode = s
        .mode()?
        .ok_or_else(|| CliError::usage("isocond needs --mode"))?;
    let levels = s.levels(&DEFAULT_LEVELS)?;
    if levels.is_empty() {
        return Err(CliError::usage("--levels: at least one level"));
    }
    let field = isoconditioning_field(&design, &grid, mode)?;
    let set = extract_contours(&field, &levels);
    let stem = format!("isocond_{}_{}", design.label(), mode_slug(mode));
    let dir = out_dir(s);
    let files = vec![
        write(&dir, &format!("{stem}_field.csv"), &iso_field_csv(&field))?,
        write(&dir, &format!("{stem}_contours.csv"), &contours_csv(&design, mode, &set))?,
        write(&dir, &format!("{stem}.svg"), &contours_svg(&field, &set))?,
    ];
    let per_level: Vec<Value> = levels
        .iter()
        .map(|&l| {
            let cs: Vec<_> = set.at_level(l).collect();
            json!({
                "level": json_num(l),
                "polylines": cs.len(),
                "points": cs.iter().map(|c| c.points.len()).sum::<usize>(),
            })
        })
        .collect();
    Ok(json!({
        "command": "isocond",
        "design": design_json(&design),
        "mode": mode.to_string(),
        "files": files,
        "levels": per_level,
    }))
}

fn optimize(s: &Settings) -> Result<Value, CliError> {
    let budget = s.budget(4.0)?;
    let search = s.search(DesignSearch::new(0.0, 0.25 * budget, 5, 9))?;
    let samples = s.samples(DEFAULT_SAMPLES)?;
    let seed = s.seed(DEFAULT_SEED)?;
    if samples > 0 && samples < 1000 {
        return Err(CliError::usage("--samples: 0 or at least 1000"));
    }
    let res = optimize_workspace(budget, &search, samples, seed)?;
    let file = write(
        &out_dir(s),
        &format!("optimize_budget-{}.csv", fmt_g12(budget)),
        &optimize_csv(&res),
    )?;
    Ok(json!({
        "command": "optimize",
        "budget": json_num(budget),
        "candidates": res.ranking.len(),
        "files": [file],
        "best": design_report_json(&res.best),
    }))
}

fn plan(s: &Settings) -> Result<Value, CliError> {
    let design = s.design()?;
    let start = s.require_point("start")?;
    let goal = s.require_point("goal")?;
    let (m0, m1) = s.mode_pair()?;
    let plan = plan_mode_change(&design, (start, m0), (goal, m1))?;
    let mut body = plan_json(&plan);
    let path: Vec<WorldPoint> = plan.waypoints.iter().map(|w| w.point).collect();
    body["mode_comparison"] = mode_stats_json(&compare_modes_along(&design, &path, &WorkingMode::all()));
    let file = write(&out_dir(s), &format!("plan_{}.json", design.label()), &to_json_string(&body))?;
    Ok(json!({
        "command": "plan",
        "design": design_json(&design),
        "files": [file],
        "waypoints": plan.waypoints.len(),
        "crossings": plan.crossings.len(),
        "total_length": json_num(plan.total_length),
    }))
}

