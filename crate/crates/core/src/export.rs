//! Text artifacts: fixed-format numbers, CSV rasters, contour SVG and plan JSON.
//!
//! Every CSV starts with a `# schema: ...` line. Floats use [`fmt_g12`];
//! absent values are empty fields.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::design::{ContourSet, DesignReport, IsoField, OptimizeResult};
use crate::model::{DesignParams, WorkingMode, WorldPoint};
use crate::planner::{ModePlan, ModeStats};
use crate::workspace::{JointSpaceRaster, WorkspaceRaster};

pub const SCHEMA_PREFIX: &str = "# schema: fivebar-hybrid/";

/// Formats like C's `%.12g`, with `inf`/`-inf`/`nan` spelled out and `-0`
/// written as `0`.
pub fn fmt_g12(x: f64) -> String {
    const PRECISION: i32 = 12;
    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    if x == 0.0 {
        return "0".to_owned();
    }
    // scientific form fixes the decimal exponent after rounding
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= PRECISION {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_owned()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g12).unwrap_or_default()
}

fn schema(kind: &str, design: &DesignParams, extra: &str) -> String {
    format!("{SCHEMA_PREFIX}{kind} v1 design={}{extra}\n", design.label())
}

/// Compact file-name form of a mode: `+-+` becomes `pmp`.
pub fn mode_slug(mode: WorkingMode) -> String {
    mode.to_string()
        .chars()
        .map(|c| if c == '+' { 'p' } else { 'm' })
        .collect()
}

pub fn raster_csv(r: &WorkspaceRaster) -> String {
    let mode = r.mode.map(|m| format!(" mode={m}")).unwrap_or_default();
    let mut out = schema("workspace", &r.design, &mode);
    out.push_str("u,v,reachable,mode_mask,detA,detB,kappa,flags\n");
    for c in &r.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_g12(c.u),
            fmt_g12(c.v),
            c.reachable as u8,
            c.mode_mask,
            opt(c.det_a),
            opt(c.det_b),
            opt(c.kappa),
            c.flags
        );
    }
    out
}

pub fn joint_space_csv(r: &JointSpaceRaster) -> String {
    let mut out = schema(
        "joint-space",
        &r.design,
        &format!(" assembly={}", r.assembly.gamma.symbol()),
    );
    out.push_str("theta2,theta3,feasible,detA,cd_ratio,flags\n");
    for c in &r.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_g12(c.theta2),
            fmt_g12(c.theta3),
            c.feasible as u8,
            opt(c.det_a),
            fmt_g12(c.cd_ratio),
            c.flags
        );
    }
    out
}

pub fn iso_field_csv(f: &IsoField) -> String {
    let mut out = schema("isofield", &f.design, &format!(" mode={}", f.mode));
    out.push_str("u,v,kappa,cos_delta,flags\n");
    for k in 0..f.grid.len() {
        let p = f.grid.center(k % f.grid.n, k / f.grid.n);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_g12(p.u),
            fmt_g12(p.v),
            opt(f.kappa[k]),
            opt(f.cos_delta[k]),
            f.flags[k]
        );
    }
    out
}

pub fn contours_csv(design: &DesignParams, mode: WorkingMode, set: &ContourSet) -> String {
    let mut out = schema("contours", design, &format!(" mode={mode}"));
    out.push_str("level,poly_id,seq,u,v\n");
    for (id, c) in set.contours.iter().enumerate() {
        for (seq, p) in c.points.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{id},{seq},{},{}",
                fmt_g12(c.level),
                fmt_g12(p.u),
                fmt_g12(p.v)
            );
        }
    }
    out
}

const PALETTE: [&str; 6] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"];

/// Contours as SVG polylines grouped per level. The view box is the field's
/// grid in `(u, -v)` so that `v` points up.
pub fn contours_svg(field: &IsoField, set: &ContourSet) -> String {
    let g = &field.grid;
    let (w, h) = (g.u_max - g.u_min, g.v_max - g.v_min);
    let stroke = fmt_g12(0.004 * w.max(h));
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="800" height="{}">"#,
        fmt_g12(g.u_min),
        fmt_g12(-g.v_max),
        fmt_g12(w),
        fmt_g12(h),
        fmt_g12((800.0 * h / w).round())
    );
    let _ = writeln!(
        out,
        "<title>isoconditioning contours design={} mode={}</title>",
        field.design.label(),
        field.mode
    );
    let font = fmt_g12(0.03 * w.max(h));
    for (n, &level) in set.levels.iter().enumerate() {
        let color = PALETTE[n % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<g class="level" data-level="{0}" stroke="{color}" fill="none" stroke-width="{stroke}"><title>kappa = {0}</title>"#,
            fmt_g12(level)
        );
        for c in set.at_level(level) {
            let pts: Vec<String> = c
                .points
                .iter()
                .map(|p| format!("{},{}", fmt_g12(p.u), fmt_g12(-p.v)))
                .collect();
            let tag = if c.closed { "polygon" } else { "polyline" };
            let pts = if c.closed {
                &pts[..pts.len() - 1]
            } else {
                &pts[..]
            };
            let _ = writeln!(out, r#"<{tag} points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="{font}" fill="{color}" stroke="none">kappa = {}</text>"#,
            fmt_g12(g.u_min + 0.02 * w),
            fmt_g12(-g.v_max + (n as f64 + 1.0) * 0.04 * h),
            fmt_g12(level)
        );
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

pub fn optimize_csv(res: &OptimizeResult) -> String {
    let mut out = format!("{SCHEMA_PREFIX}optimize v1 budget={}\n", fmt_g12(res.budget));
    out.push_str("rank,L0,L1,L2,volume,mc_volume,mc_stderr\n");
    for (k, c) in res.ranking.iter().enumerate() {
        let mc = c.monte_carlo;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            k + 1,
            fmt_g12(c.design.l0()),
            fmt_g12(c.design.l1()),
            fmt_g12(c.design.l2()),
            fmt_g12(c.volume),
            opt(mc.map(|m| m.volume)),
            opt(mc.map(|m| m.stderr))
        );
    }
    out
}

/// A float as JSON: finite values rounded to 12 significant digits, the
/// rest as strings.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        let rounded: f64 = fmt_g12(x).parse().expect("formatted float parses");
        json!(rounded)
    } else {
        json!(fmt_g12(x))
    }
}

fn json_point(p: WorldPoint) -> Value {
    json!([json_num(p.x), json_num(p.y), json_num(p.z)])
}

pub fn design_json(d: &DesignParams) -> Value {
    json!({"L0": json_num(d.l0()), "L1": json_num(d.l1()), "L2": json_num(d.l2())})
}

pub fn design_report_json(r: &DesignReport) -> Value {
    json!({
        "design": design_json(&r.design),
        "flat_eliminated": r.flat_eliminated,
        "coincident_eliminated": r.coincident_eliminated,
        "inequality_satisfied": r.inequality_satisfied,
        "workspace_volume": json_num(r.workspace_volume),
        "operative_mode_count": r.operative_mode_count,
    })
}

pub fn plan_json(plan: &ModePlan) -> Value {
    json!({
        "schema": "fivebar-hybrid/plan v1",
        "design": design_json(&plan.design),
        "waypoints": plan.waypoints.iter().map(|w| json!({
            "point": json_point(w.point),
            "mode": w.mode.to_string(),
        })).collect::<Vec<_>>(),
        "crossings": plan.crossings.iter().map(|c| json!({
            "point": json_point(c.point),
            "entry": format!("{:?}", c.entry),
            "waypoint": c.waypoint,
            "from": c.from.to_string(),
            "to": c.to.to_string(),
            "residual": json_num(c.residual),
        })).collect::<Vec<_>>(),
        "total_length": json_num(plan.total_length),
        "validation_spacing": json_num(plan.validation_spacing),
    })
}

pub fn mode_stats_json(stats: &[ModeStats]) -> Value {
    Value::Array(
        stats
            .iter()
            .map(|s| {
                json!({
                    "mode": s.mode.to_string(),
                    "feasible": s.feasible,
                    "samples": s.samples,
                    "kappa_max": s.kappa_max.map(json_num),
                    "kappa_mean": s.kappa_mean.map(json_num),
                })
            })
            .collect(),
    )
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g12() {
        let cases: [(f64, &str); 16] = [
            (0.0, "0"),
            (-0.0, "0"),
            (1.0, "1"),
            (std::f64::consts::SQRT_2, "1.41421356237"),
            (1e-5, "1e-05"),
            (1.23456789012345e-4, "0.000123456789012"),
            (123456789012.5, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (-3.14159265358979, "-3.14159265359"),
            (1e21, "1e+21"),
            (0.1 + 0.2, "0.3"),
            (12.566370614359172, "12.5663706144"),
            (33.51032163829112, "33.5103216383"),
            (1.5e-300, "1.5e-300"),
            (100.0, "100"),
            (0.0001, "0.0001"),
        ];
        for (x, expect) in cases {
            assert_eq!(fmt_g12(x), expect, "formatting {x:e}");
        }
        assert_eq!(fmt_g12(f64::INFINITY), "inf");
        assert_eq!(fmt_g12(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_g12(f64::NAN), "nan");
    }

    #[test]
    fn raster_csv_layout() {
        use crate::workspace::{cross_section, GridSpec};
        let d = DesignParams::new(2.0, 1.0, std::f64::consts::SQRT_2).unwrap();
        let g = GridSpec::around(&d, 5).unwrap();
        let mode: WorkingMode = "+-+".parse().unwrap();
        let csv = raster_csv(&cross_section(&d, &g, Some(mode)).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert!(lines[0].starts_with(SCHEMA_PREFIX));
        assert_eq!(lines[1], "u,v,reachable,mode_mask,detA,detB,kappa,flags");
        assert_eq!(lines.len(), 2 + 25);
        assert!(lines[2..].iter().all(|l| l.split(',').count() == 8));
        assert_eq!(mode_slug(mode), "pmp");
    }

    #[test]
    fn json_numbers() {
        assert_eq!(json_num(0.1 + 0.2).to_string(), "0.3");
        assert_eq!(json_num(f64::INFINITY), json!("inf"));
    }
}
