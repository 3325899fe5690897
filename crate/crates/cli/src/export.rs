//! Bit-stable CSV, JSON and legacy VTK writers.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use fmd_core::checker::OptimalityReport;
use fmd_core::lcp::DiscreteLCPSolution;
use fmd_core::oracle::rho_polar;
use fmd_core::reconstruct::FMDDesign;
use fmd_core::scalar::ConductivityDesign;
use serde_json::{json, Value};

/// Fixed 17-significant-digit scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn row(values: &[f64]) -> String {
    values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")
}

pub fn displacement_csv(sol: &DiscreteLCPSolution, u: &[[f64; 2]]) -> String {
    let mut s = String::from("node,x,y,u1,u2\n");
    for (n, d) in u.iter().enumerate() {
        let x = sol.grid.node_position(n);
        let _ = writeln!(s, "{n},{}", row(&[x[0], x[1], d[0], d[1]]));
    }
    s
}

pub fn flux_csv(sol: &DiscreteLCPSolution) -> String {
    let mut s = String::from("cell,x,y,tau11,tau22,tau12,rho_polar\n");
    for c in 0..sol.grid.cell_count() {
        let x = sol.grid.cell_center(c);
        let t = sol.cell_tau(c);
        let _ = writeln!(
            s,
            "{c},{}",
            row(&[x[0], x[1], t.get(0, 0), t.get(1, 1), t.get(0, 1), rho_polar(&sol.setting, &t)])
        );
    }
    s
}

pub fn design_csv(design: &FMDDesign) -> String {
    let mut s = String::from(
        "cell,x,y,mass,density,sigma11,sigma22,sigma12,hooke_trace,hooke_norm,hooke_eig_max,hooke_eig_min\n",
    );
    for c in 0..design.grid.cell_count() {
        let x = design.grid.cell_center(c);
        let sg = design.cell_stress(c);
        let (tr, nrm, emax, emin) = match design.cell_hooke(c) {
            Some(h) => {
                let (vals, _) = h.eigen();
                (h.trace(), h.frobenius(), vals[0], *vals.last().unwrap())
            }
            None => (0.0, 0.0, 0.0, 0.0),
        };
        let _ = writeln!(
            s,
            "{c},{}",
            row(&[
                x[0],
                x[1],
                design.cell_mass(c),
                design.cell_density(c),
                sg.get(0, 0),
                sg.get(1, 1),
                sg.get(0, 1),
                tr,
                nrm,
                emax,
                emin
            ])
        );
    }
    s
}

pub fn segments_csv(design: &ConductivityDesign) -> String {
    let mut s = String::from("x1,y1,x2,y2,mass,density,a11,a22,a12\n");
    for seg in &design.segments {
        let _ = writeln!(
            s,
            "{}",
            row(&[
                seg.start[0],
                seg.start[1],
                seg.end[0],
                seg.end[1],
                seg.mass,
                seg.density(),
                seg.tensor[0],
                seg.tensor[1],
                seg.tensor[2]
            ])
        );
    }
    s
}

pub fn report_json(report: &OptimalityReport) -> Value {
    let cond = |c: &fmd_core::checker::ConditionResult| {
        json!({
            "status": if c.passed { "pass" } else { "fail" },
            "worst": if c.worst.is_finite() { json!(c.worst) } else { json!("inf") },
        })
    };
    json!({
        "equilibrium": cond(&report.equilibrium),
        "membership": cond(&report.membership),
        "extremality": cond(&report.extremality),
        "status": if report.passed() { "pass" } else { "fail" },
    })
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

/// Legacy ASCII VTK structured-points file with cell data.
pub fn vtk_cells(sol: &DiscreteLCPSolution, design: Option<&FMDDesign>) -> String {
    let g = &sol.grid;
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\nfmd fields\nASCII\nDATASET STRUCTURED_POINTS");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", g.nx + 1, g.ny + 1);
    let _ = writeln!(s, "ORIGIN {} {} 0", num(g.origin[0]), num(g.origin[1]));
    let _ = writeln!(s, "SPACING {} {} 1", num(g.h), num(g.h));
    let _ = writeln!(s, "CELL_DATA {}", g.cell_count());
    let _ = writeln!(s, "SCALARS rho_polar double 1\nLOOKUP_TABLE default");
    for c in 0..g.cell_count() {
        let _ = writeln!(s, "{}", num(rho_polar(&sol.setting, &sol.cell_tau(c))));
    }
    if let Some(d) = design {
        let _ = writeln!(s, "SCALARS density double 1\nLOOKUP_TABLE default");
        for c in 0..g.cell_count() {
            let _ = writeln!(s, "{}", num(d.cell_density(c)));
        }
    }
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)
}
