//! Legacy ASCII VTK output for meshes and nodal fields, and CSV tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{sweep_eoc, MultiRecord, RunRecord};
use crate::mesh::{BoundaryField, NodalField, TriMesh};
use crate::regularization::CgRecord;

const VTK_TRIANGLE: u8 = 5;

/// Writes `mesh` as a legacy VTK unstructured grid with the given point scalars.
pub fn write_vtk<W: Write>(out: &mut W, title: &str, mesh: &TriMesh, fields: &[(&str, &NodalField)]) -> Result<()> {
    for (name, field) in fields {
        mesh.check(field.level())?;
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid VTK field name {name:?}")));
        }
    }
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for v in mesh.vertices() {
        writeln!(out, "{:e} {:e} 0", v[0], v[1])?;
    }
    let nt = mesh.num_triangles();
    writeln!(out, "CELLS {} {}", nt, 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "{VTK_TRIANGLE}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
        for (name, field) in fields {
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in field.values() {
                writeln!(out, "{v:e}")?;
            }
        }
    }
    Ok(())
}

pub fn write_vtk_file(path: &Path, title: &str, mesh: &TriMesh, fields: &[(&str, &NodalField)]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_vtk(&mut out, title, mesh, fields)?;
    out.flush()?;
    Ok(())
}

pub fn write_nodal_csv<W: Write>(out: W, mesh: &TriMesh, fields: &[(&str, &NodalField)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node".to_string(), "x1".into(), "x2".into()];
    header.extend(fields.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        let mut row = vec![i.to_string(), v[0].to_string(), v[1].to_string()];
        for (_, f) in fields {
            mesh.check(f.level())?;
            row.push(f.values()[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Connectivity table `triangle, v0, v1, v2` (counter-clockwise).
pub fn write_triangles_csv<W: Write>(out: W, mesh: &TriMesh) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["triangle", "v0", "v1", "v2"])?;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        w.write_record([t.to_string(), tri[0].to_string(), tri[1].to_string(), tri[2].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Boundary data per boundary node: nodal value and the constant on the edge
/// leaving that node.
pub fn write_boundary_csv<W: Write>(out: W, mesh: &TriMesh, fields: &[(&str, &BoundaryField)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string(), "node".into(), "x1".into(), "x2".into()];
    for (n, _) in fields {
        header.push(format!("{n}_nodal"));
        header.push(format!("{n}_edge"));
    }
    w.write_record(&header)?;
    for (k, &node) in mesh.boundary_nodes().iter().enumerate() {
        let x = mesh.vertices()[node];
        let mut row = vec![k.to_string(), node.to_string(), x[0].to_string(), x[1].to_string()];
        for (_, f) in fields {
            mesh.check(f.level())?;
            row.push(f.nodal()[k].to_string());
            row.push(f.edge()[k].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Iteration history with columns `k, cost, grad_norm, t_k, beta_k, tolerance`.
pub fn write_history_csv<W: Write>(out: W, history: &[CgRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "cost", "grad_norm", "t_k", "beta_k", "tolerance"])?;
    for r in history {
        w.write_record([
            r.k.to_string(),
            r.cost.to_string(),
            r.grad_norm.to_string(),
            opt(r.step),
            opt(r.beta),
            r.tolerance.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Convergence history: `level, h, rho, delta, iterations, tolerance` followed
/// by the errors `L2_f, L2_N, L2_D, H1_N, H1_D`.
pub fn write_sweep_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "level", "h", "rho", "delta", "iterations", "tolerance", "L2_f", "L2_N", "L2_D", "H1_N", "H1_D",
    ])?;
    for r in records {
        w.write_record([
            r.level.to_string(),
            r.h.to_string(),
            r.rho.to_string(),
            r.delta.to_string(),
            r.iterations.to_string(),
            r.tolerance.to_string(),
            r.l2_f.to_string(),
            r.l2_n.to_string(),
            r.l2_d.to_string(),
            r.h1_n.to_string(),
            r.h1_d.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-refinement EOC rows followed by a `mean` row.
pub fn write_eoc_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "EOC_L2_f", "EOC_L2_N", "EOC_L2_D", "EOC_H1_N", "EOC_H1_D"])?;
    if records.len() >= 2 {
        let cols = sweep_eoc(records)?;
        for (i, r) in records.iter().enumerate().skip(1) {
            let mut row = vec![r.level.to_string()];
            row.extend(cols.iter().map(|c| c.steps[i - 1].to_string()));
            w.write_record(&row)?;
        }
        let mut row = vec!["mean".to_string()];
        row.extend(cols.iter().map(|c| c.mean.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Multi-measurement table: `I, iterations, tolerance, delta_bar` and errors.
pub fn write_multi_csv<W: Write>(out: W, records: &[MultiRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "I", "iterations", "tolerance", "delta_bar", "L2_f", "L2_N", "L2_D", "H1_N", "H1_D",
    ])?;
    for r in records {
        w.write_record([
            r.measurements.to_string(),
            r.iterations.to_string(),
            r.tolerance.to_string(),
            r.delta_bar.to_string(),
            r.l2_f.to_string(),
            r.l2_n.to_string(),
            r.l2_d.to_string(),
            r.h1_n.to_string(),
            r.h1_d.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
