//! Result files: legacy ASCII VTK and the convergence CSV.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader never sees a partial file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::assembly::{CellField, VelocityField};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::outer::OuterReport;

pub const CSV_HEADER: &str = "outer_iter,inner_iters,du_h1,dp_l2,div_l2";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// VTK text for a P1 velocity and two P0 cell fields.
pub fn vtk_string(mesh: &Mesh, u: &VelocityField, p: &CellField, div: &CellField) -> Result<String> {
    let (nv, nt) = (mesh.num_vertices(), mesh.num_triangles());
    for (expected, got) in [(2 * nv, u.values.len()), (nt, p.len()), (nt, div.len())] {
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    let mut s = String::with_capacity(64 * (nv + nt));
    s.push_str("# vtk DataFile Version 3.0\nstokes-tresca solution\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {nv} double");
    for x in mesh.vertices() {
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", x[0], x[1], 0.0);
    }
    let _ = writeln!(s, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    let _ = writeln!(s, "POINT_DATA {nv}\nVECTORS velocity double");
    for i in 0..nv {
        let v = u.node(i);
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", v[0], v[1], 0.0);
    }
    let _ = writeln!(s, "CELL_DATA {nt}");
    for (name, field) in [("pressure", p), ("divergence", div)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in &field.values {
            let _ = writeln!(s, "{v:.16e}");
        }
    }
    Ok(s)
}

pub fn write_vtk(mesh: &Mesh, u: &VelocityField, p: &CellField, div: &CellField, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), vtk_string(mesh, u, p, div)?.as_bytes())
}

pub fn convergence_csv_string(report: &OuterReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for i in 0..report.iterations() {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e}",
            i + 1,
            report.inner_iterations[i],
            report.velocity_changes[i],
            report.pressure_changes[i],
            report.divergence_norms[i]
        );
    }
    s
}

pub fn write_convergence_csv(report: &OuterReport, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), convergence_csv_string(report).as_bytes())
}
