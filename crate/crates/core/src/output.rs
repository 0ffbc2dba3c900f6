//! File formats: convergence tables, legacy VTK, Matrix Market, gnuplot
//! scripts and the run manifest.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::adapt::{IterationRecord, StudyRecord};
use crate::error::{Error, Result};
use crate::linalg::{CVec2, SparseMatrix};
use crate::mesh::Mesh;

pub const CONVERGENCE_HEADER: &str = "iter,dof,N,eps_N,eps_h,e_h,rel_residual,seconds";
pub const STUDY_HEADER: &str = "level,h,dof,e_h,rate,eps_h,rel_residual";

/// Shortest decimal that parses back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn convergence_row(r: &IterationRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.iteration,
        r.dof,
        r.n,
        num(r.eps_n),
        num(r.eps_h),
        opt(r.e_h),
        num(r.rel_residual),
        num(r.seconds)
    )
}

pub fn convergence_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from(CONVERGENCE_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&convergence_row(r));
        s.push('\n');
    }
    s
}

fn bad_row(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("csv line {line}: {msg}"))
}

pub fn parse_convergence_csv(text: &str) -> Result<Vec<IterationRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CONVERGENCE_HEADER => {}
        _ => return Err(bad_row(1, "unexpected header")),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(bad_row(i + 1, format!("expected 8 fields, got {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| bad_row(i + 1, e));
        let real = |s: &str| s.parse::<f64>().map_err(|e| bad_row(i + 1, e));
        out.push(IterationRecord {
            iteration: int(f[0])?,
            dof: int(f[1])?,
            n: int(f[2])?,
            eps_n: real(f[3])?,
            eps_h: real(f[4])?,
            e_h: if f[5].is_empty() { None } else { Some(real(f[5])?) },
            rel_residual: real(f[6])?,
            seconds: real(f[7])?,
        });
    }
    Ok(out)
}

pub fn study_csv(records: &[StudyRecord]) -> String {
    let mut s = String::from(STUDY_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.level,
            num(r.h),
            r.dof,
            opt(r.e_h),
            opt(r.rate),
            num(r.eps_h),
            num(r.rel_residual)
        );
    }
    s
}

/// Legacy ASCII unstructured grid: triangles followed by the tagged boundary
/// edges as line cells. Cell data "tag" is 0 on triangles and the boundary
/// code on lines; "eta" is written on triangles (0 on lines) when given.
pub fn write_vtk<W: Write>(
    w: &mut W,
    mesh: &Mesh,
    field: Option<&[CVec2]>,
    eta: Option<&[f64]>,
) -> io::Result<()> {
    let nv = mesh.vertices().len();
    let nt = mesh.triangles().len();
    let nb = mesh.boundary_edges().len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "elastodtn mesh")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", num(p[0]), num(p[1]))?;
    }
    writeln!(w, "CELLS {} {}", nt + nb, 4 * nt + 3 * nb)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    for e in mesh.boundary_edges() {
        writeln!(w, "2 {} {}", e.vertices[0], e.vertices[1])?;
    }
    writeln!(w, "CELL_TYPES {}", nt + nb)?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    for _ in 0..nb {
        writeln!(w, "3")?;
    }
    writeln!(w, "CELL_DATA {}", nt + nb)?;
    writeln!(w, "SCALARS tag int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for _ in 0..nt {
        writeln!(w, "0")?;
    }
    for e in mesh.boundary_edges() {
        writeln!(w, "{}", e.tag.code())?;
    }
    if let Some(eta) = eta {
        writeln!(w, "SCALARS eta double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for e in eta {
            writeln!(w, "{}", num(*e))?;
        }
        for _ in 0..nb {
            writeln!(w, "0")?;
        }
    }
    if let Some(u) = field {
        writeln!(w, "POINT_DATA {nv}")?;
        writeln!(w, "VECTORS displacement_re double")?;
        for v in u {
            writeln!(w, "{} {} 0", num(v[0].re), num(v[1].re))?;
        }
        writeln!(w, "VECTORS displacement_im double")?;
        for v in u {
            writeln!(w, "{} {} 0", num(v[0].im), num(v[1].im))?;
        }
    }
    Ok(())
}

/// Coordinate format, complex general, 1-based indices.
pub fn write_matrix_market<W: Write>(w: &mut W, a: &SparseMatrix) -> io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate complex general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {} {}", i + 1, j + 1, num(v.re), num(v.im))?;
    }
    Ok(())
}

/// gnuplot script drawing the convergence table on log-log axes with a
/// DoF^{-1/2} reference line.
pub fn convergence_gnuplot(csv_name: &str, png_name: &str, with_exact: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 800,600");
    let _ = writeln!(s, "set output '{png_name}'");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'DoF'");
    let _ = writeln!(s, "set ylabel 'error'");
    let _ = writeln!(s, "set key top right");
    let _ = writeln!(s, "stats '{csv_name}' using 2:5 nooutput");
    let _ = writeln!(s, "c = STATS_max_y * sqrt(STATS_min_x)");
    let mut plot = format!("plot '{csv_name}' using 2:5 skip 1 with linespoints title 'eps_h'");
    if with_exact {
        plot.push_str(&format!(", '{csv_name}' using 2:6 skip 1 with linespoints title 'e_h'"));
    }
    plot.push_str(", c / sqrt(x) with lines dashtype 2 title 'DoF^{-1/2}'");
    let _ = writeln!(s, "{plot}");
    s
}

pub fn study_gnuplot(csv_name: &str, png_name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set terminal pngcairo size 800,600");
    let _ = writeln!(s, "set output '{png_name}'");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set xlabel 'h'");
    let _ = writeln!(s, "set ylabel 'error'");
    let _ = writeln!(
        s,
        "plot '{csv_name}' using 2:4 skip 1 with linespoints title 'e_h', \
         '{csv_name}' using 2:6 skip 1 with linespoints title 'eps_h'"
    );
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files written into one output directory, listed in a MANIFEST with their hashes.
#[derive(Debug)]
pub struct ArtifactSet {
    dir: std::path::PathBuf,
    files: Vec<String>,
}

impl ArtifactSet {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn track(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), text)?;
        self.track(name);
        Ok(())
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut io::BufWriter<std::fs::File>) -> io::Result<()>) -> Result<()> {
        let file = std::fs::File::create(self.dir.join(name))?;
        let mut w = io::BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        self.track(name);
        Ok(())
    }

    /// Opens a file for incremental writing; it is hashed when the manifest is written.
    pub fn open(&mut self, name: &str) -> Result<io::BufWriter<std::fs::File>> {
        let file = std::fs::File::create(self.dir.join(name))?;
        self.track(name);
        Ok(io::BufWriter::new(file))
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    /// Writes MANIFEST: key/value header lines, then `sha256 bytes name` per artifact.
    pub fn write_manifest(&self, header: &[(&str, String)], complete: bool) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "status {}", if complete { "complete" } else { "incomplete" });
        for (k, v) in header {
            let _ = writeln!(s, "{k} {}", v.replace('\n', " "));
        }
        for name in &self.files {
            let bytes = std::fs::read(self.dir.join(name))?;
            let _ = writeln!(s, "{} {} {}", sha256_hex(&bytes), bytes.len(), name);
        }
        std::fs::write(self.dir.join("MANIFEST"), s)?;
        Ok(())
    }
}
