//! CSV, mesh and manifest persistence. Every float is written with 17
//! significant digits so a dump round-trips bit for bit.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use vdoc_core::certificate::CertificateParams;
use vdoc_core::{CertificateVerdict, FeFunction, KktSolution, Mesh, PdasConfig, StudyReport};

use crate::error::CliError;

pub const CERTIFICATE_HEADER: &str = "level,h,p_norm_Lq,eta,margin,classification";
pub const EOC_HEADER: &str = "pair,EOC_uL2,EOC_yH1,EOC_yL2,EOC_yLinf";

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Output { path: dir.to_path_buf(), source })
}

pub fn fe_csv(f: &FeFunction) -> String {
    let mut out = String::from("x,y,value\n");
    for (x, v) in f.mesh().vertices().iter().zip(f.coefficients()) {
        let _ = writeln!(out, "{},{},{}", num(x[0]), num(x[1]), num(*v));
    }
    out
}

/// Nonzero multipliers in node order. Lower-bound multipliers are `≤ 0`,
/// upper-bound ones `≥ 0`.
pub fn multiplier_csv(sol: &KktSolution) -> String {
    let x = sol.mesh().vertices();
    let mut out = String::from("node_index,x,y,mu\n");
    for (&j, &mu) in sol.mu.iter().filter(|(_, mu)| **mu != 0.0) {
        let _ = writeln!(out, "{j},{},{},{}", num(x[j][0]), num(x[j][1]), num(mu));
    }
    out
}

pub fn certificate_line(level: u32, h: f64, v: &CertificateVerdict) -> String {
    format!("{level},{},{},{},{},{}", num(h), num(v.p_norm), num(v.eta_value), num(v.margin), v.classification)
}

/// Header `...,p_norm_L4,...` for the cubic family; the Lebesgue index
/// follows the certificate exponent of the nonlinearity.
pub fn study_header(q: f64) -> String {
    let q = if q.fract() == 0.0 { format!("{}", q as i64) } else { format!("{q}") };
    format!("level,h,E_uL2,E_yH1,E_yL2,E_yLinf,p_norm_L{q},eta,classification")
}

pub fn study_csv(report: &StudyReport, q: f64) -> String {
    let mut out = study_header(q);
    out.push('\n');
    for (((level, h), e), c) in report.levels.iter().zip(&report.errors).zip(&report.certificates) {
        let _ = writeln!(
            out,
            "{level},{},{},{},{},{},{},{},{}",
            num(*h),
            num(e.e_u_l2),
            num(e.e_y_h1),
            num(e.e_y_l2),
            num(e.e_y_linf),
            num(c.p_norm),
            num(c.eta_value),
            c.classification
        );
    }
    out
}

pub fn eoc_csv(report: &StudyReport) -> String {
    let mut out = format!("{EOC_HEADER}\n");
    for r in &report.eoc {
        let _ = writeln!(
            out,
            "{}-{},{},{},{},{}",
            r.pair.0,
            r.pair.1,
            num(r.eoc_u_l2),
            num(r.eoc_y_h1),
            num(r.eoc_y_l2),
            num(r.eoc_y_linf)
        );
    }
    out
}

pub fn sweep_header(q: f64) -> String {
    let q = if q.fract() == 0.0 { format!("{}", q as i64) } else { format!("{q}") };
    format!("alpha,p_norm_L{q},eta")
}

pub fn mesh_text(m: &Mesh) -> String {
    let mut out = format!("vertices {} triangles {}\n", m.num_vertices(), m.num_triangles());
    for v in m.vertices() {
        let _ = writeln!(out, "{} {}", num(v[0]), num(v[1]));
    }
    for t in m.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn read_mesh(path: &Path) -> Result<Mesh, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::ConfigFile { path: path.to_path_buf(), message: e.to_string() })?;
    parse_mesh(&text, path)
}

pub fn parse_mesh(text: &str, path: &Path) -> Result<Mesh, CliError> {
    let err = |line: usize, message: String| CliError::MeshFormat { path: path.to_path_buf(), line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or_else(|| err(1, "empty mesh file".into()))?;
    let words: Vec<&str> = header.split_whitespace().collect();
    let (nv, nt) = match words.as_slice() {
        ["vertices", a, "triangles", b] => match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(err(hl, format!("malformed counts in `{header}`"))),
        },
        _ => return Err(err(hl, format!("expected `vertices N triangles M`, got `{header}`"))),
    };
    let mut vertices = Vec::with_capacity(nv);
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| err(hl, format!("expected {nv} vertices")))?;
        let v: Vec<f64> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| err(ln, format!("malformed vertex `{l}`")))?;
        if v.len() != 2 {
            return Err(err(ln, format!("vertex needs two coordinates, got `{l}`")));
        }
        vertices.push([v[0], v[1]]);
    }
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| err(hl, format!("expected {nt} triangles")))?;
        let t: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| err(ln, format!("malformed triangle `{l}`")))?;
        if t.len() != 3 || t.iter().any(|&i| i >= nv) {
            return Err(err(ln, format!("triangle needs three vertex indices below {nv}, got `{l}`")));
        }
        triangles.push([t[0], t[1], t[2]]);
    }
    if let Some((ln, l)) = lines.next() {
        return Err(err(ln, format!("trailing content `{l}`")));
    }
    Mesh::from_parts(vertices, triangles).map_err(|e| err(hl, e.to_string()))
}

/// Run record: what was run, on which config bytes, with which tolerances.
pub struct Manifest {
    pub command: String,
    pub config_path: PathBuf,
    pub config_source: String,
    pub pdas: PdasConfig,
    pub params: CertificateParams,
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let digest = Sha256::digest(self.config_source.as_bytes());
        let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let mut out = String::new();
        let _ = writeln!(out, "version = v{}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "command = {}", self.command);
        let _ = writeln!(out, "config = {}", self.config_path.display());
        let _ = writeln!(out, "config_sha256 = {hash}");
        let _ = writeln!(out, "tol_kkt = {}", num(self.pdas.tol_kkt));
        match self.pdas.c_pdas {
            Some(c) => {
                let _ = writeln!(out, "c_pdas = {}", num(c));
            }
            None => {
                let _ = writeln!(out, "c_pdas = 1/alpha");
            }
        }
        let _ = writeln!(out, "max_outer = {}", self.pdas.max_outer);
        let _ = writeln!(out, "max_newton_inner = {}", self.pdas.max_newton_inner);
        let _ = writeln!(out, "feasibility_tol = {}", num(vdoc_core::kkt::FEASIBILITY_TOL));
        let _ = writeln!(out, "stationarity_tol = {}", num(vdoc_core::certificate::STATIONARITY_TOL));
        let _ = writeln!(out, "certificate_q = {}", num(self.params.q));
        let _ = writeln!(out, "certificate_c_q = {}", num(self.params.c_q));
        let _ = writeln!(out, "growth_r = {}", num(self.params.r));
        let _ = writeln!(out, "growth_m = {}", num(self.params.m));
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;
    use vdoc_core::uniform_triangulation;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0, -0.0] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(num(1.0), "1.0000000000000000e0");
        assert_eq!(num(f64::INFINITY), "inf");
    }

    #[test]
    fn mesh_round_trip() {
        let m = uniform_triangulation(4).unwrap();
        let text = mesh_text(&m);
        assert!(text.starts_with("vertices 25 triangles 32\n"));
        let back = parse_mesh(&text, Path::new("m.txt")).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.num_triangles(), m.num_triangles());
        assert_eq!(mesh_text(&back), text);
    }

    #[test]
    fn mesh_errors_have_lines() {
        let bad = "vertices 3 triangles 1\n0 0\n1 0\n0 x\n0 1 2\n";
        match parse_mesh(bad, Path::new("m.txt")).unwrap_err() {
            CliError::MeshFormat { line, .. } => assert_eq!(line, 4),
            e => panic!("{e:?}"),
        }
        let bad = "vertices 3 triangles 1\n0 0\n1 0\n0 1\n0 1 3\n";
        assert!(matches!(parse_mesh(bad, Path::new("m.txt")), Err(CliError::MeshFormat { line: 5, .. })));
        assert!(parse_mesh("nodes 3\n", Path::new("m.txt")).is_err());
    }

    #[test]
    fn fe_dump_lists_every_vertex() {
        let m = Arc::new(uniform_triangulation(2).unwrap());
        let f = FeFunction::new(Arc::clone(&m), (0..9).map(|i| i as f64).collect()).unwrap();
        let csv = fe_csv(&f);
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows[0], "x,y,value");
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().skip(1).all(|r| r.split(',').count() == 3));
    }

    #[test]
    fn headers() {
        assert_eq!(study_header(4.0), "level,h,E_uL2,E_yH1,E_yL2,E_yLinf,p_norm_L4,eta,classification");
        assert_eq!(sweep_header(4.0), "alpha,p_norm_L4,eta");
        let v = CertificateVerdict::from_values(0.1, 0.2);
        let line = certificate_line(3, 0.5, &v);
        assert!(line.starts_with("3,5.0000000000000000e-1,"));
        assert!(line.ends_with(",unique_global"));
        assert_eq!(line.split(',').count(), CERTIFICATE_HEADER.split(',').count());
    }
}
