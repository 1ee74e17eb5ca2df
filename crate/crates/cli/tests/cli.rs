use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn vdoc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vdoc")).args(args).env("VDOC_THREADS", "2").output().unwrap()
}

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/pyramid_benchmark.conf")
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("run.conf");
    std::fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn empty_config_is_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "");
    let o = vdoc(&["solve", "--config", cfg.to_str().unwrap(), "--level", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`nonlinearity`"), "{}", stderr(&o));
}

#[test]
fn unknown_nonlinearity_lists_catalog() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "nonlinearity = sinh\nalpha = 1\ny0 = 0\n");
    let o = vdoc(&["solve", "--config", cfg.to_str().unwrap(), "--level", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("line 1") && e.contains("linear_cubic") && e.contains("polynomial"), "{e}");
}

#[test]
fn level_zero_exits_two() {
    let dir = TempDir::new().unwrap();
    let o = vdoc(&[
        "solve",
        "--config",
        shipped_config().to_str().unwrap(),
        "--level",
        "0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("level"));
}

#[test]
fn solver_failure_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "nonlinearity = cubic\nalpha = 1e-2\ny0 = -1\ny_a = pyramid_lower\ny_b = inf\nregion = whole_domain\nmax_outer = 1\n",
    );
    let o = vdoc(&["solve", "--config", cfg.to_str().unwrap(), "--level", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn solve_writes_artifacts_reproducibly() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let o = vdoc(&[
            "solve",
            "--config",
            shipped_config().to_str().unwrap(),
            "--level",
            "4",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["mesh.txt", "u.csv", "y.csv", "p.csv", "multipliers.csv", "certificate.csv", "manifest.txt"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs between runs");
    }

    let y = read(a.path(), "y.csv");
    assert_eq!(y.lines().next(), Some("x,y,value"));
    assert_eq!(y.lines().count(), 1 + 17 * 17);

    // The pyramid bound touches only at the centre.
    let mu = read(a.path(), "multipliers.csv");
    let rows: Vec<&str> = mu.lines().collect();
    assert_eq!(rows[0], "node_index,x,y,mu");
    assert_eq!(rows.len(), 2, "{mu}");
    let f: Vec<f64> = rows[1].split(',').skip(1).map(|s| s.parse().unwrap()).collect();
    assert!((f[0] - 0.5).abs() < 1e-15 && (f[1] - 0.5).abs() < 1e-15);
    assert!(f[2] < 0.0);

    let cert = read(a.path(), "certificate.csv");
    assert!(cert.starts_with("level,h,p_norm_Lq,eta,margin,classification\n4,"));
    assert!(cert.trim_end().ends_with(",unique_global"), "{cert}");

    let manifest = read(a.path(), "manifest.txt");
    assert!(manifest.starts_with("version = v"));
    for key in ["config_sha256 = ", "tol_kkt = ", "max_outer = ", "feasibility_tol = ", "certificate_c_q = "] {
        assert!(manifest.contains(key), "missing {key}");
    }
}

#[test]
fn sweep_stays_below_threshold() {
    let dir = TempDir::new().unwrap();
    let o = vdoc(&[
        "sweep-alpha",
        "--config",
        shipped_config().to_str().unwrap(),
        "--alphas",
        "1e-4,1e-3,1e-2,1e-1",
        "--level",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(dir.path(), "sweep.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("alpha,p_norm_L4,eta"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert!(r[1] < r[2], "alpha {}: {} >= {}", r[0], r[1], r[2]);
    }
}

#[test]
fn small_study_writes_tables() {
    let dir = TempDir::new().unwrap();
    let o = vdoc(&[
        "study",
        "--config",
        shipped_config().to_str().unwrap(),
        "--levels",
        "1..4",
        "--ref",
        "6",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let study = read(dir.path(), "study.csv");
    assert_eq!(study.lines().count(), 5);
    assert!(study.starts_with("level,h,E_uL2,E_yH1,E_yL2,E_yLinf,p_norm_L4,eta,classification\n1,"));
    let eoc = read(dir.path(), "eoc.csv");
    let pairs: Vec<&str> = eoc.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(pairs, ["1-2", "2-3", "3-4"]);
    assert_eq!(read(dir.path(), "certificates.csv").lines().count(), 5);

    let too_close = vdoc(&[
        "study",
        "--config",
        shipped_config().to_str().unwrap(),
        "--levels",
        "1..4",
        "--ref",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(too_close.status.code(), Some(2));
}

#[test]
fn solve_on_a_saved_mesh_matches_the_uniform_solve() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = shipped_config();
    let o = vdoc(&["solve", "--config", cfg.to_str().unwrap(), "--level", "3", "--out", a.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mesh = a.path().join("mesh.txt");
    let o = vdoc(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--mesh",
        mesh.to_str().unwrap(),
        "--out",
        b.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read(a.path(), "mesh.txt"), read(b.path(), "mesh.txt"));
    let ya: Vec<f64> =
        read(a.path(), "y.csv").lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    let yb: Vec<f64> =
        read(b.path(), "y.csv").lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ya.len(), yb.len());
    for (p, q) in ya.iter().zip(&yb) {
        assert!((p - q).abs() <= 1e-10, "{p} vs {q}");
    }
}

#[test]
fn malformed_mesh_is_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    let mesh = dir.path().join("bad.txt");
    std::fs::write(&mesh, "vertices 3 triangles 1\n0 0\n1 0\n0 1\n0 1\n").unwrap();
    let o = vdoc(&[
        "solve",
        "--config",
        shipped_config().to_str().unwrap(),
        "--mesh",
        mesh.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
}
