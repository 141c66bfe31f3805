mod common;

use common::system;
use hcurl_amg::experiment::{
    convergence_csv, emit_tables, load_import, run_experiment, ExperimentConfig, ImportPaths,
    Problem, SolverMode, TableFormat, CSV_HEADER,
};
use hcurl_amg::mesh::ElementKind;
use hcurl_amg::mmio::write_matrix_market;
use hcurl_amg::Error;

fn config(problem: Problem, shapes: &[usize], mode: SolverMode) -> ExperimentConfig {
    ExperimentConfig {
        problem,
        shapes: shapes.to_vec(),
        mode,
        ..Default::default()
    }
}

#[test]
fn csv_is_deterministic() {
    let mut cfg = config(Problem::Model2dTri, &[12, 20], SolverMode::Sphcurl);
    cfg.sigmas = vec![1e-2, 1.0];
    let a = convergence_csv(&run_experiment(&cfg).unwrap());
    let b = convergence_csv(&run_experiment(&cfg).unwrap());
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("tri12x12,"));
}

#[test]
fn import_refuses_broken_curl() {
    let dir = tempfile::tempdir().unwrap();
    let sys = system(ElementKind::Quad, 6, 1.0, false);
    let mut s = sys.s.clone();
    s.values_mut()[0] += 0.25;
    let files = [("ae", &sys.a_e), ("s", &s), ("an", &sys.a_n), ("d", &sys.d), ("s_ok", &sys.s)];
    for (name, m) in files {
        write_matrix_market(m, dir.path().join(format!("{name}.mtx"))).unwrap();
    }
    let p = |n: &str| Some(dir.path().join(format!("{n}.mtx")));
    let mut paths = ImportPaths { a_e: p("ae"), s: p("s"), a_n: p("an"), d: p("d") };
    assert!(matches!(load_import(&paths), Err(Error::StructureViolation(_))));

    paths.s = p("s_ok");
    let input = load_import(&paths).unwrap();
    assert_eq!(input.a_e, sys.a_e);

    paths.d = p("an");
    assert!(matches!(load_import(&paths), Err(Error::DimensionMismatch(_))));

    paths.d = None;
    assert!(load_import(&paths).is_err());
}

#[test]
fn imported_model_matches_the_generated_run() {
    let dir = tempfile::tempdir().unwrap();
    let sys = system(ElementKind::Tri, 16, 1.0, false);
    for (name, m) in [("ae", &sys.a_e), ("s", &sys.s), ("an", &sys.a_n), ("d", &sys.d)] {
        write_matrix_market(m, dir.path().join(format!("{name}.mtx"))).unwrap();
    }
    let p = |n: &str| Some(dir.path().join(format!("{n}.mtx")));
    let mut cfg = config(Problem::Import, &[16], SolverMode::Sphcurl);
    cfg.import = ImportPaths { a_e: p("ae"), s: p("s"), a_n: p("an"), d: p("d") };
    let imported = run_experiment(&cfg).unwrap();
    let generated = run_experiment(&config(Problem::Model2dTri, &[16], SolverMode::Sphcurl)).unwrap();
    assert_eq!(imported.runs[0].iterations, generated.runs[0].iterations);
    assert_eq!(imported.runs[0].sigma, None);
}

#[test]
fn tables_are_written_in_every_format() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config(Problem::Model2dQuad, &[16], SolverMode::Sphcurl)).unwrap();
    for (format, ext) in [(TableFormat::Text, "txt"), (TableFormat::Csv, "csv"), (TableFormat::JsonLines, "jsonl")] {
        let paths = emit_tables(&report, format, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        for path in paths {
            assert_eq!(path.extension().unwrap(), ext);
            assert!(!std::fs::read_to_string(&path).unwrap().is_empty());
        }
    }
    let jsonl = std::fs::read_to_string(dir.path().join("convergence.jsonl")).unwrap();
    let v: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(v["mode"], "sphcurl");
    assert_eq!(v["status"], "converged");
}

#[test]
fn quad_iterations_do_not_grow() {
    let report = run_experiment(&config(Problem::Model2dQuad, &[28, 82], SolverMode::Sphcurl)).unwrap();
    let its: Vec<usize> = report.runs.iter().map(|r| r.iterations).collect();
    assert!(its[1] <= its[0] + 1, "{its:?}");
}

#[test]
fn piecewise_coarsening_is_not_better_on_triangles() {
    let sp = run_experiment(&config(Problem::Model2dTri, &[82], SolverMode::Sphcurl)).unwrap();
    let rs = run_experiment(&config(Problem::Model2dTri, &[82], SolverMode::Rsamg)).unwrap();
    assert!(rs.runs[0].iterations >= sp.runs[0].iterations);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = ExperimentConfig::default();
    cfg.shapes.clear();
    assert!(run_experiment(&cfg).is_err());
    let cfg = config(Problem::Import, &[4], SolverMode::Sphcurl);
    assert!(run_experiment(&cfg).is_err());
}
