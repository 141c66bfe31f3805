//! Run configuration, the experiment driver and table output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::DiscretizedSystem;
use crate::error::{Error, Result};
use crate::krylov::{pcg_solve, RelaxationOnly, SolveStatus};
use crate::mesh::{build_structured_mesh, ElementKind};
use crate::mmio::read_matrix_market;
use crate::multigrid::{build_hierarchy, null_space_defect, HierarchyConfig};
use crate::prolongator::{EminConfig, EminMode};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Model2dTri,
    Model2dQuad,
    Model3dTet,
    Model3dHex,
    Import,
}

impl Problem {
    fn element(self) -> Option<ElementKind> {
        match self {
            Problem::Model2dTri => Some(ElementKind::Tri),
            Problem::Model2dQuad => Some(ElementKind::Quad),
            Problem::Model3dTet => Some(ElementKind::Tet),
            Problem::Model3dHex => Some(ElementKind::Hex),
            Problem::Import => None,
        }
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "model2d_tri" => Problem::Model2dTri,
            "model2d_quad" => Problem::Model2dQuad,
            "model3d_tet" => Problem::Model3dTet,
            "model3d_hex" => Problem::Model3dHex,
            "import" => Problem::Import,
            _ => return Err(Error::Config(format!("unknown problem {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Sphcurl,
    Rsamg,
    RelaxationOnly,
}

impl SolverMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverMode::Sphcurl => "sphcurl",
            SolverMode::Rsamg => "rsamg",
            SolverMode::RelaxationOnly => "relaxation_only",
        }
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sphcurl" => SolverMode::Sphcurl,
            "rsamg" => SolverMode::Rsamg,
            "relaxation_only" => SolverMode::RelaxationOnly,
            _ => return Err(Error::Config(format!("unknown mode {s:?}"))),
        })
    }
}

/// Matrix files for the import problem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportPaths {
    pub a_e: Option<PathBuf>,
    pub s: Option<PathBuf>,
    pub a_n: Option<PathBuf>,
    pub d: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    /// Nodes per axis, one run per entry.
    pub shapes: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub mode: SolverMode,
    pub omega: f64,
    pub emin_iterations: usize,
    pub rtol: f64,
    pub maxit: usize,
    pub seed: u64,
    pub coarse_size: usize,
    pub max_levels: usize,
    pub drop_tol: f64,
    pub dirichlet: bool,
    pub import: ImportPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let h = HierarchyConfig::default();
        Self {
            problem: Problem::Model2dQuad,
            shapes: vec![28],
            sigmas: vec![1.0],
            mode: SolverMode::Sphcurl,
            omega: h.emin.omega,
            emin_iterations: h.emin.iterations,
            rtol: 1e-8,
            maxit: 500,
            seed: 7,
            coarse_size: h.coarse_size,
            max_levels: h.max_levels,
            drop_tol: h.drop_tol,
            dirichlet: false,
            import: ImportPaths::default(),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(key, t))
        .collect()
}

impl ExperimentConfig {
    /// Sets one `key = value` option; list keys take comma-separated values.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "problem" => self.problem = value.parse()?,
            "shape" | "shapes" => self.shapes = parse_list(key, value)?,
            "sigma" | "sigmas" => self.sigmas = parse_list(key, value)?,
            "mode" => self.mode = value.parse()?,
            "omega" => self.omega = parse_value(key, value)?,
            "emin_iterations" => self.emin_iterations = parse_value(key, value)?,
            "rtol" => self.rtol = parse_value(key, value)?,
            "maxit" => self.maxit = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "coarse_size" => self.coarse_size = parse_value(key, value)?,
            "max_levels" => self.max_levels = parse_value(key, value)?,
            "drop_tol" => self.drop_tol = parse_value(key, value)?,
            "dirichlet" => self.dirichlet = parse_value(key, value)?,
            "a_e" => self.import.a_e = Some(value.into()),
            "s" => self.import.s = Some(value.into()),
            "a_n" => self.import.a_n = Some(value.into()),
            "d" => self.import.d = Some(value.into()),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigmas.is_empty() {
            return Err(Error::Config("sigma list is empty".into()));
        }
        if !(self.rtol > 0.0) {
            return Err(Error::Config(format!("rtol must be positive, got {}", self.rtol)));
        }
        self.hierarchy_config().emin.validate()?;
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be positive".into()));
        }
        if self.problem == Problem::Import {
            let p = &self.import;
            if p.a_e.is_none() || p.s.is_none() || p.a_n.is_none() || p.d.is_none() {
                return Err(Error::Config("import needs a_e, s, a_n and d".into()));
            }
            return Ok(());
        }
        if self.shapes.is_empty() {
            return Err(Error::Config("shape list is empty".into()));
        }
        if let Some(&n) = self.shapes.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("shape {n} needs at least 2 nodes per axis")));
        }
        if let Some(&s) = self.sigmas.iter().find(|&&s| !(s > 0.0)) {
            return Err(Error::Config(format!("sigma must be positive, got {s}")));
        }
        Ok(())
    }

    pub fn hierarchy_config(&self) -> HierarchyConfig {
        HierarchyConfig {
            emin: EminConfig {
                omega: self.omega,
                iterations: self.emin_iterations,
                mode: match self.mode {
                    SolverMode::Rsamg => EminMode::Rsamg,
                    _ => EminMode::SpHcurl,
                },
            },
            coarse_size: self.coarse_size,
            max_levels: self.max_levels,
            drop_tol: self.drop_tol,
            ..HierarchyConfig::default()
        }
    }
}

/// Subproblem count for one `rows × cols` size on one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramEntry {
    pub level: usize,
    /// Coarse edges in the row pattern.
    pub rows: usize,
    /// Coarse nodes touched by the constraint.
    pub cols: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub mesh: String,
    pub edges: usize,
    /// Absent for imported systems.
    pub sigma: Option<f64>,
    pub mode: SolverMode,
    pub iterations: usize,
    pub status: SolveStatus,
    pub relres: f64,
    pub oc: f64,
    pub levels: usize,
    pub level_edges: Vec<usize>,
    /// Energy before each minimization step, per coarsening.
    pub energy_history: Vec<Vec<f64>>,
    pub histogram: Vec<HistogramEntry>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub runs: Vec<RunRecord>,
}

/// Uniform entries in `(-1, 1)` from a seeded stream.
pub fn random_rhs(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Fine-level operators for one run.
pub struct SystemInput {
    pub label: String,
    pub sigma: Option<f64>,
    pub a_e: SparseMatrix,
    pub s: SparseMatrix,
    pub a_n: SparseMatrix,
    pub d: SparseMatrix,
}

/// Reads and checks an imported system: consistent dimensions and
/// `max |S D| <= 1e-10 max |S|`.
pub fn load_import(paths: &ImportPaths) -> Result<SystemInput> {
    let need = |p: &Option<PathBuf>, what: &str| {
        p.clone()
            .ok_or_else(|| Error::Config(format!("import needs a path for {what}")))
    };
    let a_e = read_matrix_market(need(&paths.a_e, "a_e")?)?;
    let s = read_matrix_market(need(&paths.s, "s")?)?;
    let a_n = read_matrix_market(need(&paths.a_n, "a_n")?)?;
    let d = read_matrix_market(need(&paths.d, "d")?)?;
    let ne = a_e.nrows();
    let nn = d.ncols();
    let checks = [
        ("a_e", a_e.nrows(), a_e.ncols(), ne, ne),
        ("s", s.nrows(), s.ncols(), ne, ne),
        ("d", d.nrows(), d.ncols(), ne, nn),
        ("a_n", a_n.nrows(), a_n.ncols(), nn, nn),
    ];
    for (name, r, c, er, ec) in checks {
        if (r, c) != (er, ec) {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {r}x{c}, expected {er}x{ec}"
            )));
        }
    }
    let defect = null_space_defect(&s, &d)?;
    if defect > 1e-10 {
        return Err(Error::StructureViolation(format!(
            "imported S and D give max|S D| / max|S| = {defect:e}; refusing to build a hierarchy"
        )));
    }
    Ok(SystemInput {
        label: "import".into(),
        sigma: None,
        a_e,
        s,
        a_n,
        d,
    })
}

fn model_input(cfg: &ExperimentConfig, kind: ElementKind, n: usize, sigma: f64) -> Result<SystemInput> {
    let dim = kind.dim();
    let mesh = build_structured_mesh(dim, kind, &vec![n; dim], cfg.dirichlet)?;
    let sys = DiscretizedSystem::assemble(&mesh, sigma)?;
    let name = match kind {
        ElementKind::Tri => "tri",
        ElementKind::Quad => "quad",
        ElementKind::Tet => "tet",
        ElementKind::Hex => "hex",
    };
    Ok(SystemInput {
        label: format!("{name}{}", mesh.shape_label()),
        sigma: Some(sigma),
        a_e: sys.a_e,
        s: sys.s,
        a_n: sys.a_n,
        d: sys.d,
    })
}

/// Builds the preconditioner for `input` and runs PCG on a seeded random
/// right-hand side.
pub fn run_single(cfg: &ExperimentConfig, input: SystemInput) -> Result<RunRecord> {
    let b = random_rhs(input.a_e.nrows(), cfg.seed);
    let edges = input.a_e.nrows();
    let t0 = Instant::now();
    let (outcome, setup_seconds, oc, level_edges, energy_history, histogram) = match cfg.mode {
        SolverMode::RelaxationOnly => {
            let pre = RelaxationOnly::new(input.a_e.clone(), input.d)?;
            let setup = t0.elapsed().as_secs_f64();
            let out = pcg_solve(&input.a_e, &b, &pre, cfg.rtol, cfg.maxit)?;
            (out, setup, 1.0, vec![edges], Vec::new(), Vec::new())
        }
        SolverMode::Sphcurl | SolverMode::Rsamg => {
            let h = build_hierarchy(
                input.a_e.clone(),
                input.s,
                input.a_n,
                input.d,
                &cfg.hierarchy_config(),
            )?;
            let setup = t0.elapsed().as_secs_f64();
            let mut energy = Vec::new();
            let mut hist = Vec::new();
            for (level, stats) in h.levels.iter().enumerate().filter_map(|(l, lv)| lv.stats.as_ref().map(|s| (l, s))) {
                energy.push(stats.energy_history.clone());
                for (&(rows, cols), &count) in &stats.histogram {
                    hist.push(HistogramEntry { level, rows, cols, count });
                }
            }
            let out = pcg_solve(&input.a_e, &b, &h, cfg.rtol, cfg.maxit)?;
            (out, setup, h.operator_complexity, h.level_edge_counts(), energy, hist)
        }
    };
    let solve_seconds = t0.elapsed().as_secs_f64() - setup_seconds;
    Ok(RunRecord {
        mesh: input.label,
        edges,
        sigma: input.sigma,
        mode: cfg.mode,
        iterations: outcome.iterations,
        status: outcome.status,
        relres: outcome.relative_residual,
        oc,
        levels: level_edges.len(),
        level_edges,
        energy_history,
        histogram,
        setup_seconds,
        solve_seconds,
    })
}

/// One run per (shape, sigma), or a single run for an imported system.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let mut runs = Vec::new();
    match cfg.problem.element() {
        None => runs.push(run_single(cfg, load_import(&cfg.import)?)?),
        Some(kind) => {
            for &n in &cfg.shapes {
                for &sigma in &cfg.sigmas {
                    runs.push(run_single(cfg, model_input(cfg, kind, n, sigma)?)?);
                }
            }
        }
    }
    Ok(RunReport { runs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Csv,
    JsonLines,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "text" => TableFormat::Text,
            "csv" => TableFormat::Csv,
            "jsonl" | "json-lines" => TableFormat::JsonLines,
            _ => return Err(Error::Config(format!("unknown table format {s:?}"))),
        })
    }
}

fn sigma_cell(s: Option<f64>) -> String {
    s.map_or_else(|| "-".into(), |v| format!("{v:e}"))
}

pub const CSV_HEADER: &str = "mesh,edges,sigma,mode,iters,relres,oc,levels";

/// Convergence table as CSV; contains no timings, so equal inputs give equal bytes.
pub fn convergence_csv(report: &RunReport) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in &report.runs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6e},{:.4},{}",
            r.mesh,
            r.edges,
            sigma_cell(r.sigma),
            r.mode.as_str(),
            r.iterations,
            r.relres,
            r.oc,
            r.levels
        );
    }
    out
}

pub fn histogram_csv(report: &RunReport) -> String {
    let mut out = String::from("mesh,sigma,mode,level,rows,cols,count\n");
    for r in &report.runs {
        for h in &r.histogram {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.mesh,
                sigma_cell(r.sigma),
                r.mode.as_str(),
                h.level,
                h.rows,
                h.cols,
                h.count
            );
        }
    }
    out
}

/// Mesh-by-sigma table of iterations and operator complexity, one block per mode.
pub fn convergence_text(report: &RunReport) -> String {
    let mut out = String::new();
    let mut modes: Vec<SolverMode> = Vec::new();
    for r in &report.runs {
        if !modes.contains(&r.mode) {
            modes.push(r.mode);
        }
    }
    for mode in modes {
        let runs: Vec<&RunRecord> = report.runs.iter().filter(|r| r.mode == mode).collect();
        let mut sigmas: Vec<Option<f64>> = Vec::new();
        let mut meshes: Vec<(&str, usize)> = Vec::new();
        for r in &runs {
            if !sigmas.contains(&r.sigma) {
                sigmas.push(r.sigma);
            }
            if !meshes.iter().any(|m| m.0 == r.mesh) {
                meshes.push((&r.mesh, r.edges));
            }
        }
        let _ = writeln!(out, "CG iterations and AMG operator complexity ({})", mode.as_str());
        let mut header = format!("{:<16} {:>10}", "mesh", "#edges");
        for s in &sigmas {
            let _ = write!(header, " {:>10}", format!("s={}", sigma_cell(*s)));
        }
        let _ = writeln!(out, "{header} {:>8}", "o.c.");
        for (mesh, edges) in meshes {
            let mut line = format!("{mesh:<16} {edges:>10}");
            let mut oc = 0.0f64;
            for s in &sigmas {
                match runs.iter().find(|r| r.mesh == mesh && r.sigma == *s) {
                    Some(r) => {
                        oc = oc.max(r.oc);
                        let mark = if r.status == SolveStatus::Converged { "" } else { "*" };
                        let _ = write!(line, " {:>10}", format!("{}{mark}", r.iterations));
                    }
                    None => {
                        let _ = write!(line, " {:>10}", "-");
                    }
                }
            }
            let _ = writeln!(out, "{line} {oc:>8.3}");
        }
        out.push('\n');
    }
    out
}

/// Subproblem size counts per level, one block per run.
pub fn histogram_text(report: &RunReport) -> String {
    let mut out = String::new();
    for r in report.runs.iter().filter(|r| !r.histogram.is_empty()) {
        let _ = writeln!(
            out,
            "Least-squares subproblem sizes: {} sigma={} ({})",
            r.mesh,
            sigma_cell(r.sigma),
            r.mode.as_str()
        );
        let dims: Vec<(usize, usize)> = r
            .histogram
            .iter()
            .map(|h| (h.rows, h.cols))
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut header = format!("{:<6}", "level");
        for (a, b) in &dims {
            let _ = write!(header, " {:>9}", format!("{a}x{b}"));
        }
        let _ = writeln!(out, "{header}");
        let mut by_level: BTreeMap<usize, BTreeMap<(usize, usize), usize>> = BTreeMap::new();
        for h in &r.histogram {
            by_level.entry(h.level).or_default().insert((h.rows, h.cols), h.count);
        }
        for (level, counts) in by_level {
            let mut line = format!("{level:<6}");
            for d in &dims {
                let _ = write!(line, " {:>9}", counts.get(d).copied().unwrap_or(0));
            }
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    out
}

fn json_lines<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(
            &serde_json::to_string(&item).map_err(|e| Error::Config(format!("json: {e}")))?,
        );
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct HistogramLine<'a> {
    mesh: &'a str,
    sigma: Option<f64>,
    mode: SolverMode,
    #[serde(flatten)]
    entry: &'a HistogramEntry,
}

/// Writes the convergence and histogram tables into `dir`; returns the paths.
pub fn emit_tables(report: &RunReport, format: TableFormat, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (ext, conv, hist) = match format {
        TableFormat::Text => ("txt", convergence_text(report), histogram_text(report)),
        TableFormat::Csv => ("csv", convergence_csv(report), histogram_csv(report)),
        TableFormat::JsonLines => (
            "jsonl",
            json_lines(&report.runs)?,
            json_lines(report.runs.iter().flat_map(|r| {
                r.histogram.iter().map(move |entry| HistogramLine {
                    mesh: &r.mesh,
                    sigma: r.sigma,
                    mode: r.mode,
                    entry,
                })
            }))?,
        ),
    };
    let conv_path = dir.join(format!("convergence.{ext}"));
    let hist_path = dir.join(format!("histogram.{ext}"));
    fs::write(&conv_path, conv)?;
    fs::write(&hist_path, hist)?;
    Ok(vec![conv_path, hist_path])
}
