use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use hcurl_amg::discretize::DiscretizedSystem;
use hcurl_amg::experiment::{
    convergence_text, emit_tables, histogram_text, run_experiment, ExperimentConfig, Problem,
    TableFormat,
};
use hcurl_amg::mesh::build_structured_mesh;
use hcurl_amg::mmio::write_matrix_market;
use hcurl_amg::stationarity::validate_ideal_stationarity;

#[derive(Parser)]
#[command(name = "hcurl-amg", version, about = "Structure-preserving AMG for edge-element eddy-current systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve model problems over a grid of mesh sizes and sigma values.
    Solve {
        #[command(flatten)]
        solver: SolverArgs,
        /// model2d_tri, model2d_quad, model3d_tet or model3d_hex.
        #[arg(long)]
        problem: Option<String>,
        /// Nodes per axis; comma-separated for several meshes.
        #[arg(long)]
        shape: Option<String>,
        /// Comma-separated sigma values.
        #[arg(long)]
        sigma: Option<String>,
        /// Eliminate boundary nodes (essential conditions).
        #[arg(long)]
        dirichlet: bool,
    },
    /// Solve a system read from MatrixMarket files.
    Import {
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long = "Ae")]
        a_e: Option<PathBuf>,
        /// Curl-curl part of Ae.
        #[arg(long = "S")]
        s: Option<PathBuf>,
        /// Nodal -Δ + sigma matrix.
        #[arg(long = "An")]
        a_n: Option<PathBuf>,
        /// Discrete gradient, edges by nodes.
        #[arg(long = "D")]
        d: Option<PathBuf>,
    },
    /// Write the operators of one model problem as MatrixMarket files.
    Export {
        #[arg(long, default_value = "model2d_quad")]
        problem: String,
        #[arg(long, default_value_t = 28)]
        shape: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        dirichlet: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the geometric prolongator on nested triangle meshes.
    Stationarity {
        /// Coarse nodes per side.
        #[arg(long, default_value_t = 4)]
        coarse: usize,
        /// Refinement factors, comma-separated.
        #[arg(long, default_value = "2,3")]
        refine: String,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// key = value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sphcurl, rsamg or relaxation_only.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    omega: Option<String>,
    #[arg(long)]
    emin_iterations: Option<String>,
    #[arg(long)]
    rtol: Option<String>,
    #[arg(long)]
    maxit: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    coarse_size: Option<String>,
    #[arg(long)]
    max_levels: Option<String>,
    #[arg(long)]
    drop_tol: Option<String>,
    /// Directory for convergence and histogram tables.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table formats written to --out: text, csv, jsonl (comma-separated).
    #[arg(long, default_value = "text,csv,jsonl")]
    format: String,
}

impl SolverArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)
                .with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("mode", &self.mode),
            ("omega", &self.omega),
            ("emin_iterations", &self.emin_iterations),
            ("rtol", &self.rtol),
            ("maxit", &self.maxit),
            ("seed", &self.seed),
            ("coarse_size", &self.coarse_size),
            ("max_levels", &self.max_levels),
            ("drop_tol", &self.drop_tol),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }

    fn finish(&self, cfg: &ExperimentConfig) -> Result<()> {
        let formats: Vec<TableFormat> = self
            .format
            .split(',')
            .map(|f| f.trim().parse())
            .collect::<Result<_, _>>()?;
        let report = run_experiment(cfg)?;
        print!("{}", convergence_text(&report));
        print!("{}", histogram_text(&report));
        if let Some(dir) = &self.out {
            for format in formats {
                for path in emit_tables(&report, format, dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
        }
        Ok(())
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve {
            solver,
            problem,
            shape,
            sigma,
            dirichlet,
        } => {
            let mut cfg = solver.config()?;
            for (key, value) in [("problem", &problem), ("shape", &shape), ("sigma", &sigma)] {
                if let Some(v) = value {
                    cfg.set(key, v)?;
                }
            }
            cfg.dirichlet |= dirichlet;
            if cfg.problem == Problem::Import {
                anyhow::bail!("use the import subcommand for imported systems");
            }
            solver.finish(&cfg)
        }
        Command::Import {
            solver,
            a_e,
            s,
            a_n,
            d,
        } => {
            let mut cfg = solver.config()?;
            cfg.problem = Problem::Import;
            let paths = &mut cfg.import;
            paths.a_e = a_e.or(paths.a_e.take());
            paths.s = s.or(paths.s.take());
            paths.a_n = a_n.or(paths.a_n.take());
            paths.d = d.or(paths.d.take());
            solver.finish(&cfg)
        }
        Command::Export {
            problem,
            shape,
            sigma,
            dirichlet,
            out,
        } => {
            let mut cfg = ExperimentConfig::default();
            cfg.set("problem", &problem)?;
            let kind = match cfg.problem {
                Problem::Model2dTri => hcurl_amg::mesh::ElementKind::Tri,
                Problem::Model2dQuad => hcurl_amg::mesh::ElementKind::Quad,
                Problem::Model3dTet => hcurl_amg::mesh::ElementKind::Tet,
                Problem::Model3dHex => hcurl_amg::mesh::ElementKind::Hex,
                Problem::Import => anyhow::bail!("export needs a model problem"),
            };
            let dim = kind.dim();
            let mesh = build_structured_mesh(dim, kind, &vec![shape; dim], dirichlet)?;
            let sys = DiscretizedSystem::assemble(&mesh, sigma)?;
            std::fs::create_dir_all(&out)?;
            for (name, m) in [("Ae", &sys.a_e), ("S", &sys.s), ("An", &sys.a_n), ("D", &sys.d)] {
                let path = out.join(format!("{name}.mtx"));
                write_matrix_market(m, &path)?;
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Stationarity { coarse, refine } => {
            println!("coarse refine fine_edges interior_rows feasibility interior_max boundary_max");
            for r in refine.split(',') {
                let r: usize = r.trim().parse().context("refinement factor")?;
                let rep = validate_ideal_stationarity(coarse, r)?;
                println!(
                    "{} {} {} {} {:.3e} {:.3e} {:.3e}",
                    rep.coarse_nodes,
                    rep.refine,
                    rep.n_fine_edges,
                    rep.interior_rows,
                    rep.feasibility_residual,
                    rep.interior_gradient_max,
                    rep.boundary_gradient_max
                );
            }
            Ok(())
        }
    }
}
