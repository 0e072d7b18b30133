//! `bench compression|precond|reconstruct --config <file>`

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualbasis::bench::{
    emit, emit_dat, reconstruct_implicit_curve, run_compression_study, run_preconditioner_study, setup_study,
    Check, CompressionMethod, ExperimentConfig, ExperimentRecord, PreconditionerKind, ThresholdMode,
};
use dualbasis::lagrange::{localized_lagrange, Footprints};
use dualbasis::linalg::matrix_market::write_matrix_market;
use dualbasis::pointset::{build_cluster_tree, default_probe_resolution, geometry_summary};
use dualbasis::samplets::{compress_kernel_matrix, moment_count, SampletTransform, Threshold};
use dualbasis::{Error, Result};

#[derive(Parser)]
#[command(name = "bench", about = "Dual-basis experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compression rate versus spectral error of localized or samplet inverses.
    Compression(Overrides),
    /// CG iterations with symmetric footprint preconditioners.
    Precond(Overrides),
    /// Signed-distance fit of a 2D curve and its zero levelset.
    Reconstruct(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML file of `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single κ (replaces the sweep; sets the reconstruction footprint).
    #[arg(long)]
    kappa: Option<f64>,
    /// Comma-separated preconditioners: none, sqrt, cholesky, lagrange-gmres.
    #[arg(long, value_delimiter = ',')]
    precond: Option<Vec<String>>,
    /// Vanishing moments q + 1.
    #[arg(long)]
    moments: Option<usize>,
    /// Single samplet threshold (replaces the sweep).
    #[arg(long)]
    threshold: Option<f64>,
    /// Interpret thresholds relative to the Frobenius norm.
    #[arg(long)]
    relative: bool,
    /// Kernel as `family:nu:lengthscale`.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Whitespace-separated table for plotting.
    #[arg(long)]
    dat: Option<PathBuf>,
    /// Directory for MatrixMarket matrices, samplet index maps and grids.
    #[arg(long)]
    export_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(k) = self.kappa {
            cfg.sweep = vec![k];
            cfg.kappa = k;
        }
        if let Some(t) = self.threshold {
            cfg.sweep = vec![t];
        }
        if self.relative {
            cfg.threshold_mode = ThresholdMode::Relative;
        }
        if let Some(list) = &self.precond {
            cfg.preconditioners = list.iter().map(|s| PreconditionerKind::parse(s)).collect::<Result<_>>()?;
        }
        if let Some(m) = &self.method {
            cfg.method = match m.as_str() {
                "footprint" => CompressionMethod::Footprint,
                "cutoff" => CompressionMethod::Cutoff,
                "samplet" => CompressionMethod::Samplet,
                other => return Err(Error::InvalidInput(format!("unknown method `{other}`"))),
            };
        }
        cfg.moments = self.moments.unwrap_or(cfg.moments);
        cfg.kernel = self.kernel.clone().unwrap_or(cfg.kernel);
        cfg.n = self.n.unwrap_or(cfg.n);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.output = self.output.clone().or(cfg.output);
        cfg.dat = self.dat.clone().or(cfg.dat);
        cfg.export_dir = self.export_dir.clone().or(cfg.export_dir);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_records(records: &[ExperimentRecord]) {
    println!("{:<15} {:>7} {:>5} {:>10} {:>12} {:>12} {:>6} {:>10}", "method", "N", "nu", "param", "rate", "error", "its", "solve_ms");
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4e}"));
    for r in records {
        println!(
            "{:<15} {:>7} {:>5} {:>10} {:>12} {:>12} {:>6} {:>10.1}{}",
            r.method,
            r.n,
            r.nu,
            r.param,
            opt(r.compression_rate),
            opt(r.spectral_error),
            r.iterations.map_or_else(|| "-".into(), |i| i.to_string()),
            r.solve_ms,
            r.failure.as_ref().map_or_else(String::new, |f| format!("  FAILED: {f}")),
        );
    }
}

fn print_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn write_outputs(cfg: &ExperimentConfig, records: &[ExperimentRecord]) -> Result<()> {
    if let Some(p) = &cfg.output {
        emit(records, p)?;
    }
    if let Some(p) = &cfg.dat {
        emit_dat(records, p)?;
    }
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// MatrixMarket files of the compressed operators, plus the samplet index map.
fn export_compression(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let s = setup_study(cfg)?;
    match cfg.method {
        CompressionMethod::Samplet => {
            let q = cfg.moments - 1;
            let tree = build_cluster_tree(&s.sites, cfg.leaf_capacity.unwrap_or(2 * moment_count(q, cfg.dim)))?;
            let t = SampletTransform::build(&tree, &s.sites, q)?;
            t.write_index_csv(create(dir, "samplet_index.csv")?)?;
            for (k, &v) in cfg.sweep.iter().enumerate() {
                let th = match cfg.threshold_mode {
                    ThresholdMode::Absolute => Threshold::Absolute(v),
                    ThresholdMode::Relative => Threshold::RelativeFrobenius(v),
                };
                let c = compress_kernel_matrix(&t, &s.system, th)?;
                write_matrix_market(&c.matrix, create(dir, &format!("samplet_{k}.mtx"))?)?;
            }
        }
        CompressionMethod::Footprint | CompressionMethod::Cutoff => {
            let res = cfg.probe_resolution.unwrap_or_else(|| default_probe_resolution(cfg.dim, cfg.n));
            let h = geometry_summary(&s.sites, res)?.fill_distance_est;
            for (k, &kappa) in cfg.sweep.iter().enumerate() {
                let b = localized_lagrange(&s.system, &Footprints::from_kappa(&s.sites, h, kappa)?)?;
                write_matrix_market(&b.coeffs, create(dir, &format!("footprint_{k}.mtx"))?)?;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Compression(o) => {
            let cfg = o.apply()?;
            let out = run_compression_study(&cfg)?;
            print_records(&out.records);
            write_outputs(&cfg, &out.records)?;
            if let Some(dir) = &cfg.export_dir {
                export_compression(&cfg, dir)?;
            }
            Ok(print_checks(&out.checks))
        }
        Command::Precond(o) => {
            let cfg = o.apply()?;
            let out = run_preconditioner_study(&cfg)?;
            print_records(&out.records);
            write_outputs(&cfg, &out.records)?;
            Ok(print_checks(&out.checks))
        }
        Command::Reconstruct(o) => {
            let cfg = o.apply()?;
            let rec = reconstruct_implicit_curve(&cfg)?;
            print_records(std::slice::from_ref(&rec.record));
            println!("levelset segments {}, max deviation {:.3e}, grid spacing {:.3e}", rec.segments.len(), rec.max_deviation, rec.spacing);
            write_outputs(&cfg, std::slice::from_ref(&rec.record))?;
            if let Some(dir) = &cfg.export_dir {
                fs::create_dir_all(dir)?;
                rec.write_grid_csv(create(dir, "grid.csv")?)?;
                rec.write_levelset_csv(create(dir, "levelset.csv")?)?;
            }
            Ok(print_checks(&rec.checks))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
