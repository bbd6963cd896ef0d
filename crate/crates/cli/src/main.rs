//! `scvt`: generate, compare and inspect spherical CVT meshes.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use scvt::delaunay::global_delaunay;
use scvt::density::{sample_by_density, DensityField, DensityKind};
use scvt::geometry::RuleOrder;
use scvt::io::{
    format_comparison, write_cell_quality, write_comparison, write_iterations, write_triangle_quality, ComparisonRow,
    MeshFile, QualitySummary, RunConfig, RunSummary,
};
use scvt::optimizer::Method;
use scvt::partition::{assign_points, bootstrap_partition_cvt};
use scvt::pipeline::{run, RunOutput, WORKERS_ENV};
use scvt::quality;
use scvt::{Epsilons, ScvtError};

#[derive(Parser)]
#[command(name = "scvt", version, about = "Spherical centroidal Voronoi tessellation meshes")]
struct Cli {
    /// Log progress (repeat for more detail). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a mesh and write it with its triangulation, logs and quality report.
    Generate(RunArgs),
    /// Run several methods from the same initialization and tabulate them.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated methods, at least two.
        #[arg(long, value_delimiter = ',', default_value = "lloyd,lbfgs,lloyd-plbfgs")]
        methods: Vec<Method>,
    },
    /// Quality report of a saved mesh.
    Quality {
        mesh: PathBuf,
        /// Density for the spacing prediction; defaults to the mesh header's.
        #[arg(long)]
        density: Option<DensityKind>,
        /// Output directory; defaults to the mesh file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the coarse partition used by the parallel evaluation and report its balance.
    PartitionInfo {
        /// Partition cells.
        #[arg(long, default_value_t = 12)]
        partitions: usize,
        #[arg(long, default_value = "x3")]
        density: DensityKind,
        /// Sample size used to measure the load balance.
        #[arg(long, default_value_t = 2562)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Quadrature {
    #[value(name = "4pt")]
    Four,
    #[value(name = "9pt")]
    Nine,
}

/// Run settings: a TOML file, then command-line overrides.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    density: Option<DensityKind>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    quadrature: Option<Quadrature>,
    /// Comma-separated coarser sizes, each bisecting into the next.
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<usize>>,
    #[arg(long)]
    partitions: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(d) = self.density {
            c.density = d.name().into();
        }
        if let Some(k) = self.points {
            c.points = k;
        }
        if let Some(m) = self.method {
            c.method = m;
        }
        if let Some(w) = self.workers {
            c.workers = Some(w);
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(n) = self.max_iters {
            c.criteria.max_iterations = n;
        }
        if let Some(q) = self.quadrature {
            c.quadrature = match q {
                Quadrature::Four => RuleOrder::FourPoint,
                Quadrature::Nine => RuleOrder::NinePoint,
            };
        }
        if let Some(l) = &self.ladder {
            c.ladder = l.clone();
        }
        if let Some(p) = self.partitions {
            c.partitions = Some(p);
        }
        if let Some(o) = &self.out {
            c.output = o.clone();
        }
        Ok(c)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_quality(dir: &Path, points: &[scvt::SpherePoint], tri: &scvt::delaunay::SphericalTriangulation, density: &DensityField) -> Result<QualitySummary> {
    let report = quality::report(points, tri, density)?;
    write_triangle_quality(create(&dir.join("quality_triangles.csv"))?, tri, &report)?;
    write_cell_quality(create(&dir.join("quality_cells.csv"))?, &report)?;
    let summary = QualitySummary::of(&report);
    fs::write(dir.join("quality.json"), summary.to_json())?;
    Ok(summary)
}

fn print_quality(s: &QualitySummary) {
    println!(
        "triQ min {:.4} mean {:.4} max {:.4}; cellQ min {:.4} mean {:.4} max {:.4}",
        s.tri_q.min, s.tri_q.mean, s.tri_q.max, s.cell_q.min, s.cell_q.mean, s.cell_q.max
    );
    println!("spacing ratio {:.3} (density predicts {:.3})", s.spacing.ratio, s.spacing.predicted);
}

fn generate(args: &RunArgs) -> Result<()> {
    let config = args.config()?;
    let plan = config.to_plan()?;
    let out: RunOutput = run(&plan, None)?;
    let dir = &config.output;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut mesh = MeshFile::new(out.points.clone());
    mesh.header = config.mesh_header();
    mesh.save(&dir.join("mesh.txt"))?;
    mesh.with_triangulation(&out.triangulation).save(&dir.join("triangulation.txt"))?;
    for (i, level) in out.levels.iter().enumerate() {
        let path = dir.join(format!("convergence_{i}_{}.csv", level.points_in));
        write_iterations(create(&path)?, &level.result.records)?;
    }
    fs::write(dir.join("config.toml"), config.to_toml())?;
    let q = write_quality(dir, &out.points, &out.triangulation, &plan.density)?;
    let s = RunSummary::of(&out);
    println!("generators {}  method {}  stop {:?}", out.points.len(), plan.method, s.stop);
    println!(
        "final F {:e}  |grad F| {:e}  iterations {}  F-evals {}  time {:.2} s",
        s.energy, s.grad_norm, s.iterations, s.evaluations, s.seconds
    );
    print_quality(&q);
    println!("wrote {}", dir.display());
    Ok(())
}

fn compare(args: &RunArgs, methods: &[Method]) -> Result<bool> {
    if methods.len() < 2 {
        return Err(ScvtError::Config("compare needs at least two methods".into()).into());
    }
    let config = args.config()?;
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let mut c = config.clone();
        c.method = method;
        let plan = c.to_plan()?;
        let outcome = match run(&plan, None) {
            Ok(out) => Ok(RunSummary::of(&out)),
            Err(e) if e.is_numerical() => {
                log::warn!("{method} failed: {e}");
                Err(e.to_string())
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(ComparisonRow { method, outcome });
    }
    print!("{}", format_comparison(&rows));
    fs::create_dir_all(&config.output).with_context(|| format!("creating {}", config.output.display()))?;
    write_comparison(create(&config.output.join("comparison.csv"))?, &rows)?;
    Ok(rows.iter().any(|r| r.outcome.is_ok()))
}

fn quality_command(mesh_path: &Path, density: Option<DensityKind>, out: Option<&Path>) -> Result<()> {
    let mesh = MeshFile::load(mesh_path).with_context(|| format!("reading {}", mesh_path.display()))?;
    let kind = match (density, &mesh.header.density) {
        (Some(d), _) => d,
        (None, Some(name)) => name.parse()?,
        (None, None) => DensityKind::Constant,
    };
    let tri = global_delaunay(&mesh.points, &Epsilons::default())?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| mesh_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    fs::create_dir_all(&dir)?;
    let s = write_quality(&dir, &mesh.points, &tri, &DensityField::preset(kind))?;
    println!("generators {}  triangles {}", s.generators, s.triangles);
    print_quality(&s);
    println!("triQ histogram {:?}", s.tri_histogram);
    println!("cellQ histogram {:?}", s.cell_histogram);
    Ok(())
}

fn partition_info(p: usize, kind: DensityKind, k: usize, seed: u64) -> Result<()> {
    if p < 2 {
        bail!(ScvtError::Config("at least two partition cells are needed".into()));
    }
    let density = DensityField::preset(kind);
    let cov = bootstrap_partition_cvt(p, &density, seed)?;
    let points = sample_by_density(&density, k, seed.wrapping_add(1));
    let counts = assign_points(&points, &cov).owned_counts(p);
    println!("cell  lat(deg)  lon(deg)  neighbors  owned");
    for (l, c) in cov.centers.iter().enumerate() {
        println!(
            "{l:>4}  {:>8.2}  {:>8.2}  {:>9}  {:>5}",
            c.latitude().to_degrees(),
            c.longitude().to_degrees(),
            cov.neighbors[l].len(),
            counts[l]
        );
    }
    let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
    println!("{k} points over {p} cells: owned min {lo}, max {hi}, max/mean {:.2}", *hi as f64 * p as f64 / k as f64);
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ScvtError>() {
        Some(e) if e.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = ["warn", "info", "debug"][usize::from(cli.verbose.min(2))];
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Generate(args) => generate(args),
        Command::Compare { run, methods } => match compare(run, methods) {
            Ok(true) => Ok(()),
            Ok(false) => {
                eprintln!("error: every method failed");
                return ExitCode::from(2);
            }
            Err(e) => Err(e),
        },
        Command::Quality { mesh, density, out } => quality_command(mesh, *density, out.as_deref()),
        Command::PartitionInfo { partitions, density, points, seed } => partition_info(*partitions, *density, *points, *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
