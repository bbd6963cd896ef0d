//! File formats: the text mesh format, TOML run configuration, convergence
//! logs, quality reports and method comparison tables.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::delaunay::SphericalTriangulation;
use crate::density::{DensityField, DensityKind};
use crate::error::{Result, ScvtError};
use crate::geometry::{Epsilons, IntegrationScheme, Measure, RuleOrder, SpherePoint, Vec3};
use crate::optimizer::{IterationRecord, Method, StopReason, StoppingCriteria};
use crate::pipeline::{default_workers, RunOutput, RunPlan};
use crate::quality::{QualityReport, SpacingSummary, Summary, HISTOGRAM_BINS};

pub const MESH_MAGIC: &str = "# scvt-mesh v1";

/// Provenance stored in a mesh file. All fields are optional on load.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MeshHeader {
    pub density: Option<String>,
    pub method: Option<String>,
    pub seed: Option<u64>,
}

/// Generators and, optionally, triangles. Coordinates are written in the
/// shortest decimal form that parses back to the same bits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeshFile {
    pub header: MeshHeader,
    pub points: Vec<SpherePoint>,
    pub triangles: Option<Vec<[u32; 3]>>,
}

impl MeshFile {
    pub fn new(points: Vec<SpherePoint>) -> Self {
        MeshFile { points, ..Default::default() }
    }

    pub fn with_triangulation(mut self, tri: &SphericalTriangulation) -> Self {
        self.triangles = Some(tri.triangles.iter().map(|t| t.v).collect());
        self
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(64 * self.points.len());
        s.push_str(MESH_MAGIC);
        s.push('\n');
        if let Some(d) = &self.header.density {
            writeln!(s, "density {d}").unwrap();
        }
        if let Some(m) = &self.header.method {
            writeln!(s, "method {m}").unwrap();
        }
        if let Some(seed) = self.header.seed {
            writeln!(s, "seed {seed}").unwrap();
        }
        writeln!(s, "points {}", self.points.len()).unwrap();
        for p in &self.points {
            writeln!(s, "{:?} {:?} {:?}", p.x(), p.y(), p.z()).unwrap();
        }
        if let Some(tris) = &self.triangles {
            writeln!(s, "triangles {}", tris.len()).unwrap();
            for t in tris {
                writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let err = |line: usize, message: String| ScvtError::Parse { line, message };
        let last_line = text.lines().count();
        match lines.next() {
            Some((_, MESH_MAGIC)) => {}
            Some((n, other)) => return Err(err(n, format!("expected `{MESH_MAGIC}`, found `{other}`"))),
            None => return Err(err(1, "empty mesh file".into())),
        }
        let mut mesh = MeshFile::default();
        let count = loop {
            let Some((n, line)) = lines.next() else {
                return Err(err(last_line + 1, "file ended before the `points` line".into()));
            };
            let (key, value) = line.split_once(' ').ok_or_else(|| err(n, format!("expected `key value`, found `{line}`")))?;
            let value = value.trim();
            match key {
                "density" => mesh.header.density = Some(value.to_string()),
                "method" => mesh.header.method = Some(value.to_string()),
                "seed" => mesh.header.seed = Some(value.parse().map_err(|e| err(n, format!("bad seed: {e}")))?),
                "points" => break value.parse::<usize>().map_err(|e| err(n, format!("bad point count: {e}")))?,
                other => return Err(err(n, format!("unknown header key `{other}`"))),
            }
        };
        mesh.points.reserve(count);
        for i in 0..count {
            let Some((n, line)) = lines.next() else {
                return Err(err(last_line + 1, format!("expected {count} points, file ended after {i}")));
            };
            let c = parse_numbers::<f64, 3>(line).map_err(|m| err(n, m))?;
            let v = Vec3::new(c[0], c[1], c[2]);
            if !((v.norm() - 1.0).abs() < 1e-9) {
                return Err(err(n, format!("point {i} is not on the unit sphere")));
            }
            mesh.points.push(SpherePoint::from_unit(v));
        }
        if let Some((n, line)) = lines.next() {
            let t = line
                .strip_prefix("triangles ")
                .and_then(|c| c.trim().parse::<usize>().ok())
                .ok_or_else(|| err(n, format!("expected `triangles T`, found `{line}`")))?;
            let mut tris = Vec::with_capacity(t);
            for i in 0..t {
                let Some((n, line)) = lines.next() else {
                    return Err(err(last_line + 1, format!("expected {t} triangles, file ended after {i}")));
                };
                let v = parse_numbers::<u32, 3>(line).map_err(|m| err(n, m))?;
                if v.iter().any(|&id| id as usize >= count) {
                    return Err(err(n, format!("triangle {i} refers to a point beyond {count}")));
                }
                tris.push(v);
            }
            mesh.triangles = Some(tris);
        }
        if let Some((n, line)) = lines.next() {
            return Err(err(n, format!("unexpected trailing content `{line}`")));
        }
        Ok(mesh)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| ScvtError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ScvtError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

fn parse_numbers<T: std::str::FromStr, const N: usize>(line: &str) -> std::result::Result<[T; N], String>
where
    T::Err: std::fmt::Display,
{
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != N {
        return Err(format!("expected {N} fields, found {}", fields.len()));
    }
    let mut out = Vec::with_capacity(N);
    for f in fields {
        out.push(f.parse::<T>().map_err(|e| format!("`{f}`: {e}"))?);
    }
    Ok(out.try_into().ok().expect("length checked"))
}

/// Parameters for `density = "customtanh"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomDensity {
    pub center: [f64; 3],
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
}

/// Overrides for the geometric tolerances; unset fields keep their defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsilonOverrides {
    pub projection: Option<f64>,
    pub area: Option<f64>,
    pub centroid: Option<f64>,
}

impl EpsilonOverrides {
    pub fn apply(&self) -> Epsilons {
        let d = Epsilons::default();
        Epsilons {
            projection: self.projection.unwrap_or(d.projection),
            area: self.area.unwrap_or(d.area),
            centroid: self.centroid.unwrap_or(d.centroid),
        }
    }
}

/// TOML run configuration. Every key is optional; unknown keys are errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Final generator count. Default 2562.
    pub points: usize,
    /// `const`, `x3`, `x16`, `x64` or `customtanh`. Default `x3`.
    pub density: String,
    /// Required with `customtanh`.
    pub custom_density: Option<CustomDensity>,
    /// Default `lloyd-plbfgs`.
    pub method: Method,
    /// Default: the `SCVT_WORKERS` environment variable, else the core count.
    pub workers: Option<usize>,
    /// Partition cells per level. Default chosen from the level size.
    pub partitions: Option<usize>,
    /// Coarser sizes optimized first, each `4K − 6` of the previous. Default empty.
    pub ladder: Vec<usize>,
    /// Monte Carlo initialization seed. Default 0.
    pub seed: u64,
    /// `4pt` or `9pt`. Default `4pt`.
    pub quadrature: RuleOrder,
    /// Uniform subdivision of every integration triangle. Default 1.
    pub subdivision: usize,
    /// `spherical` or `chordal`. Default `spherical`.
    pub measure: Measure,
    pub criteria: StoppingCriteria,
    /// Movement tolerance for the ladder levels. Default: same as the final level.
    pub intermediate_movement: Option<f64>,
    pub epsilons: EpsilonOverrides,
    /// Output directory. Default `scvt-out`.
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            points: 2562,
            density: "x3".into(),
            custom_density: None,
            method: Method::LloydPLbfgs,
            workers: None,
            partitions: None,
            ladder: Vec::new(),
            seed: 0,
            quadrature: RuleOrder::FourPoint,
            subdivision: 1,
            measure: Measure::Spherical,
            criteria: StoppingCriteria::default(),
            intermediate_movement: None,
            epsilons: EpsilonOverrides::default(),
            output: PathBuf::from("scvt-out"),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
            ScvtError::Parse { line, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| ScvtError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn density_field(&self) -> Result<DensityField> {
        let kind: DensityKind = self.density.parse()?;
        let field = match (kind, self.custom_density) {
            (DensityKind::CustomTanh, Some(c)) => {
                let [x, y, z] = c.center;
                if !(x * x + y * y + z * z > 0.0) {
                    return Err(ScvtError::Config("custom density center must be nonzero".into()));
                }
                DensityField::custom_tanh(SpherePoint::new(x, y, z), c.beta, c.alpha, c.gamma)
            }
            (DensityKind::CustomTanh, None) => {
                return Err(ScvtError::Config("density `customtanh` needs a [custom_density] table".into()))
            }
            (kind, _) => DensityField::preset(kind),
        };
        field.validate()?;
        Ok(field)
    }

    pub fn to_plan(&self) -> Result<RunPlan> {
        let mut plan = RunPlan::new(self.points, self.density_field()?, self.method);
        plan.workers = self.workers.unwrap_or_else(default_workers);
        plan.partitions = self.partitions;
        plan.ladder = self.ladder.clone();
        plan.seed = self.seed;
        plan.criteria = self.criteria;
        plan.intermediate_movement = self.intermediate_movement;
        if self.subdivision == 0 {
            return Err(ScvtError::Config("subdivision must be at least 1".into()));
        }
        plan.scheme = IntegrationScheme::new(self.quadrature).with_measure(self.measure).with_subdivision(self.subdivision);
        plan.eps = self.epsilons.apply();
        plan.validate()?;
        Ok(plan)
    }

    /// Header recorded in mesh files written for this configuration.
    pub fn mesh_header(&self) -> MeshHeader {
        MeshHeader { density: Some(self.density.to_ascii_lowercase()), method: Some(self.method.to_string()), seed: Some(self.seed) }
    }
}

fn csv_error(e: csv::Error) -> ScvtError {
    ScvtError::Io(e.to_string())
}

/// One row per iteration (the starting configuration is not a row).
/// Lloyd iterations count one energy evaluation each.
pub fn write_iterations<W: Write>(w: W, records: &[IterationRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["n", "F", "grad_norm", "step", "fevals", "time_ms"]).map_err(csv_error)?;
    for r in records.iter().skip(1) {
        out.write_record([
            r.n.to_string(),
            format!("{:e}", r.energy),
            format!("{:e}", r.grad_norm),
            format!("{:e}", r.step),
            r.evaluations.unwrap_or(1).to_string(),
            format!("{:.3}", 1e3 * r.time),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-triangle qualities: `index,v0,v1,v2,tri_q`.
pub fn write_triangle_quality<W: Write>(w: W, tri: &SphericalTriangulation, report: &QualityReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "v0", "v1", "v2", "tri_q"]).map_err(csv_error)?;
    for (i, (t, q)) in tri.triangles.iter().zip(&report.tri_q).enumerate() {
        out.write_record([i.to_string(), t.v[0].to_string(), t.v[1].to_string(), t.v[2].to_string(), format!("{q:?}")])
            .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// Per-cell qualities: `index,cell_q,local_spacing`.
pub fn write_cell_quality<W: Write>(w: W, report: &QualityReport) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["index", "cell_q", "local_spacing"]).map_err(csv_error)?;
    for (i, (q, s)) in report.cell_q.iter().zip(&report.local_spacing).enumerate() {
        out.write_record([i.to_string(), format!("{q:?}"), format!("{s:?}")]).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

/// The scalar part of a quality report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualitySummary {
    pub generators: usize,
    pub triangles: usize,
    pub tri_q: Summary,
    pub cell_q: Summary,
    pub tri_histogram: [usize; HISTOGRAM_BINS],
    pub cell_histogram: [usize; HISTOGRAM_BINS],
    pub spacing: SpacingSummary,
}

impl QualitySummary {
    pub fn of(report: &QualityReport) -> Self {
        QualitySummary {
            generators: report.cell_q.len(),
            triangles: report.tri_q.len(),
            tri_q: report.tri_summary,
            cell_q: report.cell_summary,
            tri_histogram: report.tri_histogram,
            cell_histogram: report.cell_histogram,
            spacing: report.spacing,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Final state of one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub evaluations: usize,
    pub seconds: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub stop: StopReason,
}

impl RunSummary {
    /// Figures of the final level; time covers the whole run.
    pub fn of(output: &RunOutput) -> Self {
        let last = &output.levels.last().expect("a run has at least one level").result;
        RunSummary {
            iterations: last.iterations(),
            evaluations: last.evaluations,
            seconds: output.seconds,
            energy: last.report.energy,
            grad_norm: last.report.grad_norm,
            stop: last.stop,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: Method,
    /// The failure message when the run did not complete.
    pub outcome: std::result::Result<RunSummary, String>,
}

const TABLE_COLUMNS: [&str; 6] = ["method", "iterations", "F-evals", "time (s)", "final F", "final |grad F|"];

fn row_fields(row: &ComparisonRow) -> [String; 6] {
    match &row.outcome {
        Ok(s) => [
            row.method.to_string(),
            s.iterations.to_string(),
            s.evaluations.to_string(),
            format!("{:.2}", s.seconds),
            format!("{:.6e}", s.energy),
            format!("{:.4e}", s.grad_norm),
        ],
        Err(_) => [row.method.to_string(), "FAILED".into(), "-".into(), "-".into(), "-".into(), "-".into()],
    }
}

/// Aligned text table, failures listed underneath.
pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let cells: Vec<[String; 6]> = rows.iter().map(row_fields).collect();
    let widths: Vec<usize> =
        (0..6).map(|c| cells.iter().map(|r| r[c].len()).chain([TABLE_COLUMNS[c].len()]).max().unwrap_or(0)).collect();
    let mut s = String::new();
    let line = |s: &mut String, fields: &[&str]| {
        let parts: Vec<String> = fields
            .iter()
            .enumerate()
            .map(|(c, f)| if c == 0 { format!("{f:<w$}", w = widths[c]) } else { format!("{f:>w$}", w = widths[c]) })
            .collect();
        s.push_str(parts.join("  ").trim_end());
        s.push('\n');
    };
    line(&mut s, &TABLE_COLUMNS);
    for r in &cells {
        line(&mut s, &r.iter().map(String::as_str).collect::<Vec<_>>());
    }
    for row in rows {
        if let Err(msg) = &row.outcome {
            writeln!(s, "{}: {msg}", row.method).unwrap();
        }
    }
    s
}

pub fn write_comparison<W: Write>(w: W, rows: &[ComparisonRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "iterations", "fevals", "seconds", "F", "grad_norm", "stop", "error"]).map_err(csv_error)?;
    for row in rows {
        let record = match &row.outcome {
            Ok(s) => [
                row.method.to_string(),
                s.iterations.to_string(),
                s.evaluations.to_string(),
                format!("{:.3}", s.seconds),
                format!("{:e}", s.energy),
                format!("{:e}", s.grad_norm),
                serde_json::to_value(s.stop).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                String::new(),
            ],
            Err(msg) => [row.method.to_string(), String::new(), String::new(), String::new(), String::new(), String::new(), "failed".into(), msg.clone()],
        };
        out.write_record(record).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}
