//! Convergence sweeps, slope fitting and report output.

use crate::class::{
    check_membership, derive_params, test_function, ClassError, ClassKind, Family, FunctionClassSpec, ProbeGrid, SingularFunction,
};
use crate::mesh1d::{build_mesh1d, Variant1D};
use crate::mesh_ld::{decompose_domain, regime, schedule_ld, PartitionVariant, Regime, SchemeLd};
use crate::spline1d::{spline_of, sup_error};
use crate::spline_ld::{spline_ld_of, sup_error_ld, SplineLD};
use crate::widths::{lower_bound_estimate, LowerBound, LowerBoundScheme};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("N = {n}, stage `{stage}`: {message}")]
    Stage { n: usize, stage: &'static str, message: String },
    #[error("slope fit needs at least 2 points (got {0})")]
    TooFewPoints(usize),
    #[error("error {error} at n = {n} is not positive; rate unmeasurable")]
    NonPositiveError { n: f64, error: f64 },
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn default_l() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// One sweep. JSON files use these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub class: ClassKind,
    pub r: u32,
    pub gamma: f64,
    pub u: u32,
    #[serde(default = "default_l")]
    pub l: usize,
    /// Mesh variant (1D), partition scheme (l > 1), or lower-bound scheme
    /// (widths runs). Chosen from the class when absent.
    #[serde(default)]
    pub variant: Option<String>,
    pub n_grid: Vec<usize>,
    /// Samples per interval (1D) or per dimension (l > 1).
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub continuous: bool,
    /// Divide the test function by its membership constant.
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub jobs: Option<usize>,
    /// Record wall-clock times (makes reports run-dependent).
    #[serde(default)]
    pub timing: bool,
    /// Accepted slope range; derived from the class when absent.
    #[serde(default)]
    pub band: Option<[f64; 2]>,
}

impl RunConfig {
    pub fn spec(&self) -> Result<FunctionClassSpec, HarnessError> {
        Ok(FunctionClassSpec::new(self.class, self.r, self.gamma, self.u, self.l)?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.spec()?;
        if self.n_grid.len() < 2 {
            return Err(HarnessError::Config("the N grid needs at least 2 entries".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config("the N grid must be strictly increasing".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(HarnessError::Config("N must be at least 2".into()));
        }
        if matches!(self.samples, Some(q) if q < 3) {
            return Err(HarnessError::Config("samples must be at least 3".into()));
        }
        if self.jobs == Some(0) {
            return Err(HarnessError::Config("jobs must be positive".into()));
        }
        Ok(())
    }

    fn family(&self) -> Result<Family, HarnessError> {
        match &self.family {
            Some(name) => name.parse().map_err(HarnessError::Config),
            None => Ok(Family::default_for(self.class)),
        }
    }

    /// The (optionally normalized) test function.
    pub fn test_function(&self) -> Result<SingularFunction, HarnessError> {
        let spec = self.spec()?;
        let f = test_function(&spec, self.family()?)?;
        if !self.normalize {
            return Ok(f);
        }
        let report = check_membership(&f, &spec, &ProbeGrid::standard(spec.l))?;
        Ok(f.normalized(&report))
    }

    fn pool(&self) -> Result<rayon::ThreadPool, HarnessError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            builder = builder.num_threads(j);
        }
        builder.build().map_err(|e| HarnessError::Config(e.to_string()))
    }
}

/// Least-squares line through `(ln n, -ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub points_used: usize,
}

/// Fit `-ln error = slope * ln n + intercept`, leaving out the smallest `n`
/// when there are at least 3 points.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::TooFewPoints(points.len()));
    }
    if let Some(&(n, error)) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(HarnessError::NonPositiveError { n, error });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let used = if sorted.len() >= 3 { &sorted[1..] } else { &sorted[..] };
    let xy: Vec<(f64, f64)> = used.iter().map(|&(n, e)| (n.ln(), -e.ln())).collect();
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xy.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    Ok(SlopeFit { slope, intercept, residual, points_used: xy.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(rename = "N")]
    pub n: usize,
    pub n_nodes: usize,
    pub sup_error: f64,
    pub runtime_ms: f64,
    /// Intervals (1D) or cells.
    pub pieces: usize,
    /// Sum of the subdivision counts `M_k`.
    pub subdivisions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub config: RunConfig,
    /// Resolved variant or scheme name.
    pub variant: String,
    pub rows: Vec<Row>,
    pub fit: Option<SlopeFit>,
    /// Exponent of `n` the rate should follow.
    pub predicted: f64,
    /// Power of `ln n` divided out of the error before fitting.
    pub log_power: u32,
    pub band: [f64; 2],
    pub passed: bool,
}

fn stage<E: std::fmt::Display>(n: usize, stage: &'static str) -> impl FnOnce(E) -> HarnessError {
    move |e| HarnessError::Stage { n, stage, message: e.to_string() }
}

fn one_dimensional(
    cfg: &RunConfig,
    spec: &FunctionClassSpec,
    f: &SingularFunction,
    variant: Variant1D,
    n: usize,
) -> Result<Row, HarnessError> {
    let start = Instant::now();
    let mesh = build_mesh1d(spec, n, variant).map_err(stage(n, "mesh"))?;
    let sp = spline_of(f, &mesh).map_err(stage(n, "spline"))?;
    let err = sup_error(&sp, |t| f.eval1(t), cfg.samples.unwrap_or(33)).map_err(stage(n, "error"))?;
    Ok(Row {
        n,
        n_nodes: sp.node_count(),
        sup_error: err,
        runtime_ms: if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        pieces: mesh.len(),
        subdivisions: mesh.schedule.total(),
    })
}

fn multi_dimensional(
    cfg: &RunConfig,
    spec: &FunctionClassSpec,
    f: &SingularFunction,
    scheme: SchemeLd,
    n: usize,
    inspect: &mut (dyn FnMut(&SplineLD) + Send),
) -> Result<Row, HarnessError> {
    let start = Instant::now();
    let v = derive_params(spec)?.v;
    let counts = schedule_ld(spec, n, scheme).map_err(stage(n, "schedule"))?.counts;
    let variant = if cfg.continuous { PartitionVariant::Aligned } else { PartitionVariant::Independent };
    let part = decompose_domain(n, v, spec.l, &counts, variant).map_err(stage(n, "partition"))?;
    let sp = spline_ld_of(f, &part, cfg.continuous).map_err(stage(n, "spline"))?;
    let err = sup_error_ld(&sp, &|t: &[f64]| f.eval(t), cfg.samples.unwrap_or(9)).map_err(stage(n, "error"))?;
    let runtime_ms = if cfg.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    inspect(&sp);
    Ok(Row {
        n,
        n_nodes: sp.node_count,
        sup_error: err,
        runtime_ms,
        pieces: part.len(),
        subdivisions: counts.iter().map(|&m| m as u64).sum(),
    })
}

/// Predicted exponent, log power and default band for a configuration.
fn expectation(spec: &FunctionClassSpec) -> Result<(f64, u32), HarnessError> {
    let p = derive_params(spec)?;
    let s = p.s as f64;
    if spec.l == 1 {
        return Ok((s, 0));
    }
    let l = spec.l as f64;
    Ok(match regime(p.v, spec.l).map_err(|e| HarnessError::Config(e.to_string()))? {
        Regime::Below | Regime::Critical => (s / l, 0),
        Regime::Above => ((s - spec.gamma) / (l - 1.0), spec.u),
    })
}

pub fn run_convergence(cfg: &RunConfig) -> Result<ConvergenceReport, HarnessError> {
    run_convergence_inspect(cfg, |_| {})
}

/// [`run_convergence`], handing every multivariate spline to `inspect` before
/// it is dropped (sweep entries are then processed in order).
pub fn run_convergence_inspect(
    cfg: &RunConfig,
    mut inspect: impl FnMut(&SplineLD) + Send,
) -> Result<ConvergenceReport, HarnessError> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let f = cfg.test_function()?;
    let pool = cfg.pool()?;
    let (variant_name, rows) = if spec.l == 1 {
        let variant = match &cfg.variant {
            Some(name) => name.parse::<Variant1D>().map_err(HarnessError::Config)?,
            None => Variant1D::default_for(&spec),
        };
        let rows: Result<Vec<Row>, HarnessError> =
            pool.install(|| cfg.n_grid.par_iter().map(|&n| one_dimensional(cfg, &spec, &f, variant, n)).collect());
        (variant.name().to_string(), rows?)
    } else {
        let scheme = match &cfg.variant {
            Some(name) => name.parse::<SchemeLd>().map_err(HarnessError::Config)?,
            None => SchemeLd::default_for(&spec).map_err(|e| HarnessError::Config(e.to_string()))?,
        };
        // one sweep entry at a time; cells are processed in parallel inside
        let rows: Result<Vec<Row>, HarnessError> =
            pool.install(|| cfg.n_grid.iter().map(|&n| multi_dimensional(cfg, &spec, &f, scheme, n, &mut inspect)).collect());
        (scheme.name().to_string(), rows?)
    };
    let (predicted, log_power) = expectation(&spec)?;
    let band = cfg.band.unwrap_or([predicted - 0.3, predicted + 0.5]);
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            let n = r.n_nodes as f64;
            (n, r.sup_error / n.ln().powi(log_power as i32))
        })
        .collect();
    let fit = fit_slope(&points).ok();
    let passed = fit.is_some_and(|f| f.slope >= band[0] && f.slope <= band[1]);
    Ok(ConvergenceReport { config: cfg.clone(), variant: variant_name, rows, fit, predicted, log_power, band, passed })
}

/// Bump families over an `N` grid and the fitted decay of `epsilon_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthsReport {
    pub config: RunConfig,
    pub scheme: LowerBoundScheme,
    pub rows: Vec<LowerBound>,
    /// Fit of `-ln epsilon_N` against `ln N`.
    pub fit: Option<SlopeFit>,
    pub predicted: f64,
    pub band: [f64; 2],
    pub constraints_hold: bool,
    pub passed: bool,
}

pub fn run_widths(cfg: &RunConfig) -> Result<WidthsReport, HarnessError> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let scheme = match &cfg.variant {
        Some(name) => name.parse::<LowerBoundScheme>().map_err(HarnessError::Config)?,
        None => LowerBoundScheme::default_for(&spec).map_err(|e| HarnessError::Config(e.to_string()))?,
    };
    let pool = cfg.pool()?;
    let rows: Vec<LowerBound> = pool.install(|| {
        cfg.n_grid.iter().map(|&n| lower_bound_estimate(&spec, n, scheme).map_err(stage(n, "bumps"))).collect::<Result<_, _>>()
    })?;
    let predicted = derive_params(&spec)?.s as f64;
    let band = cfg.band.unwrap_or([predicted - 0.3, predicted + 0.3]);
    let fit = fit_slope(&rows.iter().map(|r| (r.n as f64, r.epsilon)).collect::<Vec<_>>()).ok();
    let constraints_hold = rows.iter().all(|r| r.constraints_hold);
    let passed = constraints_hold && fit.is_some_and(|f| f.slope >= band[0] && f.slope <= band[1]);
    Ok(WidthsReport { config: cfg.clone(), scheme, rows, fit, predicted, band, constraints_hold, passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

pub const CSV_HEADER: &str = "N,n_nodes,sup_error,runtime_ms";

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{:.16e},{:.16e}\n", r.n, r.n_nodes, r.sup_error, r.runtime_ms));
    }
    out
}

pub fn render(report: &ConvergenceReport, format: Format) -> Result<String, HarnessError> {
    Ok(match format {
        Format::Csv => to_csv(&report.rows),
        Format::Json => serde_json::to_string_pretty(report)? + "\n",
    })
}

/// Write the report to `path`.
pub fn emit_report(report: &ConvergenceReport, format: Format, path: &Path) -> Result<(), HarnessError> {
    std::fs::write(path, render(report, format)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config_1d() -> RunConfig {
        RunConfig {
            class: ClassKind::BarQu,
            r: 2,
            gamma: 1.0,
            u: 1,
            l: 1,
            variant: Some("ThmA_u1".into()),
            n_grid: vec![8, 16, 32],
            samples: None,
            family: None,
            continuous: false,
            normalize: true,
            jobs: Some(2),
            timing: false,
            band: None,
        }
    }

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0].iter().map(|&n: &f64| (n, n.powi(-2))).collect();
        let fit = fit_slope(&pts).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-9);
        assert_eq!(fit.points_used, 3);
        // the smallest-n outlier is excluded
        let mut pts: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&n: &f64| (n, n.powi(-3))).collect();
        pts.push((5.0, 1.0));
        assert_abs_diff_eq!(fit_slope(&pts).unwrap().slope, 3.0, epsilon = 1e-9);
        let two = fit_slope(&[(2.0, 0.5), (4.0, 0.1)]).unwrap();
        assert_abs_diff_eq!(two.slope, (0.5f64 / 0.1).ln() / 2f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(fit_slope(&[(2.0, 1.0)]), Err(HarnessError::TooFewPoints(1))));
        assert!(matches!(fit_slope(&[(2.0, 1.0), (4.0, 0.0)]), Err(HarnessError::NonPositiveError { .. })));
    }

    #[test]
    fn csv_layout() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
        let rows = [Row { n: 8, n_nodes: 41, sup_error: 0.1, runtime_ms: 0.0, pieces: 20, subdivisions: 10 }];
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), rows.len() + 1);
        assert_eq!(csv.lines().nth(1).unwrap(), "8,41,1.0000000000000001e-1,0.0000000000000000e0");
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let cfg = RunConfig { n_grid: vec![8, 16], ..config_1d() };
        let a = run_convergence(&cfg).unwrap();
        let b = run_convergence(&RunConfig { jobs: Some(1), ..cfg.clone() }).unwrap();
        assert_eq!(render(&a, Format::Csv).unwrap(), render(&b, Format::Csv).unwrap());
        let json = render(&a, Format::Json).unwrap();
        let back: ConvergenceReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.rows, a.rows);
        assert!(a.rows.windows(2).all(|w| w[0].n < w[1].n));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        emit_report(&a, Format::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), to_csv(&a.rows));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig { n_grid: vec![8], ..config_1d() }.validate().is_err());
        assert!(RunConfig { n_grid: vec![16, 8], ..config_1d() }.validate().is_err());
        assert!(RunConfig { samples: Some(2), ..config_1d() }.validate().is_err());
        let bad_variant = RunConfig { variant: Some("nope".into()), ..config_1d() };
        assert!(matches!(run_convergence(&bad_variant), Err(HarnessError::Config(_))));
        let json = r#"{"class":"barQ_u","r":2,"gamma":1.0,"u":1,"n_grid":[8,16]}"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.l, 1);
        assert!(cfg.normalize);
    }

    #[test]
    fn stage_errors_name_n() {
        // the log-boundary mesh rejects Q_u
        let cfg = RunConfig { class: ClassKind::Qu, r: 1, gamma: 0.5, ..config_1d() };
        match run_convergence(&cfg) {
            Err(HarnessError::Stage { n, stage, .. }) => {
                assert!(cfg.n_grid.contains(&n));
                assert_eq!(stage, "mesh");
            }
            other => panic!("{other:?}"),
        }
    }
}
