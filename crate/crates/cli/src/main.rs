use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use singspline::harness::{render, run_convergence, run_widths, Format, RunConfig, WidthsReport};
use singspline::mesh1d::{build_mesh1d, Variant1D};
use singspline::mesh_ld::{decompose_domain, schedule_ld, Check, PartitionVariant, SchemeLd};
use singspline::{check_membership, derive_params, test_function, ClassKind, Family, ProbeGrid};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "singspline", version, about = "Graded-mesh splines for functions with boundary singularities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep N, measure sup errors and fit the convergence rate.
    Converge(Sweep),
    /// Build lower-bound bump families and fit the decay of epsilon_N.
    Widths(Sweep),
    /// Estimate the membership constant of the built-in test function.
    CheckMembership(Sweep),
    /// Print the mesh or partition for one N and run its geometric checks.
    DumpPartition {
        #[command(flatten)]
        sweep: Sweep,
        /// Number of layers; defaults to the first entry of the N grid.
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Args)]
struct Sweep {
    /// JSON run configuration; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Q_r, Q_rgamma, barQ_u or Q_u.
    #[arg(long)]
    class: Option<ClassKind>,
    #[arg(long)]
    r: Option<u32>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    u: Option<u32>,
    #[arg(long)]
    l: Option<usize>,
    /// 1D mesh variant, partition scheme, or lower-bound scheme.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    samples: Option<usize>,
    /// power, log-power or frac-log-power.
    #[arg(long)]
    family: Option<String>,
    /// Continuous (vertex-aligned) multivariate spline.
    #[arg(long)]
    continuous: bool,
    /// Use the raw test function instead of dividing by its membership constant.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    jobs: Option<usize>,
    /// Record wall-clock times in runtime_ms.
    #[arg(long)]
    timing: bool,
    /// Accepted slope range as LO,HI.
    #[arg(long, value_delimiter = ',')]
    band: Option<Vec<f64>>,
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Sweep {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig {
                class: self.class.context("--class is required without --config")?,
                r: self.r.context("--r is required without --config")?,
                gamma: self.gamma.context("--gamma is required without --config")?,
                u: self.u.unwrap_or(1),
                l: 1,
                variant: None,
                n_grid: Vec::new(),
                samples: None,
                family: None,
                continuous: false,
                normalize: true,
                jobs: None,
                timing: false,
                band: None,
            },
        };
        if let Some(v) = self.class {
            cfg.class = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.u {
            cfg.u = v;
        }
        if let Some(v) = self.l {
            cfg.l = v;
        }
        if self.variant.is_some() {
            cfg.variant.clone_from(&self.variant);
        }
        if let Some(v) = &self.n_grid {
            cfg.n_grid.clone_from(v);
        }
        if self.samples.is_some() {
            cfg.samples = self.samples;
        }
        if self.family.is_some() {
            cfg.family.clone_from(&self.family);
        }
        cfg.continuous |= self.continuous;
        if self.no_normalize {
            cfg.normalize = false;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        cfg.timing |= self.timing;
        if let Some(b) = &self.band {
            match b[..] {
                [lo, hi] if lo <= hi => cfg.band = Some([lo, hi]),
                _ => bail!("--band takes LO,HI with LO <= HI"),
            }
        }
        Ok(cfg)
    }

    fn emit(&self, text: &str) -> Result<()> {
        write_out(self.out.as_deref(), text)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn verdict(passed: bool) -> &'static str {
    if passed {
        "PASS"
    } else {
        "FAIL"
    }
}

fn converge(sweep: &Sweep) -> Result<bool> {
    let cfg = sweep.run_config()?;
    let report = run_convergence(&cfg)?;
    sweep.emit(&render(&report, sweep.format)?)?;
    match report.fit {
        Some(fit) => eprintln!(
            "{}: slope {:.4} (predicted {:.4}, band [{}, {}]) over {} points",
            verdict(report.passed),
            fit.slope,
            report.predicted,
            report.band[0],
            report.band[1],
            fit.points_used
        ),
        None => eprintln!("FAIL: rate unmeasurable (an error was zero)"),
    }
    Ok(report.passed)
}

fn widths_csv(report: &WidthsReport) -> String {
    let mut out = String::from("N,bumps,epsilon,derivative_ratio,constraints_hold\n");
    for r in &report.rows {
        out.push_str(&format!("{},{},{:.16e},{:.16e},{}\n", r.n, r.bumps, r.epsilon, r.derivative_ratio, r.constraints_hold));
    }
    out
}

fn widths(sweep: &Sweep) -> Result<bool> {
    let cfg = sweep.run_config()?;
    let report = run_widths(&cfg)?;
    let text = match sweep.format {
        Format::Csv => widths_csv(&report),
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
    };
    sweep.emit(&text)?;
    let slope = report.fit.map_or(f64::NAN, |f| f.slope);
    eprintln!(
        "{}: {} epsilon_N slope {slope:.4} (predicted {:.4}, band [{}, {}]), derivative constraints {}",
        verdict(report.passed),
        report.scheme,
        report.predicted,
        report.band[0],
        report.band[1],
        if report.constraints_hold { "hold" } else { "violated" }
    );
    Ok(report.passed)
}

fn membership(sweep: &Sweep) -> Result<bool> {
    let cfg = sweep.run_config()?;
    let spec = cfg.spec()?;
    let family = match &cfg.family {
        Some(name) => name.parse::<Family>().map_err(anyhow::Error::msg)?,
        None => Family::default_for(spec.kind),
    };
    let f = test_function(&spec, family)?;
    let report = check_membership(&f, &spec, &ProbeGrid::standard(spec.l))?;
    let text = match sweep.format {
        Format::Csv => {
            let mut out = String::from("order,worst_ratio\n");
            for (k, ratio) in report.per_order.iter().enumerate() {
                out.push_str(&format!("{k},{ratio:.16e}\n"));
            }
            out
        }
        Format::Json => serde_json::to_string_pretty(&report)? + "\n",
    };
    sweep.emit(&text)?;
    let ok = report.epsilon_star.is_finite() && report.epsilon_star > 0.0;
    eprintln!("{}: eps* = {:.6e} on {}", verdict(ok), report.epsilon_star, report.grid);
    if !report.flagged_orders.is_empty() {
        eprintln!("note: orders {:?} have a non-positive distance exponent", report.flagged_orders);
    }
    Ok(ok)
}

fn dump_partition(sweep: &Sweep, n: Option<usize>) -> Result<bool> {
    let cfg = sweep.run_config()?;
    let spec = cfg.spec()?;
    let n = match n.or_else(|| cfg.n_grid.first().copied()) {
        Some(n) => n,
        None => bail!("give --n or --n-grid"),
    };
    if spec.l == 1 {
        let variant = match &cfg.variant {
            Some(name) => name.parse::<Variant1D>().map_err(anyhow::Error::msg)?,
            None => Variant1D::default_for(&spec),
        };
        let mesh = build_mesh1d(&spec, n, variant)?;
        let text = match sweep.format {
            Format::Csv => {
                let mut out = String::from("a,b,side,layer,sub\n");
                for i in &mesh.intervals {
                    out.push_str(&format!("{:.16e},{:.16e},{:?},{},{}\n", i.a, i.b, i.side, i.layer, i.sub));
                }
                out
            }
            Format::Json => serde_json::to_string_pretty(&mesh)? + "\n",
        };
        sweep.emit(&text)?;
        for w in &mesh.schedule.warnings {
            eprintln!("warning: {w}");
        }
        eprintln!("PASS: {} intervals, {} variant, N = {n}", mesh.len(), variant);
        return Ok(true);
    }
    let scheme = match &cfg.variant {
        Some(name) => name.parse::<SchemeLd>().map_err(anyhow::Error::msg)?,
        None => SchemeLd::default_for(&spec)?,
    };
    let v = derive_params(&spec)?.v;
    let schedule = schedule_ld(&spec, n, scheme)?;
    let variant = if cfg.continuous { PartitionVariant::Aligned } else { PartitionVariant::Independent };
    let part = decompose_domain(n, v, spec.l, &schedule.counts, variant)?;
    let text = match sweep.format {
        Format::Csv => part.dump(),
        Format::Json => serde_json::to_string_pretty(&part)? + "\n",
    };
    sweep.emit(&text)?;
    let mut checks: Vec<(&str, Check)> = vec![
        ("tiling", part.check_tiling()),
        ("edge window", part.check_edge_window()),
        ("vertex nesting", part.check_vertex_nesting()),
    ];
    if cfg.continuous {
        checks.push(("conformity", part.check_conformity()));
    }
    let mut all = true;
    for (name, check) in &checks {
        eprintln!("{} {name}: {}", verdict(check.passed), check.detail);
        all &= check.passed;
    }
    eprintln!("{} cells, {scheme} scheme, {variant} partition, N = {n}, v = {v:.6}", part.len());
    Ok(all)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Converge(s) => converge(s),
        Command::Widths(s) => widths(s),
        Command::CheckMembership(s) => membership(s),
        Command::DumpPartition { sweep, n } => dump_partition(sweep, *n),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
