//! Command implementations for the `slip` binary.
//!
//! Every command renders its whole output in memory and the caller writes it
//! once. CSV output starts with `#` comment lines that echo the canonical
//! command (without `--out`) and the resolved configuration, so re-running
//! the echoed command reproduces the file byte for byte.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use slip_core::asymptotics::{omega_tilde, Theta0Method};
use slip_core::bvp::{k_star_approx, solve_stiffness, stance_sweep, ShootingConfig, SweepRow};
use slip_core::integrator::{integrate, IntegratorConfig};
use slip_core::model::{energy, slip_dynamics, ModelParams, TimeScale, Touchdown, Trajectory};
use slip_core::verify::{
    fast_scale_error, k_ratio_study, slow_scale_error, t_star_order, ConvergenceReport,
    FastInterval, KRatioRow, VerifyConfig,
};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

impl From<slip_core::Error> for CliError {
    fn from(e: slip_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Grid given as a single value or `lo:hi:n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("bad number {t:?}: {e}"))
        };
        match parts.as_slice() {
            [one] => {
                let v = num(one)?;
                Ok(Range { lo: v, hi: v, n: 1 })
            }
            [lo, hi, n] => Ok(Range {
                lo: num(lo)?,
                hi: num(hi)?,
                n: n.trim()
                    .parse()
                    .map_err(|e| format!("bad count {n:?}: {e}"))?,
            }),
            _ => Err(format!("expected a value or lo:hi:n, got {s:?}")),
        }
    }
}

impl std::fmt::Display for Range {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.n == 1 && self.lo == self.hi {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}:{}:{}", self.lo, self.hi, self.n)
        }
    }
}

impl Range {
    /// Evenly spaced points, both ends included.
    pub fn linear(&self) -> CliResult<Vec<f64>> {
        self.points(|lo, hi, f| lo + (hi - lo) * f)
    }

    /// Geometrically spaced points, both ends included.
    pub fn geometric(&self) -> CliResult<Vec<f64>> {
        if !(self.lo > 0.0 && self.hi > 0.0) {
            return Err(CliError::Validation(
                "geometric grid needs positive ends".into(),
            ));
        }
        self.points(|lo, hi, f| 10f64.powf(lo.log10() + (hi.log10() - lo.log10()) * f))
    }

    fn points(&self, at: impl Fn(f64, f64, f64) -> f64) -> CliResult<Vec<f64>> {
        if self.n == 0 {
            return Err(CliError::Validation("empty grid".into()));
        }
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(CliError::Validation("grid ends must be finite".into()));
        }
        if self.n == 1 {
            return Ok(vec![self.lo]);
        }
        let last = (self.n - 1) as f64;
        Ok((0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.hi
                } else {
                    at(self.lo, self.hi, i as f64 / last)
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "slip",
    version,
    about = "Spring-mass running model: simulate, solve for stiffness, verify asymptotics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the stance equations and write the trajectory.
    Simulate(SimulateArgs),
    /// Solve for the stiffness that closes the stance phase.
    Solve(SolveArgs),
    /// Run a convergence experiment.
    Verify(VerifyArgs),
    /// Solve over a grid of attack angles and horizontal speeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long = "U", allow_hyphen_values = true)]
    pub u: f64,
    #[arg(long = "V", allow_hyphen_values = true)]
    pub v: f64,
    #[arg(long = "K", allow_hyphen_values = true)]
    pub k: f64,
    /// Horizon in slow time.
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t: f64,
    /// Step in slow time; defaults to min(eps/50, 1e-3).
    #[arg(long)]
    pub step: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long = "U", allow_hyphen_values = true)]
    pub u: f64,
    #[arg(long = "V", allow_hyphen_values = true)]
    pub v: f64,
    /// Shooting step in slow time.
    #[arg(long)]
    pub step: Option<f64>,
    /// Residual tolerance on |L(t*) - 1|.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Only evaluate the closed-form estimate.
    #[arg(long)]
    pub approx_only: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    /// L~ and theta~ errors on tau+ in [0, T].
    Fast,
    /// L~ and theta~ errors on tau+ in [0, T/eps].
    Expanding,
    /// Slow pendulum angle error on t in [0, T].
    Slow,
    /// First return of the leg to rest length against eps pi.
    Tstar,
    /// Solved stiffness against the closed form across angles.
    Kratio,
}

impl Experiment {
    fn name(&self) -> &'static str {
        match self {
            Experiment::Fast => "fast",
            Experiment::Expanding => "expanding",
            Experiment::Slow => "slow",
            Experiment::Tstar => "tstar",
            Experiment::Kratio => "kratio",
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// Attack angle; a grid `lo:hi:n` for `kratio`.
    #[arg(long, default_value = "0.4")]
    pub alpha: Range,
    #[arg(long = "U", default_value_t = 1.0, allow_hyphen_values = true)]
    pub u: f64,
    #[arg(long = "V", default_value_t = 0.1, allow_hyphen_values = true)]
    pub v: f64,
    /// Stiffness grid `lo:hi:n`, geometrically spaced.
    #[arg(long = "K", default_value = "100:1000000:9")]
    pub k: Range,
    /// Interval end: tau+ bound for fast/expanding (default pi), t bound for slow (default 1).
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Reference step in units of fast time (h = step * eps); shooting step for kratio.
    #[arg(long)]
    pub step: Option<f64>,
    /// Shooting residual tolerance (kratio).
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub alpha: Range,
    #[arg(long = "U")]
    pub u: Range,
    #[arg(long = "V", allow_hyphen_values = true)]
    pub v: f64,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Rendered command output plus where it goes.
#[derive(Debug)]
pub struct Rendered {
    pub body: String,
    pub out: Option<PathBuf>,
    /// Extra file written next to `out` (JSON summary of a CSV report).
    pub sidecar: Option<(PathBuf, String)>,
}

/// Seventeen significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string().to_lowercase()
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn header(command: &str, config: &serde_json::Value) -> String {
    format!("# command: {command}\n# config: {config}\n")
}

fn positive(name: &str, value: Option<f64>) -> CliResult<Option<f64>> {
    match value {
        Some(v) if !(v > 0.0 && v.is_finite()) => Err(CliError::Validation(format!(
            "--{name} must be positive, got {v}"
        ))),
        other => Ok(other),
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".summary.json");
    PathBuf::from(name)
}

pub fn run(cli: &Cli) -> CliResult<Rendered> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Verify(a) => verify(a),
        Command::Sweep(a) => sweep(a),
    }
}

pub fn simulate(a: &SimulateArgs) -> CliResult<Rendered> {
    let p = ModelParams::new(a.alpha, a.u, a.v, a.k)?;
    if !(a.t >= 0.0 && a.t.is_finite()) {
        return Err(CliError::Validation(format!(
            "--T must be non-negative, got {}",
            a.t
        )));
    }
    let step = positive("step", a.step)?;
    let cfg = step
        .map(IntegratorConfig::with_step)
        .unwrap_or_else(|| IntegratorConfig::for_stiffness(p.k()));
    let format = a.output.format.unwrap_or(Format::Csv);
    let trajectory = if a.t > 0.0 {
        let mut traj = integrate(&slip_dynamics(p.k()), p.initial_state(), 0.0, a.t, &cfg)?;
        traj.params = Some(p);
        traj
    } else {
        Trajectory::new(
            TimeScale::Slow,
            vec![0.0],
            vec![p.initial_state()],
            cfg.step,
            Some(p),
        )?
    };
    let mut command = format!(
        "slip simulate --alpha {} --U {} --V {} --K {} --T {}",
        a.alpha, a.u, a.v, a.k, a.t
    );
    if let Some(h) = step {
        write!(command, " --step {h}").unwrap();
    }
    write!(command, " --format {format}").unwrap();
    let config = json!({ "params": p, "integrator": cfg });
    let omega = omega_tilde(p.epsilon(), p.theta_d())
        .map(|w| w.omega)
        .unwrap_or(f64::NAN);
    let tau_plus = |t: f64| omega * t / p.epsilon();

    let body = match format {
        Format::Csv => {
            let mut s = header(&command, &config);
            s.push_str("t,tau_plus,theta,theta_dot,L,L_dot,energy\n");
            for (t, st) in trajectory.iter() {
                writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    num(t),
                    num(tau_plus(t)),
                    num(st.theta),
                    num(st.theta_rate),
                    num(st.length),
                    num(st.length_rate),
                    num(energy(st, p.k()))
                )
                .unwrap();
            }
            s
        }
        Format::Json => {
            let rows: Vec<_> = trajectory
                .iter()
                .map(|(t, st)| {
                    json!({
                        "t": t,
                        "tau_plus": tau_plus(t),
                        "theta": st.theta,
                        "theta_dot": st.theta_rate,
                        "L": st.length,
                        "L_dot": st.length_rate,
                        "energy": energy(st, p.k()),
                    })
                })
                .collect();
            to_json(&json!({ "command": command, "config": config, "trajectory": rows }))
        }
    };
    Ok(Rendered {
        body,
        out: a.output.out.clone(),
        sidecar: None,
    })
}

fn shooting_config(step: Option<f64>, tol: Option<f64>) -> CliResult<ShootingConfig> {
    let mut cfg = ShootingConfig::default();
    if let Some(h) = positive("step", step)? {
        cfg.integrator.step = h;
    }
    if let Some(t) = positive("tol", tol)? {
        cfg.residual_tol = t;
    }
    Ok(cfg)
}

fn shooting_flags(step: Option<f64>, tol: Option<f64>) -> String {
    let mut s = String::new();
    if let Some(h) = step {
        write!(s, " --step {h}").unwrap();
    }
    if let Some(t) = tol {
        write!(s, " --tol {t}").unwrap();
    }
    s
}

pub fn solve(a: &SolveArgs) -> CliResult<Rendered> {
    let td = Touchdown::new(a.alpha, a.u, a.v)?;
    let cfg = shooting_config(a.step, a.tol)?;
    if let Some(Format::Csv) = a.output.format {
        return Err(CliError::Validation("solve writes JSON only".into()));
    }
    let mut command = format!("slip solve --alpha {} --U {} --V {}", a.alpha, a.u, a.v);
    command.push_str(&shooting_flags(a.step, a.tol));
    let body = if a.approx_only {
        command.push_str(" --approx-only");
        let k_approx = k_star_approx(&td)?;
        to_json(&json!({ "command": command, "touchdown": td, "K_approx": k_approx }))
    } else {
        if !(td.alpha > 0.0 && td.alpha < cfg.alpha_max) {
            return Err(CliError::Validation(format!(
                "--alpha must lie in (0, {}), got {}",
                cfg.alpha_max, td.alpha
            )));
        }
        let sol = solve_stiffness(&td, &cfg)?;
        let mut value = serde_json::to_value(&sol).expect("serializable solution");
        value["command"] = json!(command);
        value["config"] = json!({ "touchdown": td, "shooting": cfg });
        to_json(&value)
    };
    Ok(Rendered {
        body,
        out: a.output.out.clone(),
        sidecar: None,
    })
}

fn report_rows(s: &mut String, report: &ConvergenceReport) {
    for sample in &report.samples {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            report.experiment,
            num(sample.k),
            num(sample.epsilon),
            opt_num(sample.error),
            opt_num(sample.endpoint_error),
            opt_num(sample.energy_drift),
            csv_text(sample.note.as_deref().unwrap_or(""))
        )
        .unwrap();
    }
}

fn summary(command: &str, reports: &[&ConvergenceReport]) -> serde_json::Value {
    let items: Vec<_> = reports
        .iter()
        .map(|r| {
            json!({
                "experiment": r.experiment,
                "slope": r.slope(),
                "fit": r.fit,
                "fit_note": r.fit_note,
                "metadata": r.metadata,
            })
        })
        .collect();
    json!({ "command": command, "reports": items })
}

pub fn verify(a: &VerifyArgs) -> CliResult<Rendered> {
    let format = a.output.format.unwrap_or(Format::Csv);
    let mut command = format!(
        "slip verify {} --alpha {} --U {} --V {}",
        a.experiment.name(),
        a.alpha,
        a.u,
        a.v
    );

    if a.experiment == Experiment::Kratio {
        let alphas = a.alpha.linear()?;
        let cfg = shooting_config(a.step, a.tol)?;
        command.push_str(&shooting_flags(a.step, a.tol));
        write!(command, " --format {format}").unwrap();
        let rows = k_ratio_study(&alphas, a.u, a.v, &cfg);
        if rows.iter().all(|r| r.error.is_some()) {
            return Err(CliError::Numerical(format!(
                "every row failed; first error: {}",
                rows[0].error.as_deref().unwrap_or("")
            )));
        }
        let config = json!({ "U": a.u, "V": a.v, "alphas": alphas, "shooting": cfg });
        let body = match format {
            Format::Csv => kratio_csv(&command, &config, &rows),
            Format::Json => to_json(&json!({ "command": command, "config": config, "rows": rows })),
        };
        return Ok(Rendered {
            body,
            out: a.output.out.clone(),
            sidecar: None,
        });
    }

    let alphas = a.alpha.linear()?;
    if alphas.len() != 1 {
        return Err(CliError::Validation(
            "--alpha must be a single value for this experiment".into(),
        ));
    }
    let td = Touchdown::new(alphas[0], a.u, a.v)?;
    let ks = a.k.geometric()?;
    write!(command, " --K {}", a.k).unwrap();
    if let Some(t) = a.t {
        write!(command, " --T {t}").unwrap();
    }
    let mut cfg = VerifyConfig::default();
    if let Some(h) = positive("step", a.step)? {
        cfg.fast_step = h;
        write!(command, " --step {h}").unwrap();
    }
    write!(command, " --format {format}").unwrap();
    let reports: Vec<ConvergenceReport> = match a.experiment {
        Experiment::Fast | Experiment::Expanding => {
            let end = positive("T", a.t)?.unwrap_or(std::f64::consts::PI);
            let interval = if a.experiment == Experiment::Fast {
                FastInterval::Fixed(end)
            } else {
                FastInterval::Expanding(end)
            };
            let (l, th) = fast_scale_error(&td, &ks, interval, &cfg)?;
            vec![l, th]
        }
        Experiment::Slow => {
            let end = positive("T", a.t)?.unwrap_or(1.0);
            vec![slow_scale_error(
                &td,
                &ks,
                end,
                Theta0Method::default(),
                &cfg,
            )?]
        }
        Experiment::Tstar => {
            let r = t_star_order(&td, &ks, &cfg)?;
            vec![r.return_time, r.refined_root, r.refined_principal]
        }
        Experiment::Kratio => unreachable!(),
    };
    if reports
        .iter()
        .all(|r| r.samples.iter().all(|s| s.error.is_none()))
    {
        return Err(CliError::Numerical("every sample failed".into()));
    }
    let refs: Vec<&ConvergenceReport> = reports.iter().collect();
    let summary = summary(&command, &refs);
    let (body, sidecar) = match format {
        Format::Csv => {
            let config = json!({ "touchdown": td, "K": ks, "verify": cfg });
            let mut s = header(&command, &config);
            for r in &reports {
                writeln!(
                    s,
                    "# slope {}: {}",
                    r.experiment,
                    r.fit
                        .map(|f| format!("{} (residual {})", num(f.slope), num(f.residual)))
                        .unwrap_or_else(|| r.fit_note.clone().unwrap_or_default())
                )
                .unwrap();
            }
            s.push_str("experiment,K,epsilon,error,endpoint_error,energy_drift,note\n");
            for r in &reports {
                report_rows(&mut s, r);
            }
            let sidecar = a
                .output
                .out
                .as_deref()
                .map(|p| (sidecar_path(p), to_json(&summary)));
            (s, sidecar)
        }
        Format::Json => (
            to_json(&json!({ "command": command, "summary": summary, "reports": reports })),
            None,
        ),
    };
    Ok(Rendered {
        body,
        out: a.output.out.clone(),
        sidecar,
    })
}

fn kratio_csv(command: &str, config: &serde_json::Value, rows: &[KRatioRow]) -> String {
    let mut s = header(command, config);
    s.push_str("alpha,K_star,K_approx,ratio,t_star,return_defect,error\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(r.alpha),
            opt_num(r.k_star),
            opt_num(r.k_approx),
            opt_num(r.ratio),
            opt_num(r.t_star),
            opt_num(r.return_defect),
            csv_text(r.error.as_deref().unwrap_or(""))
        )
        .unwrap();
    }
    s
}

pub fn sweep(a: &SweepArgs) -> CliResult<Rendered> {
    let alphas = a.alpha.linear()?;
    let us = a.u.linear()?;
    if !a.v.is_finite() {
        return Err(CliError::Validation("--V must be finite".into()));
    }
    let cfg = shooting_config(a.step, a.tol)?;
    let format = a.output.format.unwrap_or(Format::Csv);
    let mut command = format!("slip sweep --alpha {} --U {} --V {}", a.alpha, a.u, a.v);
    command.push_str(&shooting_flags(a.step, a.tol));
    write!(command, " --format {format}").unwrap();
    let rows = stance_sweep(&alphas, &us, a.v, &cfg);
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(CliError::Numerical(format!(
            "every grid point failed; first error: {}",
            rows[0].error.as_deref().unwrap_or("")
        )));
    }
    let config = json!({ "alphas": alphas, "U": us, "V": a.v, "shooting": cfg });
    let body = match format {
        Format::Csv => sweep_csv(&command, &config, &rows),
        Format::Json => to_json(&json!({ "command": command, "config": config, "rows": rows })),
    };
    Ok(Rendered {
        body,
        out: a.output.out.clone(),
        sidecar: None,
    })
}

fn sweep_csv(command: &str, config: &serde_json::Value, rows: &[SweepRow]) -> String {
    let mut s = header(command, config);
    s.push_str("alpha,U,V,K_star,K_approx,t_star,tau_star,residual_length,iterations,error\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            num(r.alpha),
            num(r.u),
            num(r.v),
            opt_num(r.k_star),
            opt_num(r.k_approx),
            opt_num(r.t_star),
            opt_num(r.tau_star),
            opt_num(r.residual_length),
            r.iterations.map(|i| i.to_string()).unwrap_or_default(),
            csv_text(r.error.as_deref().unwrap_or(""))
        )
        .unwrap();
    }
    s
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| {
        std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "output path has no file name",
        )
    })?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}
