//! Command-line front end shared by the `fcs` binary and tests.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{load_config, DesignRecord, Study};
use crate::controller::ControllerMode;
use crate::error::{Error, Result};
use crate::margins::{build_loop_model, mimo_margins, margin_table, DeltaPattern, MarginReport, MarginTableRow, Treatment};
use crate::simulate::{analyze, run, SimTrace, ViolationReport};
use crate::units::{format_sig9, SignalUnits, Unit};

#[derive(Debug, Parser)]
#[command(name = "fcs", version, about = "Constrained servo-control design, simulation and margin analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Study configuration (JSON).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output file, or directory for `tradestudy`. Defaults to stdout, or
    /// to the configured output directory for `tradestudy`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Override the simulation step in seconds.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute gains and constraint sensitivities; writes design JSON.
    Design(Common),
    /// Simulate the command schedule; writes a trace CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// baseline, saturation, augmented or awonly.
        #[arg(long, default_value = "augmented")]
        mode: ControllerMode,
    },
    /// Margins at the plant input for one activity pattern; writes JSON.
    Margins {
        #[command(flatten)]
        common: Common,
        /// One flag per constraint channel, inputs first, e.g. `1000`.
        #[arg(long)]
        delta: Option<String>,
    },
    /// All controllers, all input-constraint patterns, summary and plot data.
    Tradestudy(Common),
}

impl clap::ValueEnum for ControllerMode {
    fn value_variants<'a>() -> &'a [Self] {
        &ControllerMode::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.as_str()))
    }
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures are reported on stderr as a JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            1
        }
    }
}

pub fn error_json(e: &Error) -> String {
    serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() } }).to_string()
}

fn load(common: &Common) -> Result<Study> {
    let mut study = load_config(&common.config)?;
    if let Some(dt) = common.dt {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Config {
                path: "--dt".into(),
                message: "must be positive".into(),
            });
        }
        study.dt = dt;
    }
    Ok(study)
}

pub fn execute(command: &Command) -> Result<()> {
    match command {
        Command::Design(common) => {
            let study = load(common)?;
            let record = DesignRecord::from_study(&study)?;
            emit(common.output.as_deref(), |w| writeln!(w, "{}", record.to_json()))
        }
        Command::Simulate { common, mode } => {
            let study = load(common)?;
            let trace = run(&study.sys, &study.schedule, &study.sim_config(*mode))?;
            emit(common.output.as_deref(), |w| trace.write_csv(w, Some(&study.units)))
        }
        Command::Margins { common, delta } => {
            let study = load(common)?;
            let pattern = match delta {
                Some(bits) => bits.parse()?,
                None => DeltaPattern::inactive(study.m()),
            };
            let report = pattern_margins(&study, &pattern)?;
            let json = serde_json::to_string_pretty(&MarginJson::from(&report)).expect("margin JSON");
            emit(common.output.as_deref(), |w| writeln!(w, "{json}"))
        }
        Command::Tradestudy(common) => {
            let study = load(common)?;
            let dir = common
                .output
                .clone()
                .or_else(|| study.config.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("tradestudy_out"));
            tradestudy(&study, &dir).map(|_| ())
        }
    }
}

pub fn pattern_margins(study: &Study, pattern: &DeltaPattern) -> Result<MarginReport> {
    let model = build_loop_model(&study.sys.ext, &study.sys.gains, &study.sys.design, pattern)?;
    mimo_margins(&model, &study.grid, Treatment::Augmented)
}

fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut file = std::io::BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?);
            body(&mut file).and_then(|_| file.flush()).map_err(|e| Error::io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock).map_err(|e| Error::io("<stdout>", e))
        }
    }
}

/// Margin report in its file form.
#[derive(Debug, Serialize)]
pub struct MarginJson {
    pub pattern: String,
    pub treatment: Treatment,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gm_db: Option<[f64; 2]>,
    pub pm_deg: Option<[f64; 2]>,
    pub alpha_bounds: Option<crate::margins::MarginInterval>,
    pub beta_bounds: Option<crate::margins::MarginInterval>,
    pub siso: Vec<crate::margins::SisoMargins>,
    pub stable: bool,
    pub stability: crate::margins::Stability,
    pub max_real_eigenvalue: f64,
    pub open_loop: bool,
    pub grid: crate::margins::FrequencyGrid,
}

impl From<&MarginReport> for MarginJson {
    fn from(r: &MarginReport) -> Self {
        MarginJson {
            pattern: r.pattern.to_string(),
            treatment: r.treatment,
            alpha: r.alpha,
            beta: r.beta,
            gm_db: r.gm_db,
            pm_deg: r.pm_deg,
            alpha_bounds: r.alpha_bounds,
            beta_bounds: r.beta_bounds,
            siso: r.siso.clone(),
            stable: r.stable,
            stability: r.stability,
            max_real_eigenvalue: r.max_real_eigenvalue,
            open_loop: r.open_loop,
            grid: r.grid,
        }
    }
}

/// Violation metrics converted to file units.
pub fn report_in_output_units(report: &ViolationReport, units: &SignalUnits) -> ViolationReport {
    let mut out = report.clone();
    let m = units.input.len();
    let scale_channel = |c: &mut crate::simulate::ChannelViolation, unit: Unit| {
        let s = unit.output_scale();
        c.lower *= s;
        c.upper *= s;
        c.max_excursion *= s;
    };
    for (i, c) in out.constraints.iter_mut().enumerate() {
        let unit = if i < m { units.input[i] } else { units.limited[i - m] };
        scale_channel(c, unit);
    }
    for (i, c) in out.applied_inputs.iter_mut().enumerate() {
        scale_channel(c, units.input[i]);
    }
    for (i, w) in out.windup.iter_mut().enumerate() {
        *w *= units.regulated[i].integrated().output_scale();
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub mode: ControllerMode,
    pub trace_file: String,
    pub constraints_satisfied: bool,
    pub applied_inputs_satisfied: bool,
    pub violations: ViolationReport,
}

#[derive(Debug, Serialize)]
pub struct MarginRowJson {
    pub active_inputs: Vec<String>,
    pub pattern: String,
    pub baseline: Option<MarginJson>,
    pub saturation: MarginJson,
    pub augmented: MarginJson,
}

#[derive(Debug, Serialize)]
pub struct TradeSummary {
    pub name: String,
    pub dt: f64,
    pub horizon: f64,
    pub violation_tolerance: f64,
    pub units: &'static str,
    pub runs: Vec<RunSummary>,
    pub margins: Vec<MarginRowJson>,
    pub files: Vec<String>,
}

pub const TRADE_MODES: [ControllerMode; 3] =
    [ControllerMode::Baseline, ControllerMode::HardSaturation, ControllerMode::Augmented];

/// Runs every comparison and writes `summary.json`, one trace CSV per
/// controller and one CSV per plot panel into `dir`.
pub fn tradestudy(study: &Study, dir: &Path) -> Result<TradeSummary> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let traces: Vec<(ControllerMode, SimTrace)> = TRADE_MODES
        .par_iter()
        .map(|mode| run(&study.sys, &study.schedule, &study.sim_config(*mode)).map(|t| (*mode, t)))
        .collect::<Result<_>>()?;
    let table: Vec<MarginTableRow> = margin_table(&study.sys, &study.grid)?;

    let mut files = Vec::new();
    let mut runs = Vec::new();
    for (mode, trace) in &traces {
        let name = format!("trace_{mode}.csv");
        write_file(&dir.join(&name), |w| trace.write_csv(w, Some(&study.units)))?;
        files.push(name.clone());
        for (panel, body) in plot_panels(study, trace) {
            let panel_name = format!("plot_{mode}_{panel}.csv");
            write_file(&dir.join(&panel_name), |w| w.write_all(body.as_bytes()))?;
            files.push(panel_name);
        }
        let report = analyze(trace, &study.sys.bounds, study.violation_tolerance);
        runs.push(RunSummary {
            mode: *mode,
            trace_file: name,
            constraints_satisfied: report.constraints_satisfied(),
            applied_inputs_satisfied: report.applied_inputs_satisfied(),
            violations: report_in_output_units(&report, &study.units),
        });
    }
    let margins = table
        .iter()
        .map(|row| MarginRowJson {
            active_inputs: row.active_inputs.clone(),
            pattern: row.pattern.to_string(),
            baseline: row.baseline.as_ref().map(MarginJson::from),
            saturation: MarginJson::from(&row.saturation),
            augmented: MarginJson::from(&row.augmented),
        })
        .collect();
    files.push("summary.json".into());
    let summary = TradeSummary {
        name: study.name.clone(),
        dt: study.dt,
        horizon: study.schedule.horizon(),
        violation_tolerance: study.violation_tolerance,
        units: "angles in deg, rates in deg/s, integrated angles in deg*s",
        runs,
        margins,
        files,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary JSON");
    write_file(&dir.join("summary.json"), |w| writeln!(w, "{json}"))?;
    Ok(summary)
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    emit(Some(path), body)
}

fn column(unit: Unit, name: &str) -> String {
    match unit.label() {
        "" => name.to_string(),
        u => format!("{name} [{u}]"),
    }
}

/// One CSV body per panel: each constrained channel against its limits,
/// each plant state, the regulated outputs with their commands, and the
/// integrator states.
fn plot_panels(study: &Study, trace: &SimTrace) -> Vec<(String, String)> {
    let units = &study.units;
    let bounds = &study.sys.bounds;
    let m = study.m();
    let mut panels = Vec::new();
    let mut panel = |name: String, header: Vec<String>, columns: Vec<Vec<f64>>| {
        let mut body = header.join(",");
        body.push('\n');
        for k in 0..trace.len() {
            let row: Vec<String> = std::iter::once(format_sig9(trace.t[k]))
                .chain(columns.iter().map(|c| format_sig9(c[k])))
                .collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        panels.push((name, body));
    };
    let series = |name: &str, ch: usize, scale: f64| -> Vec<f64> {
        trace
            .signal(name, ch)
            .unwrap_or_default()
            .into_iter()
            .map(|v| v * scale)
            .collect()
    };
    let constant = |v: f64| vec![v; trace.len()];

    for i in 0..m {
        let u = units.input[i];
        let s = u.output_scale();
        panel(
            format!("limit_{}", trace.input_labels[i]),
            vec![
                "t [s]".into(),
                column(u, "u_bl"),
                column(u, "u"),
                column(u, "min"),
                column(u, "max"),
            ],
            vec![
                series("u_bl", i, s),
                series("u_total", i, s),
                constant(bounds.u_min[i] * s),
                constant(bounds.u_max[i] * s),
            ],
        );
    }
    for i in 0..m {
        let u = units.limited[i];
        let s = u.output_scale();
        panel(
            format!("limit_{}", trace.lim_labels[i]),
            vec!["t [s]".into(), column(u, "z"), column(u, "min"), column(u, "max")],
            vec![
                series("z_lim", i, s),
                constant(bounds.z_min[i] * s),
                constant(bounds.z_max[i] * s),
            ],
        );
    }
    for (i, label) in trace.state_labels.iter().enumerate() {
        let u = units.state[i];
        panel(
            format!("state_{label}"),
            vec!["t [s]".into(), column(u, label)],
            vec![series("x_p", i, u.output_scale())],
        );
    }
    for (i, label) in trace.reg_labels.iter().enumerate() {
        let u = units.regulated[i];
        let s = u.output_scale();
        panel(
            format!("tracking_{label}"),
            vec!["t [s]".into(), column(u, "y"), column(u, "y_cmd")],
            vec![series("y_reg", i, s), series("y_cmd", i, s)],
        );
    }
    let mut header = vec!["t [s]".to_string()];
    let mut cols = Vec::new();
    for (i, label) in trace.reg_labels.iter().enumerate() {
        let u = units.regulated[i];
        header.push(match u.integrated_label() {
            "" => format!("e_yI_{label}"),
            l => format!("e_yI_{label} [{l}]"),
        });
        cols.push(series("e_yi", i, u.integrated().output_scale()));
    }
    panel("integrators".into(), header, cols);
    panels
}
