//! Command-line front end: argument parsing, protocol and distribution
//! selection, and rendering of reports as JSON, CSV or text.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use crate::bits::BitString;
use crate::compression::{
    audit_obliviousized, compression_theorem_check, obliviousize, CompressionError,
    CompressionReport, Compressor, LcpBox, ObliviousAudit, TheoremCheck,
};
use crate::measures::{
    format_bits, publicize, round_bits, sup_pic_grid, Analysis, GridResult, InputDistribution,
    MeasureError, MeasureReport,
};
use crate::model::{run_relaxed, tree, ProtocolDef, Schedule, SimError, Tapes, DEFAULT_BUDGET};
use crate::zoo::{self, order_leak_players, REGISTRY};

#[derive(Debug, Parser)]
#[command(
    name = "piclab",
    version,
    about = "Exact information accounting for multi-party protocols"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate a protocol and report its communication and information measures.
    Measure(Common),
    /// Check whether a protocol leaks more than its outputs.
    Audit(Common),
    /// Run the staged compression on every input and compare with the bound.
    Compress(CompressArgs),
    /// Show the relaxed-model order leak.
    Demo(DemoArgs),
    /// List built-in protocols.
    List(FormatArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LcpKind {
    Exact,
    Randomized,
}

#[derive(Debug, Clone, Args)]
pub struct FormatArgs {
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Registry name or path to a protocol-tree JSON file.
    #[arg(long)]
    pub protocol: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    /// uniform, file:PATH or grid:STEP.
    #[arg(long, default_value = "uniform")]
    pub mu: String,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Maximum number of executions to enumerate.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: FormatArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CompressArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "exact")]
    pub lcp: LcpKind,
    /// Total error budget of the randomized lcp boxes.
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Monte-Carlo runs per input with randomized boxes.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Convert to an oblivious protocol with this error first.
    #[arg(long, value_name = "EPS")]
    pub obliviousize: Option<f64>,
    /// Print the stage-by-stage trace of every exact run to stderr.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DemoArgs {
    /// Only the order-leak demo exists.
    #[arg(default_value = "order-leak")]
    pub name: String,
    #[command(flatten)]
    pub output: FormatArgs,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Compression(#[from] CompressionError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Measure(MeasureError::Sim(e))
    }
}

fn sim_code(e: &SimError) -> i32 {
    match e {
        SimError::BudgetExceeded { .. } => 2,
        SimError::InvalidArgument(_) => 1,
        _ => 3,
    }
}

impl CliError {
    /// Process exit code: 1 configuration, 2 budget, 3 model violation,
    /// 4 non-oblivious protocol.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Measure(MeasureError::Sim(e)) => sim_code(e),
            CliError::Compression(CompressionError::Measure(MeasureError::Sim(e))) => sim_code(e),
            CliError::Compression(CompressionError::NotOblivious { .. }) => 4,
            CliError::Compression(CompressionError::InvariantBreach(_)) => 3,
            _ => 1,
        }
    }

    /// Message with a hint where one helps.
    pub fn message(&self) -> String {
        match self {
            CliError::Compression(CompressionError::NotOblivious { .. }) => {
                format!("{self}\nhint: rerun with --obliviousize EPS to convert it first")
            }
            _ => self.to_string(),
        }
    }
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Loads a registry protocol or a protocol-tree file.
pub fn load_protocol(c: &Common) -> Result<ProtocolDef, CliError> {
    if REGISTRY.contains(&c.protocol.as_str()) {
        return zoo::by_name(&c.protocol, c.k, c.n, c.q)
            .map(|e| e.def)
            .map_err(|e| config(e.to_string()));
    }
    let path = Path::new(&c.protocol);
    if !path.exists() {
        return Err(config(format!(
            "{:?} is neither a built-in protocol ({}) nor a readable file",
            c.protocol,
            REGISTRY.join(", ")
        )));
    }
    if c.k.is_some() || c.n.is_some() || c.q.is_some() {
        return Err(config("--k, --n and --q only apply to built-in protocols"));
    }
    tree::from_path(path).map_err(|e| config(e.to_string()))
}

/// The chosen distribution, and the grid optimum it came from if any.
pub fn load_distribution(
    p: &ProtocolDef,
    spec: &str,
    budget: u64,
) -> Result<(InputDistribution, Option<GridResult>), CliError> {
    if spec == "uniform" {
        return Ok((InputDistribution::uniform(p), None));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok((InputDistribution::from_path(Path::new(path), p)?, None));
    }
    if let Some(step) = spec.strip_prefix("grid:") {
        let step: f64 = step
            .parse()
            .map_err(|_| config(format!("grid step {step:?} is not a number")))?;
        let g = sup_pic_grid(p, step, budget)?;
        let n = (1.0 / step).round() as i64;
        let frac =
            |v: f64| BigRational::new(BigInt::from((v * n as f64).round() as i64), BigInt::from(n));
        let mu = InputDistribution::independent_bits(&frac(g.alpha), &frac(g.beta))?;
        return Ok((mu, Some(g)));
    }
    Err(config(format!(
        "--mu {spec:?}: expected uniform, file:PATH or grid:STEP"
    )))
}

fn check_common(c: &Common) -> Result<(), CliError> {
    if c.tolerance.is_nan() || c.tolerance <= 0.0 {
        return Err(config("--tolerance must be positive"));
    }
    if c.budget == 0 {
        return Err(config("--budget must be positive"));
    }
    Ok(())
}

/// A report that can be rendered in each output format.
pub trait Render {
    fn json(&self) -> String;
    fn csv(&self) -> String;
    fn text(&self) -> String;

    fn render(&self, f: Format) -> String {
        match f {
            Format::Json => {
                let mut s = self.json();
                s.push('\n');
                s
            }
            Format::Csv => self.csv(),
            Format::Text => self.text(),
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("report serializes");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn kv(rows: &[(&str, String)]) -> String {
    rows.iter().map(|(k, v)| format!("{k:<20} {v}\n")).collect()
}

impl Render for MeasureReport {
    fn json(&self) -> String {
        self.to_json()
    }
    fn csv(&self) -> String {
        self.to_csv()
    }
    fn text(&self) -> String {
        self.to_text()
    }
}

impl Render for CompressionReport {
    fn json(&self) -> String {
        self.to_json()
    }
    fn csv(&self) -> String {
        self.to_csv()
    }
    fn text(&self) -> String {
        self.to_text()
    }
}

/// Measures at the best point of a grid search.
#[derive(Debug, Serialize)]
pub struct GridMeasure {
    pub grid: GridResult,
    pub measures: MeasureReport,
}

fn grid_rows(g: &GridResult) -> Vec<(&'static str, String)> {
    vec![
        ("grid_alpha", format!("{:.6}", g.alpha)),
        ("grid_beta", format!("{:.6}", g.beta)),
        ("grid_value", format_bits(g.value)),
        ("grid_points", g.points.to_string()),
    ]
}

impl Render for GridMeasure {
    fn json(&self) -> String {
        to_json(self)
    }
    fn csv(&self) -> String {
        let base = self.measures.to_csv();
        let mut lines = base.lines();
        let head = lines.next().unwrap_or_default();
        let row = lines.next().unwrap_or_default();
        let extra = grid_rows(&self.grid);
        let names: Vec<&str> = extra.iter().map(|(k, _)| *k).collect();
        let vals: Vec<&str> = extra.iter().map(|(_, v)| v.as_str()).collect();
        format!("{head},{}\n{row},{}\n", names.join(","), vals.join(","))
    }
    fn text(&self) -> String {
        let mut s = kv(&grid_rows(&self.grid));
        s.push_str(&self.measures.to_text());
        s
    }
}

#[derive(Debug, Serialize)]
pub struct AuditReport {
    pub protocol: String,
    pub distribution: String,
    #[serde(serialize_with = "ser_bits")]
    pub leakage: f64,
    /// Per-player leakage, joined with ';' in CSV.
    pub leakage_terms: Vec<f64>,
    pub tolerance: f64,
    pub verdict: String,
}

fn ser_bits<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_bits(*v))
}

#[derive(Serialize)]
struct AuditRow<'a> {
    protocol: &'a str,
    distribution: &'a str,
    leakage: String,
    leakage_terms: String,
    tolerance: f64,
    verdict: &'a str,
}

impl Render for AuditReport {
    fn json(&self) -> String {
        to_json(self)
    }
    fn csv(&self) -> String {
        to_csv(&[AuditRow {
            protocol: &self.protocol,
            distribution: &self.distribution,
            leakage: format_bits(self.leakage),
            leakage_terms: terms(&self.leakage_terms, ";"),
            tolerance: self.tolerance,
            verdict: &self.verdict,
        }])
    }
    fn text(&self) -> String {
        kv(&[
            ("protocol", self.protocol.clone()),
            ("distribution", self.distribution.clone()),
            ("leakage", format_bits(self.leakage)),
            ("leakage_terms", terms(&self.leakage_terms, " ")),
            ("tolerance", format!("{:e}", self.tolerance)),
            ("verdict", self.verdict.clone()),
        ])
    }
}

fn terms(v: &[f64], sep: &str) -> String {
    v.iter()
        .map(|&t| format_bits(t))
        .collect::<Vec<_>>()
        .join(sep)
}

/// A compression report preceded by the obliviousizing step.
#[derive(Debug, Serialize)]
pub struct ObliviousCompression {
    pub eps: f64,
    pub obliviousized: ObliviousAudit,
    pub compression: CompressionReport,
}

impl Render for ObliviousCompression {
    fn json(&self) -> String {
        to_json(self)
    }
    fn csv(&self) -> String {
        let base = self.compression.to_csv();
        let mut lines = base.lines();
        let head = lines.next().unwrap_or_default();
        let row = lines.next().unwrap_or_default();
        let a = &self.obliviousized;
        format!(
            "{head},obliviousize_eps,phases,truncation_mass,markov_bound,agrees_when_complete\n{row},{},{},{},{},{}\n",
            self.eps, a.phases, a.truncation_mass, a.markov_bound, a.agrees_when_complete
        )
    }
    fn text(&self) -> String {
        let a = &self.obliviousized;
        let mut s = kv(&[
            ("obliviousize_eps", self.eps.to_string()),
            ("phases", a.phases.to_string()),
            ("original_acc", a.acc.clone()),
            ("truncation_mass", a.truncation_mass.clone()),
            ("markov_bound", a.markov_bound.clone()),
            ("agrees_when_complete", a.agrees_when_complete.to_string()),
            (
                "oblivious_error",
                a.error.clone().unwrap_or_else(|| "n/a".into()),
            ),
        ]);
        s.push_str(&self.compression.to_text());
        s
    }
}

/// One execution of the order-leak protocol.
#[derive(Debug, Serialize)]
pub struct LeakRun {
    pub x: String,
    /// Senders in the order B read them.
    pub b_read_from: Vec<String>,
    /// Concatenated message contents, in player order.
    pub contents: String,
    pub b_output: String,
}

#[derive(Debug, Serialize)]
pub struct DemoReport {
    pub protocol: String,
    pub runs: Vec<LeakRun>,
    pub identical_contents: bool,
    pub outputs_differ: bool,
    pub b_learns_x: bool,
}

impl Render for DemoReport {
    fn json(&self) -> String {
        to_json(self)
    }
    fn csv(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            x: &'a str,
            b_read_from: String,
            contents: &'a str,
            b_output: &'a str,
        }
        to_csv(
            &self
                .runs
                .iter()
                .map(|r| Row {
                    x: &r.x,
                    b_read_from: r.b_read_from.join(" "),
                    contents: &r.contents,
                    b_output: &r.b_output,
                })
                .collect::<Vec<_>>(),
        )
    }
    fn text(&self) -> String {
        let mut s = format!("{}\n", self.protocol);
        for r in &self.runs {
            s.push_str(&format!(
                "x={}  B reads from {}  contents {}  B outputs {}\n",
                r.x,
                r.b_read_from.join(","),
                r.contents,
                r.b_output
            ));
        }
        s.push_str(&kv(&[
            ("identical_contents", self.identical_contents.to_string()),
            ("outputs_differ", self.outputs_differ.to_string()),
            ("b_learns_x", self.b_learns_x.to_string()),
        ]));
        s
    }
}

#[derive(Debug, Serialize)]
pub struct ListEntry {
    pub name: String,
    pub parameters: String,
    pub mode: String,
    pub description: String,
}

#[derive(Debug, Serialize)]
pub struct ListReport(pub Vec<ListEntry>);

impl Render for ListReport {
    fn json(&self) -> String {
        to_json(&self.0)
    }
    fn csv(&self) -> String {
        to_csv(&self.0)
    }
    fn text(&self) -> String {
        self.0
            .iter()
            .map(|e| {
                format!(
                    "{:<12} {:<10} {:<10} {}\n",
                    e.name, e.parameters, e.mode, e.description
                )
            })
            .collect()
    }
}

pub fn cmd_measure(c: &Common) -> Result<Box<dyn Render>, CliError> {
    check_common(c)?;
    let p = load_protocol(c)?;
    let (mu, grid) = load_distribution(&p, &c.mu, c.budget)?;
    let report = Analysis::from_protocol(&p, mu, c.budget)?.report(c.tolerance)?;
    Ok(match grid {
        Some(grid) => Box::new(GridMeasure {
            grid,
            measures: report,
        }),
        None => Box::new(report),
    })
}

pub fn cmd_audit(c: &Common) -> Result<AuditReport, CliError> {
    check_common(c)?;
    let p = load_protocol(c)?;
    if p.family.is_none() {
        return Err(config(format!(
            "protocol {:?} declares no functions to audit against (add \"functions\" to the tree file)",
            p.name
        )));
    }
    let (mu, _) = load_distribution(&p, &c.mu, c.budget)?;
    if !mu.has_full_support(&p) {
        return Err(config(
            "the privacy audit needs a distribution with full support",
        ));
    }
    let a = Analysis::from_protocol(&p, mu, c.budget)?;
    let terms = a.privacy_leakage_terms()?;
    let leakage: f64 = terms.iter().sum();
    Ok(AuditReport {
        protocol: p.name.clone(),
        distribution: a.mu.id.clone(),
        leakage,
        leakage_terms: terms.iter().map(|&t| round_bits(t)).collect(),
        tolerance: c.tolerance,
        verdict: if leakage <= c.tolerance {
            "private"
        } else {
            "not private"
        }
        .into(),
    })
}

pub fn cmd_compress(a: &CompressArgs) -> Result<Box<dyn Render>, CliError> {
    let c = &a.common;
    check_common(c)?;
    if a.lcp == LcpKind::Randomized && !(a.eps > 0.0 && a.eps < 1.0) {
        return Err(config("--eps must lie in (0, 1) for randomized boxes"));
    }
    let original = load_protocol(c)?;
    let (mu, _) = load_distribution(&original, &c.mu, c.budget)?;
    let cfg = TheoremCheck {
        delta: a.eps,
        randomized: a.lcp == LcpKind::Randomized,
        trials: a.trials,
        seed: c.seed,
    };
    let (p, audit) = match a.obliviousize {
        Some(eps) => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(config("--obliviousize needs 0 < EPS < 1"));
            }
            let ob = obliviousize(&original, &mu, eps, c.budget)?;
            let audit = audit_obliviousized(&original, &ob, &mu, c.budget)?;
            (ob.def, Some((eps, audit)))
        }
        None => (original, None),
    };
    let p = publicize(&p);
    let comp = Compressor::new(&p, mu, c.budget)?;
    if a.trace {
        for (xi, ti, _) in comp.weighted_runs() {
            let run = comp.compress_run(xi, ti, &mut LcpBox::exact(), true)?;
            let x: Vec<String> = comp.analysis.table.inputs[xi]
                .iter()
                .map(|b| b.to_string())
                .collect();
            eprintln!("input {} tape {ti}", x.join(","));
            for line in run.trace {
                eprintln!("  {line}");
            }
        }
    }
    let report = compression_theorem_check(&comp, &cfg)?;
    Ok(match audit {
        Some((eps, obliviousized)) => Box::new(ObliviousCompression {
            eps,
            obliviousized,
            compression: report,
        }),
        None => Box::new(report),
    })
}

pub fn cmd_demo(d: &DemoArgs) -> Result<DemoReport, CliError> {
    if d.name != "order-leak" {
        return Err(config(format!(
            "unknown demo {:?} (available: order-leak)",
            d.name
        )));
    }
    use order_leak_players::B;
    let p = zoo::order_leak().def;
    let names = ["A", "B", "C", "D"];
    let mut runs = Vec::new();
    for x in ["0", "1"] {
        let input: Vec<BitString> = vec![
            x.parse().expect("bit"),
            BitString::new(),
            BitString::new(),
            BitString::new(),
        ];
        let e = run_relaxed(&p, &input, &Tapes::empty(4), &Schedule::OldestFirst)?;
        runs.push(LeakRun {
            x: x.into(),
            b_read_from: e.received[B]
                .iter()
                .map(|(s, _)| names[*s].to_string())
                .collect(),
            contents: e.full_transcript().to_string(),
            b_output: e.outputs[B].to_string(),
        });
    }
    Ok(DemoReport {
        protocol: p.name.clone(),
        identical_contents: runs[0].contents == runs[1].contents,
        outputs_differ: runs[0].b_output != runs[1].b_output,
        b_learns_x: runs.iter().all(|r| r.b_output == r.x),
        runs,
    })
}

pub fn cmd_list() -> ListReport {
    ListReport(
        REGISTRY
            .iter()
            .map(|name| {
                let e = zoo::by_name(name, None, None, None).expect("registry entry");
                let mut params = Vec::new();
                for (k, v) in [("k", e.params.k), ("n", e.params.n), ("q", e.params.q)] {
                    if v.is_some() {
                        params.push(k);
                    }
                }
                ListEntry {
                    name: name.to_string(),
                    parameters: if params.is_empty() {
                        "-".into()
                    } else {
                        params.join(",")
                    },
                    mode: format!("{:?}", e.def.mode).to_lowercase(),
                    description: e.description.into(),
                }
            })
            .collect(),
    )
}

/// Runs a parsed command and returns the rendered report and where it goes.
pub fn execute(cli: &Cli) -> Result<(String, Option<PathBuf>), CliError> {
    let (out, args) = match &cli.command {
        Command::Measure(c) => (cmd_measure(c)?.render(c.output.format), &c.output),
        Command::Audit(c) => (cmd_audit(c)?.render(c.output.format), &c.output),
        Command::Compress(a) => (
            cmd_compress(a)?.render(a.common.output.format),
            &a.common.output,
        ),
        Command::Demo(d) => (cmd_demo(d)?.render(d.output.format), &d.output),
        Command::List(f) => (cmd_list().render(f.format), f),
    };
    Ok((out, args.out.clone()))
}

/// Entry point shared by the binary: parses, runs, writes, and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = execute(&cli).and_then(|(text, out)| match out {
        Some(path) => std::fs::write(&path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
