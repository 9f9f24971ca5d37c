//! `sdrelax`: closed-form densities, cell solves, competitor sequences,
//! functionals and sampled verification from the command line.
//!
//! Matrices are given row-major and comma-separated: `--A 1,0,0,1,0,0` is
//! the 3×2 matrix with rows (1,0), (0,1), (0,0).
//!
//! Exit codes: 0 success, 1 a check or bound failed, 2 malformed input.

mod report;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix3, Matrix3x2, Vector3};
use serde_json::json;

use sdrelax::constructions::{self, Sequence};
use sdrelax::densities::{self, DensityPair};
use sdrelax::functionals;
use sdrelax::hypotheses::{check_hypotheses, Hypothesis};
use sdrelax::io;
use sdrelax::{solve, CellKind, CellProblem, Error};

use report::{Format, Report};

#[derive(Parser)]
#[command(name = "sdrelax", version, about)]
struct Cli {
    /// Write the report here instead of standard output.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Seed for sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Suppress the summary line on standard error.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a closed-form density.
    Density(DensityArgs),
    /// Run a verification suite.
    Verify(verify::VerifyArgs),
    /// Energy-decay table of a competitor sequence.
    Sequence(SequenceArgs),
    /// Evaluate the doubly relaxed functionals on a triple file.
    Functional(FunctionalArgs),
    /// Sample the structural hypotheses of a built-in density.
    CheckHypotheses(HypothesisArgs),
    /// Solve a cell problem given as a JSON file or by flags.
    Solve(SolveArgs),
}

#[derive(Args, Default)]
struct Data {
    /// Matrix A (3×2, or 3×3 where the kind needs it), row-major.
    #[arg(long = "A", value_delimiter = ',', allow_hyphen_values = true)]
    a: Option<Vec<f64>>,
    /// Matrix B (3×2), row-major.
    #[arg(long = "B", value_delimiter = ',', allow_hyphen_values = true)]
    b: Option<Vec<f64>>,
    /// Matrix M (3×2), row-major.
    #[arg(long = "M", value_delimiter = ',', allow_hyphen_values = true)]
    m: Option<Vec<f64>>,
    /// Director d ∈ ℝ³.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    d: Option<Vec<f64>>,
    /// Jump λ ∈ ℝ³.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
    /// Orientation η ∈ S¹ (or ν ∈ S² with --nu).
    #[arg(long, visible_alias = "nu", value_delimiter = ',', allow_hyphen_values = true)]
    eta: Option<Vec<f64>>,
}

impl Data {
    fn need<'a>(v: &'a Option<Vec<f64>>, flag: &str) -> Result<&'a [f64], Error> {
        v.as_deref()
            .ok_or_else(|| Error::Invalid(format!("missing --{flag}")))
    }

    fn planar(v: &Option<Vec<f64>>, flag: &str) -> Result<Matrix3x2<f64>, Error> {
        let v = Self::need(v, flag)?;
        if v.len() != 6 {
            return Err(Error::Invalid(format!("--{flag} needs 6 entries, got {}", v.len())));
        }
        Ok(Matrix3x2::from_row_slice(v))
    }

    fn full(v: &Option<Vec<f64>>, flag: &str) -> Result<Matrix3<f64>, Error> {
        let v = Self::need(v, flag)?;
        match v.len() {
            6 => Ok(densities::embed(&Matrix3x2::from_row_slice(v))),
            9 => Ok(Matrix3::from_row_slice(v)),
            k => Err(Error::Invalid(format!("--{flag} needs 6 or 9 entries, got {k}"))),
        }
    }

    fn vector(v: &Option<Vec<f64>>, flag: &str) -> Result<Vector3<f64>, Error> {
        let v = Self::need(v, flag)?;
        if v.len() != 3 {
            return Err(Error::Invalid(format!("--{flag} needs 3 entries, got {}", v.len())));
        }
        Ok(Vector3::from_row_slice(v))
    }

    fn eta(&self) -> Result<&[f64], Error> {
        Self::need(&self.eta, "eta")
    }
}

#[derive(Args)]
struct DensityArgs {
    /// h3d2d, h3d2dsd, h3dsd2d, h3dsd, h, w3d2d, w3d2dsd, two-d-trace,
    /// w3dsd, w3dsd2d, psi1bar, w1, gamma1.
    #[arg(long)]
    kind: String,
    #[command(flatten)]
    data: Data,
}

#[derive(Clone, Copy, ValueEnum)]
enum SequenceKind {
    Gamma1,
    FrameW1,
    Staircase,
}

#[derive(Args)]
struct SequenceArgs {
    #[arg(long, value_enum)]
    kind: SequenceKind,
    /// Scales, strictly increasing.
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
    n_list: Vec<usize>,
    #[command(flatten)]
    data: Data,
}

#[derive(Args)]
struct FunctionalArgs {
    /// Triple file (2D), or a 3D field file with a "G" list.
    file: PathBuf,
}

#[derive(Args)]
struct HypothesisArgs {
    /// interfacial-normal or psi1bar.
    #[arg(long, default_value = "interfacial-normal")]
    density: String,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Restrict to these hypotheses (e.g. H2-upper,H3,H4).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file; otherwise the problem is taken from the flags.
    #[arg(long, value_name = "FILE")]
    problem: Option<PathBuf>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long, default_value_t = 8)]
    n: usize,
    /// Write the minimizer as a field file.
    #[arg(long, value_name = "FILE")]
    minimizer: Option<PathBuf>,
    #[command(flatten)]
    data: Data,
}

fn normalize(kind: &str) -> String {
    kind.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

fn cmd_density(args: &DensityArgs) -> Result<Report, Error> {
    let d = &args.data;
    let kind = normalize(&args.kind);
    let value = match kind.as_str() {
        "h3d2d" | "h3d2dsd" | "h3dsd2d" => densities::h_3d2d_closed(&Data::vector(&d.lambda, "lambda")?, d.eta()?)?,
        "h" | "h3d" | "h3dsd" => densities::h_pure(&Data::vector(&d.lambda, "lambda")?, d.eta()?)?,
        "psi1bar" => densities::psi1_bar(&Data::vector(&d.lambda, "lambda")?, d.eta()?)?,
        "w3d2dsd" | "twodtrace" => {
            densities::w_3d2d_sd_closed(&Data::planar(&d.a, "A")?, &Data::planar(&d.b, "B")?)
        }
        "w3dsd" => densities::w_3dsd_closed(&Data::full(&d.a, "A")?, &Data::planar(&d.b, "B")?),
        "w3dsd2d" => densities::w_3dsd2d_closed(
            &Data::planar(&d.a, "A")?,
            &Data::planar(&d.b, "B")?,
            &Data::vector(&d.d, "d")?,
        ),
        "w3d2d" | "w1" | "gamma1" => 0.0,
        _ => return Err(Error::Invalid(format!("unknown density kind `{}`", args.kind))),
    };
    Ok(Report::scalar(&args.kind, value))
}

fn sequence_of(args: &SequenceArgs) -> Result<Sequence, Error> {
    let d = &args.data;
    Ok(match args.kind {
        SequenceKind::Gamma1 => Sequence::gamma1_split(Data::vector(&d.lambda, "lambda")?, d.eta()?)?,
        SequenceKind::FrameW1 => Sequence::frame_w1(Data::planar(&d.m, "M")?),
        SequenceKind::Staircase => Sequence::staircase_trace(Data::planar(&d.a, "A")?, Data::planar(&d.b, "B")?),
    })
}

fn cmd_sequence(args: &SequenceArgs) -> Result<Report, Error> {
    let seq = sequence_of(args)?;
    let surface = densities::Psi1Bar;
    let normal = densities::NormalJump;
    let density: &dyn densities::SurfaceDensity = match args.kind {
        SequenceKind::Staircase => &normal,
        _ => &surface,
    };
    let table = constructions::decay_table(&seq, density, &args.n_list)?;
    let ok = table.all_within_bound();
    Ok(Report {
        json: serde_json::to_value(&table).expect("serializable"),
        csv: table.to_csv(),
        ok,
        summary: format!(
            "{}: {} rows, slope {}, {}",
            table.sequence,
            table.rows.len(),
            table.slope().map(|s| format!("{s:.4}")).unwrap_or_else(|| "n/a".into()),
            if ok { "all rows within bound" } else { "bound violated" }
        ),
        default_csv: true,
    })
}

fn cmd_functional(args: &FunctionalArgs) -> Result<Report, Error> {
    let text = std::fs::read_to_string(&args.file)?;
    let dim: Option<usize> = serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v.get("dimension").and_then(|d| d.as_u64()).map(|d| d as usize));
    if dim == Some(3) {
        let (g, big_g) = io::parse_field_with_g(&text)?;
        let value = functionals::eval_F3dSD(&g, &big_g)?;
        return Ok(Report::scalar("F3dSD", value));
    }
    let triple = io::parse_triple(&text)?;
    let (left, right) = (functionals::eval_left(&triple), functionals::eval_right(&triple));
    let difference = (left - right).abs();
    Ok(Report {
        json: json!({ "left": left, "right": right, "difference": difference }),
        csv: format!("left,right,difference\n{left:.17e},{right:.17e},{difference:.17e}\n"),
        ok: true,
        summary: format!("left {left} right {right} difference {difference}"),
        default_csv: false,
    })
}

fn cmd_hypotheses(args: &HypothesisArgs, seed: u64) -> Result<Report, Error> {
    let density = DensityPair::from_name(&args.density)?;
    let report = check_hypotheses(&density, args.samples, seed);
    let selected: Vec<Hypothesis> = if args.only.is_empty() {
        Hypothesis::ALL.to_vec()
    } else {
        args.only
            .iter()
            .map(|s| {
                Hypothesis::ALL
                    .into_iter()
                    .find(|h| h.label().eq_ignore_ascii_case(s.trim()))
                    .ok_or_else(|| Error::Invalid(format!("unknown hypothesis `{s}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let entries: Vec<_> = report
        .entries
        .iter()
        .filter(|e| selected.contains(&e.hypothesis))
        .collect();
    let ok = entries.iter().all(|e| e.passed);
    let mut csv = String::from("hypothesis,passed,violations,worst_margin\n");
    for e in &entries {
        csv.push_str(&format!("{},{},{},{:e}\n", e.hypothesis.label(), e.passed, e.violations, e.worst_margin));
    }
    let failed: Vec<&str> = entries.iter().filter(|e| !e.passed).map(|e| e.hypothesis.label()).collect();
    Ok(Report {
        json: json!({ "samples": report.samples, "seed": report.seed, "entries": entries }),
        csv,
        ok,
        summary: if ok {
            format!("{} hypotheses hold on {} samples", entries.len(), report.samples)
        } else {
            format!("violated: {}", failed.join(", "))
        },
        default_csv: false,
    })
}

fn cmd_solve(args: &SolveArgs) -> Result<Report, Error> {
    let problem = match &args.problem {
        Some(path) => io::read_problem(path)?,
        None => {
            let kind: CellKind = args
                .kind
                .as_deref()
                .ok_or_else(|| Error::Invalid("give --problem or --kind".into()))?
                .parse()?;
            let d = &args.data;
            let mut p = CellProblem::new(kind, args.n);
            p.a = d.a.as_ref().map(|_| Data::full(&d.a, "A")).transpose()?;
            p.b = d.b.as_ref().map(|_| Data::planar(&d.b, "B")).transpose()?;
            p.d = d.d.as_ref().map(|_| Data::vector(&d.d, "d")).transpose()?;
            p.lambda = d.lambda.as_ref().map(|_| Data::vector(&d.lambda, "lambda")).transpose()?;
            p.orientation = d.eta.clone();
            if matches!(kind, CellKind::W1 | CellKind::Gamma1) {
                p.density = DensityPair::psi1_bar();
            }
            p
        }
    };
    let result = solve(&problem)?;
    let mut file = None;
    if let Some(path) = &args.minimizer {
        io::write_field(path, &result.minimizer)?;
        file = Some(path.display().to_string());
    }
    let out = io::ResultJson::new(&problem, &result, file);
    Ok(Report {
        csv: format!(
            "kind,n,value,exact_energy,certified\n{},{},{:.17e},{:.17e},{}\n",
            out.kind, out.n, out.value, out.exact_energy, out.certified
        ),
        summary: format!("{} n={} value {}", out.kind, out.n, out.value),
        json: serde_json::to_value(&out).expect("serializable"),
        ok: true,
        default_csv: false,
    })
}

fn configure_threads() {
    if let Some(k) = std::env::var("SD_RELAX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Density(a) => cmd_density(a),
        Command::Verify(a) => verify::run(a, cli.seed),
        Command::Sequence(a) => cmd_sequence(a),
        Command::Functional(a) => cmd_functional(a),
        Command::CheckHypotheses(a) => cmd_hypotheses(a, cli.seed),
        Command::Solve(a) => cmd_solve(a),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = report.emit(cli.format, cli.out.as_deref(), cli.quiet) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
