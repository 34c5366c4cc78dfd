//! `semistatic`: runs the exact and Monte Carlo checks of the
//! semistatic-hedging laboratory and writes self-describing reports.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 for
//! usage, parameter or I/O errors.

mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use output::{write_file, write_stdout, Format, Output};
use semistatic::blocks::{build_block, verify_block, BlockJson, BlockModel, BlockParams};
use semistatic::continuous::{
    cell_parts, mc_verify, path_agreement, ContinuousBlockParams, TestStrategy, MIN_SAMPLES, STREAMS,
};
use semistatic::pasting::{convergence_table, default_schedule, divergence_check, paste, PastedJson, PastedModel};
use semistatic::rational::{format_rational, parse_rational, Rational};

#[derive(Parser)]
#[command(name = "semistatic", version, about = "Exact and Monte Carlo checks for semistatic hedging models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify one two-period block: moments, conditional laws, orthogonality
    /// and the minimal decomposition cost bounds.
    Block {
        #[command(flatten)]
        params: ParamArgs,
        /// Run every block of the built-in parameter sweep instead.
        #[arg(long, conflicts_with_all = ["eps", "m", "a", "b"])]
        sweep: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Paste blocks with the standard schedule; check L^p convergence of the
    /// partial sums and divergence of the minimal cost.
    Paste {
        /// Number of pasted blocks.
        #[arg(long)]
        depth: u32,
        /// Comma-separated exponents for the convergence table.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        p: Vec<u32>,
        /// Largest partial index m in the convergence table (default depth - 1).
        #[arg(long)]
        m_max: Option<u32>,
        /// Skip the convergence tables.
        #[arg(long)]
        divergence_only: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Monte Carlo checks of the Brownian block.
    Continuous {
        #[command(flatten)]
        params: ParamArgs,
        /// Number of exact-law samples.
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Time step of the path grid; must be the square of a rational
        /// dividing 1, a and b (default: the coarsest such step / 16).
        #[arg(long, value_parser = rational_arg)]
        grid_step: Option<Rational>,
        /// Simulated paths for the path/exact-law agreement table (0 skips it).
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write a model as JSON, or check that a JSON model matches its
    /// construction.
    DumpModel {
        #[command(subcommand)]
        kind: DumpKind,
    },
}

#[derive(Subcommand)]
enum DumpKind {
    /// A single block.
    Block {
        #[command(flatten)]
        params: Box<ParamArgs>,
        /// Output file (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The pasted model of the standard schedule.
    Paste {
        #[arg(long)]
        depth: u32,
        /// Output file (default stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a block or pasted model and rebuild it from its parameters.
    Check { file: PathBuf },
}

#[derive(Args)]
struct ParamArgs {
    /// Probability parameter, 0 < eps <= 1/2 (n, n/d or decimal).
    #[arg(long, value_parser = rational_arg, default_value = "1/2")]
    eps: Rational,
    /// Payoff scale, M > 0.
    #[arg(long = "M", id = "m", value_parser = rational_arg, default_value = "2")]
    m: Rational,
    /// Lower terminal level in [2, 3].
    #[arg(long, value_parser = rational_arg, default_value = "9/4")]
    a: Rational,
    /// Upper terminal level in [2, 3], distinct from a.
    #[arg(long, value_parser = rational_arg, default_value = "11/4")]
    b: Rational,
}

impl ParamArgs {
    fn block_params(&self) -> Result<BlockParams, Failure> {
        BlockParams::new(self.eps.clone(), self.m.clone(), self.a.clone(), self.b.clone()).map_err(Failure::usage)
    }
}

#[derive(Args)]
struct OutArgs {
    /// Directory for report files (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn rational_arg(text: &str) -> Result<Rational, String> {
    parse_rational(text).map_err(|e| e.to_string())
}

/// Reason for a non-zero exit.
enum Failure {
    Usage(String),
    Checks(String),
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Block { params, sweep, out } => run_block(&params, sweep, out),
        Command::Paste { depth, p, m_max, divergence_only, out } => run_paste(depth, &p, m_max, divergence_only, out),
        Command::Continuous { params, n, seed, grid_step, paths, out } => {
            run_continuous(&params, n, seed, grid_step, paths, out)
        }
        Command::DumpModel { kind } => run_dump(kind),
    };
    match result {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Checks(summary)) => {
            eprintln!("{summary}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn verdict(name: &str, passed: bool, detail: String) -> Outcome {
    if passed {
        Ok(format!("{name}: PASS ({detail})"))
    } else {
        Err(Failure::Checks(format!("{name}: FAIL ({detail})")))
    }
}

#[derive(Serialize)]
struct CheckRow<'a> {
    block: String,
    name: &'a str,
    identity: &'a str,
    hard: bool,
    passed: bool,
    detail: &'a str,
}

fn block_label(p: &BlockParams) -> String {
    format!(
        "eps={} M={} a={} b={}",
        format_rational(&p.epsilon),
        format_rational(&p.m),
        format_rational(&p.a),
        format_rational(&p.b)
    )
}

fn run_block(params: &ParamArgs, sweep: bool, out: OutArgs) -> Outcome {
    let grid = if sweep { BlockParams::sweep_grid() } else { vec![params.block_params()?] };
    let reports = grid
        .iter()
        .map(|p| build_block(p).and_then(|b| verify_block(&b)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::usage)?;

    let labels: Vec<String> = reports.iter().map(|r| block_label(&r.params)).collect();
    let checks: Vec<CheckRow> = reports
        .iter()
        .zip(&labels)
        .flat_map(|(r, label)| {
            r.checks.iter().map(move |c| CheckRow {
                block: label.clone(),
                name: &c.name,
                identity: &c.identity,
                hard: c.hard,
                passed: c.passed,
                detail: &c.detail,
            })
        })
        .collect();
    let bounds: Vec<_> = reports.iter().map(|r| r.bounds.clone()).collect();

    let mut output = Output::new(out.out, out.format, "block_report");
    output.table("block_checks", &checks).map_err(Failure::usage)?;
    output.table("block_bounds", &bounds).map_err(Failure::usage)?;
    output.finish().map_err(Failure::usage)?;

    let failed = reports.iter().map(|r| r.failures().len()).sum::<usize>();
    verdict("block", failed == 0, format!("{} block(s), {} checks, {failed} failed", reports.len(), checks.len()))
}

#[derive(Serialize)]
struct StructureRow {
    identity: String,
    passed: bool,
}

#[derive(Serialize)]
struct TailRow {
    p: u32,
    identity: &'static str,
    lower: String,
    upper: String,
}

fn run_paste(depth: u32, ps: &[u32], m_max: Option<u32>, divergence_only: bool, out: OutArgs) -> Outcome {
    let schedule = default_schedule();
    let model = paste(&schedule, depth).map_err(Failure::usage)?;
    let structure: Vec<StructureRow> =
        model.structural_checks().into_iter().map(|(identity, passed)| StructureRow { identity, passed }).collect();
    let mut passed = structure.iter().all(|r| r.passed);

    let mut output = Output::new(out.out, out.format, "paste_report");
    output.table("structure", &structure).map_err(Failure::usage)?;

    if !divergence_only {
        let m_max = m_max.unwrap_or(depth - 1);
        let mut rows = Vec::new();
        let mut tails = Vec::new();
        for &p in ps {
            let table = convergence_table(&schedule, depth, p, m_max).map_err(Failure::usage)?;
            passed &= table.passed();
            if let Some((lower, upper)) = &table.tail_beyond_depth {
                tails.push(TailRow {
                    p,
                    identity: "lower <= sum_{n > N} 2^{-n(n+1-p)} <= upper",
                    lower: format_rational(lower),
                    upper: format_rational(upper),
                });
            }
            rows.extend(table.rows);
        }
        output.table("convergence", &rows).map_err(Failure::usage)?;
        output.table("convergence_tail", &tails).map_err(Failure::usage)?;
    }

    let divergence = divergence_check(&schedule, depth).map_err(Failure::usage)?;
    passed &= divergence.passed();
    output.table("divergence", &divergence.rows).map_err(Failure::usage)?;
    output.finish().map_err(Failure::usage)?;

    let last = divergence.rows.last().map(|r| r.global_cost.clone()).unwrap_or_default();
    verdict("paste", passed, format!("depth {depth}, minimal cost at depth {depth} = {last}"))
}

#[derive(Serialize)]
struct FitRow {
    identity: &'static str,
    statistic: f64,
    degrees_of_freedom: u32,
    p_value: f64,
    passed: bool,
}

#[derive(Serialize)]
struct CountRow {
    cell: usize,
    s_sigma: i8,
    x: bool,
    s_t_up: bool,
    count: u64,
}

fn run_continuous(
    params: &ParamArgs,
    n: u64,
    seed: u64,
    grid_step: Option<Rational>,
    paths: u64,
    out: OutArgs,
) -> Outcome {
    if n < MIN_SAMPLES {
        return Err(Failure::Usage(format!("--n must be at least {MIN_SAMPLES}")));
    }
    let cparams = ContinuousBlockParams::new(params.block_params()?).map_err(Failure::usage)?;
    let grid_step = grid_step.unwrap_or_else(|| cparams.default_grid_step());

    let mut strategies = TestStrategy::default_grid();
    strategies.push(TestStrategy::hold_until_sigma());
    let report = mc_verify(&cparams, n, seed, &strategies).map_err(Failure::usage)?;
    let agreement = if paths > 0 {
        path_agreement(&cparams, &grid_step, paths, seed).map_err(Failure::usage)?
    } else {
        // Validate the grid even when no paths are drawn.
        semistatic::continuous::PathGrid::new(&cparams, &grid_step).map_err(Failure::usage)?;
        Vec::new()
    };
    let agreement_ok = agreement.iter().all(|r| r.passed);

    let counts: Vec<CountRow> = (0..8)
        .map(|cell| {
            let (s_up, x, t_up) = cell_parts(cell);
            CountRow { cell, s_sigma: if s_up { 1 } else { -1 }, x, s_t_up: t_up, count: report.counts[cell] }
        })
        .collect();

    let mut output = Output::new(out.out, out.format, "continuous_report");
    output.value("params", &report.params).map_err(Failure::usage)?;
    output.value("n_samples", &report.n_samples).map_err(Failure::usage)?;
    output.value("seed", &report.seed).map_err(Failure::usage)?;
    output.value("streams", &STREAMS).map_err(Failure::usage)?;
    output.value("grid_step", &format_rational(&grid_step)).map_err(Failure::usage)?;
    output.table("counts", &counts).map_err(Failure::usage)?;
    output.table("checks", &report.checks).map_err(Failure::usage)?;
    let fit = [FitRow {
        identity: "cell counts follow the exact block law",
        statistic: report.fit.statistic,
        degrees_of_freedom: report.fit.degrees_of_freedom,
        p_value: report.fit.p_value,
        passed: report.fit.passed,
    }];
    output.table("fit", &fit).map_err(Failure::usage)?;
    output.table("strategies", &report.strategies).map_err(Failure::usage)?;
    output.table("path_agreement", &agreement).map_err(Failure::usage)?;
    output.finish().map_err(Failure::usage)?;

    verdict(
        "continuous",
        report.passed() && agreement_ok,
        format!(
            "n = {n}, seed = {seed}, {} checks, {} strategies, chi-squared p = {:.4}",
            report.checks.len(),
            report.strategies.len(),
            report.fit.p_value
        ),
    )
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelDoc {
    Block(Box<BlockJson>),
    Pasted(Box<PastedJson>),
}

fn emit_json<T: Serialize>(value: &T, out: Option<PathBuf>) -> Result<(), Failure> {
    let mut text = serde_json::to_vec_pretty(value).map_err(Failure::usage)?;
    text.push(b'\n');
    match out {
        Some(path) => write_file(&path, &text),
        None => write_stdout(&text),
    }
    .map_err(Failure::usage)
}

fn run_dump(kind: DumpKind) -> Outcome {
    match kind {
        DumpKind::Block { params, out } => {
            let model = build_block(&params.block_params()?).map_err(Failure::usage)?;
            emit_json(&model.to_json(), out)?;
            Ok(format!("dump-model: block with {} atoms", model.space.len()))
        }
        DumpKind::Paste { depth, out } => {
            let model = paste(&default_schedule(), depth).map_err(Failure::usage)?;
            emit_json(&model.to_json(), out)?;
            Ok(format!("dump-model: pasted model of depth {depth} with {} atoms", model.space.len()))
        }
        DumpKind::Check { file } => {
            let text = fs::read_to_string(&file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            let doc: ModelDoc = serde_json::from_str(&text)
                .map_err(|e| Failure::Checks(format!("dump-model check: FAIL (not a model document: {e})")))?;
            match doc {
                ModelDoc::Block(doc) => match BlockModel::from_json(&doc) {
                    Ok(model) => Ok(format!("dump-model check: PASS (block, {})", block_label(&model.params))),
                    Err(e) => Err(Failure::Checks(format!("dump-model check: FAIL ({e})"))),
                },
                ModelDoc::Pasted(doc) => match PastedModel::from_json(&doc) {
                    Ok(model) => Ok(format!("dump-model check: PASS (pasted, depth {})", model.depth)),
                    Err(e) => Err(Failure::Checks(format!("dump-model check: FAIL ({e})"))),
                },
            }
        }
    }
}
