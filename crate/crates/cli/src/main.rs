//! Batch front end over seeded instances: generation and audits, bound
//! checks along enumerated paths, and recovery of the planted frequency.
//!
//! Every report is one JSON object per line (or a commented CSV block) that
//! records the command, version, seed, params and gate flags. Reports under
//! `--out` are appended to `<out>/<command>.<ext>`. The exit status is 0 when
//! every asserted invariant holds, 1 when the report records a failure and
//! 2 on errors, which are printed as a JSON object.

mod report;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use phaselab::graph::{
    certify_path, collision_census, count_close_products, enumerate_split_paths, Census, CertificateRow, CloseProducts,
};
use phaselab::pyramid::{build_pyramid, verify_pyramid};
use phaselab::rational::{self, Rational};
use phaselab::recover::{recover, residues_consistent, score_recovery, LocalEstimate, RecoverConfig, RecoveryReport, Score};
use phaselab::synth::{audit_instance, gen_instance, GroundTruth, Instance, Params, TruthSpec};

use report::{Format, Output, Report};

#[derive(Parser)]
#[command(name = "phaselab", version, about = "Frequency pyramids on prime-labeled path graphs, with planted-frequency recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded instance with a planted frequency.
    Synth(SynthArgs),
    /// Re-verify the edges and planted truth of an instance.
    Audit(AuditArgs),
    /// Build pyramids over enumerated paths and check every bound.
    VerifyBounds(BoundsArgs),
    /// Count paths per endpoint and check product-ratio separation.
    Census(CensusArgs),
    /// Recover the global frequency from disjoint path pairs through a hub.
    Recover(RecoverArgs),
    /// Compare a recovery report with the planted truth.
    Score(ScoreArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Archimedean,
    Rational,
}

#[derive(Args)]
struct SynthArgs {
    /// Params as JSON; the benchmark scale when omitted.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Archimedean)]
    mode: ModeArg,
    #[arg(long = "t-star", default_value = "100000", value_parser = parse_rational)]
    t_star: Rational,
    /// Denominator of the rational part (rational mode only).
    #[arg(long = "q-star", default_value_t = 6)]
    q_star: u64,
    /// Hold the truth out of the instance and write it to `truth.json`.
    #[arg(long)]
    blind: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    instance: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Paths taken from each initial site.
    #[arg(long, default_value_t = 5)]
    per_start: usize,
    #[arg(long, default_value_t = 500)]
    max_paths: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CensusArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Enumeration cap per initial site.
    #[arg(long, default_value_t = 100_000)]
    limit: usize,
    /// Also count close prime products for r = 1..=3 against this N.
    #[arg(long = "close-n", value_parser = parse_rational)]
    close_n: Option<Rational>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Peeling threshold; the instance's `d_min` when omitted.
    #[arg(long = "d-min")]
    d_min: Option<usize>,
    #[arg(long = "tol-T", value_parser = parse_rational)]
    tol_t: Option<Rational>,
    #[arg(long = "min-witness", default_value_t = 1)]
    min_witness: usize,
    #[arg(long, default_value = "1/2", value_parser = parse_rational)]
    consensus: Rational,
    #[arg(long, default_value_t = 200_000)]
    path_limit: usize,
    /// Discard any truth carried by the instance before recovery.
    #[arg(long)]
    blind: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    instance: PathBuf,
    /// A `recover` report; the last report in the file is scored.
    #[arg(long)]
    recovery: PathBuf,
    /// Held-out truth, when the instance is blind.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

fn load_instance(path: &PathBuf) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Instance::from_json(&text)?)
}

fn load_params(path: Option<&PathBuf>) -> anyhow::Result<Params> {
    match path {
        None => Ok(Params::benchmark()),
        Some(p) => {
            // fields missing from the file keep their benchmark values
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let given: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing params {}", p.display()))?;
            let serde_json::Value::Object(given) = given else {
                bail!("params file {} is not a JSON object", p.display());
            };
            let mut merged = serde_json::to_value(Params::benchmark())?;
            for (key, value) in given {
                merged[key] = value;
            }
            serde_json::from_value(merged).with_context(|| format!("parsing params {}", p.display()))
        }
    }
}

fn synth(args: &SynthArgs) -> anyhow::Result<bool> {
    let mut params = load_params(args.params.as_ref())?;
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    let spec = match args.mode {
        ModeArg::Archimedean => TruthSpec::archimedean(args.t_star.clone()),
        ModeArg::Rational => TruthSpec::rational(args.t_star.clone(), args.q_star),
    };
    let inst = gen_instance(&params, &spec)?;
    if matches!(args.output.format, Format::Csv) {
        bail!("synth writes JSON instances only");
    }
    let emitted = if args.blind { inst.blind() } else { inst.clone() };
    let audit = audit_instance(&inst);
    let summary = json!({
        "sites": inst.cfg.len(),
        "edges": inst.edges.len(),
        "blind": args.blind,
        "audit_pass": audit.pass(),
    });
    match &args.output.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join("instance.json"), emitted.to_json() + "\n")?;
            if args.blind {
                let truth = serde_json::to_string_pretty(&inst.truth)?;
                fs::write(dir.join("truth.json"), truth + "\n")?;
            }
            let report = Report::new("synth", &inst, audit.pass(), summary);
            args.output.emit(&report, None)?;
        }
        None => report::print(&(emitted.to_json() + "\n"))?,
    }
    Ok(audit.pass())
}

fn audit(args: &AuditArgs) -> anyhow::Result<bool> {
    let inst = load_instance(&args.instance)?;
    let result = audit_instance(&inst);
    let csv = std::iter::once("check,pass,failures,first_failure".to_string())
        .chain(result.checks.iter().map(|c| {
            format!(
                "{},{},{},{}",
                c.name,
                c.pass,
                c.failures,
                report::csv_field(c.first_failure.as_deref().unwrap_or(""))
            )
        }))
        .collect();
    let ok = result.pass();
    args.output.emit(&Report::new("audit", &inst, ok, &result), Some(csv))?;
    Ok(ok)
}

#[derive(Serialize)]
struct BoundsResult {
    k: usize,
    paths: usize,
    rows: usize,
    failures: usize,
    certificates: Vec<CertificateRow>,
}

fn verify_bounds(args: &BoundsArgs) -> anyhow::Result<bool> {
    let inst = load_instance(&args.instance)?;
    let eps = inst.params.eps_edge.clone();
    let mut paths = Vec::new();
    for start in 0..inst.cfg.len() {
        if paths.len() >= args.max_paths {
            break;
        }
        let found = enumerate_split_paths(&inst.cfg, &inst.edges, start, args.k, args.per_start)?;
        paths.extend(found.paths);
    }
    paths.truncate(args.max_paths);
    let mut rows = Vec::new();
    for (id, path) in paths.iter().enumerate() {
        let pp = path.prepath(&eps)?;
        let py = build_pyramid(&pp)?;
        for r in verify_pyramid(&pp, &py)?.rows {
            rows.push(CertificateRow {
                path_id: id,
                kind: "pyramid",
                j: r.j,
                m: 0,
                actual: r.actual,
                bound: r.predicted,
                pass: r.pass,
            });
        }
        rows.extend(certify_path(id, path, &eps)?);
    }
    let failures = rows.iter().filter(|r| !r.pass).count();
    let csv = std::iter::once(CertificateRow::CSV_HEADER.to_string())
        .chain(rows.iter().map(CertificateRow::csv))
        .collect();
    let result = BoundsResult {
        k: args.k,
        paths: paths.len(),
        rows: rows.len(),
        failures,
        certificates: rows,
    };
    let ok = failures == 0;
    args.output.emit(&Report::new("verify-bounds", &inst, ok, &result), Some(csv))?;
    Ok(ok)
}

#[derive(Serialize)]
struct CloseRow {
    r: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<CloseProducts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
    within: Option<bool>,
}

#[derive(Serialize)]
struct CensusResult {
    k: usize,
    gate_applicable: bool,
    truncated_starts: usize,
    censuses: Vec<Census>,
    close_products: Vec<CloseRow>,
}

fn census(args: &CensusArgs) -> anyhow::Result<bool> {
    let inst = load_instance(&args.instance)?;
    let params = &inst.params;
    let gate = params.path_count_gate(args.k);
    let mut censuses = Vec::new();
    let mut truncated_starts = 0;
    for start in 0..inst.cfg.len() {
        let found = enumerate_split_paths(&inst.cfg, &inst.edges, start, args.k, args.limit)?;
        truncated_starts += usize::from(found.truncated);
        if !found.paths.is_empty() {
            censuses.push(collision_census(&found.paths, 2 * params.p, gate)?);
        }
    }
    let mut close_products = Vec::new();
    if let Some(n) = &args.close_n {
        for r in 1..=3 {
            close_products.push(match count_close_products(r, params.p, n, &Rational::from_integer(1.into()), 100_000_000) {
                Ok(c) => CloseRow {
                    r,
                    within: Some(c.within(&params.c_cal)),
                    counts: Some(c),
                    skipped: None,
                },
                Err(e) => CloseRow {
                    r,
                    counts: None,
                    skipped: Some(e.to_string()),
                    within: None,
                },
            });
        }
    }
    let ok = censuses.iter().all(Census::pass) && close_products.iter().all(|c| c.within != Some(false));
    let mut csv = vec!["start,end,paths,within_budget,sharing_pairs,distinct_pairs,min_ratio_gap,violations".to_string()];
    for c in &censuses {
        for e in &c.endpoints {
            csv.push(format!(
                "{},{},{},{},{},{},{},{}",
                c.start.unwrap_or(0),
                e.end,
                e.paths,
                e.within_budget,
                e.sharing_pairs,
                e.distinct_pairs,
                e.min_ratio_gap.as_ref().map(rational::to_string).unwrap_or_default(),
                e.violations
            ));
        }
    }
    let result = CensusResult {
        k: args.k,
        gate_applicable: gate,
        truncated_starts,
        censuses,
        close_products,
    };
    args.output.emit(&Report::new("census", &inst, ok, &result), Some(csv))?;
    Ok(ok)
}

#[derive(Serialize)]
struct RecoverResult<'a> {
    blind: bool,
    #[serde(flatten)]
    report: &'a RecoveryReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<Score>,
}

fn estimate_rows(report: &RecoveryReport) -> Vec<String> {
    let accepted = |e: &LocalEstimate| report.global.as_ref().is_some_and(|g| g.accepted.contains(&e.target));
    std::iter::once(format!("{},accepted", LocalEstimate::CSV_HEADER))
        .chain(report.estimates.iter().map(|e| format!("{},{}", e.csv(), accepted(e))))
        .collect()
}

fn recover_cmd(args: &RecoverArgs) -> anyhow::Result<bool> {
    let full = load_instance(&args.instance)?;
    let inst = if args.blind { full.blind() } else { full };
    let config = RecoverConfig {
        k: args.k,
        min_common_witness: args.min_witness,
        d_min: args.d_min.unwrap_or(inst.params.d_min),
        path_limit: args.path_limit,
        tol_t: args.tol_t.clone(),
        consensus: args.consensus.clone(),
        ..RecoverConfig::default()
    };
    let report = recover(&inst, &config)?;
    let score = report
        .global
        .as_ref()
        .filter(|_| inst.truth.is_some())
        .map(|g| score_recovery(g, inst.truth.as_ref(), report.targets));
    let ok = report.global.is_some();
    let result = RecoverResult {
        blind: args.blind,
        report: &report,
        score,
    };
    args.output.emit(&Report::new("recover", &inst, ok, &result), Some(estimate_rows(&report)))?;
    Ok(ok)
}

#[derive(Serialize)]
struct ScoreResult {
    score: Score,
    accepted: usize,
    targets: usize,
    residues_consistent: usize,
}

fn score(args: &ScoreArgs) -> anyhow::Result<bool> {
    let inst = load_instance(&args.instance)?;
    let text = fs::read_to_string(&args.recovery).with_context(|| format!("reading {}", args.recovery.display()))?;
    let line = text
        .lines()
        .rev()
        .find(|l| l.trim_start().starts_with('{'))
        .context("no JSON report in the recovery file")?;
    let envelope: serde_json::Value = serde_json::from_str(line)?;
    let report: RecoveryReport = serde_json::from_value(envelope["result"].clone()).context("not a recover report")?;
    let truth: Option<GroundTruth> = match &args.truth {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => inst.truth.clone(),
    };
    let Some(global) = &report.global else {
        bail!("the recovery report has no global frequency: {}", report.failure.unwrap_or_default());
    };
    let score = score_recovery(global, truth.as_ref(), report.targets);
    let consistent = truth.as_ref().map_or(0, |t| {
        report
            .estimates
            .iter()
            .filter(|e| global.accepted.contains(&e.target) && residues_consistent(e, t))
            .count()
    });
    let ok = matches!(score, Score::Scored { .. });
    let csv = match &score {
        Score::Scored {
            rel_t_error,
            q_match,
            coverage,
        } => vec![
            "rel_T_error,q_match,coverage,accepted,targets,residues_consistent".to_string(),
            format!(
                "{},{},{},{},{},{}",
                rational::to_string(rel_t_error),
                q_match,
                coverage,
                global.accepted.len(),
                report.targets,
                consistent
            ),
        ],
        Score::TruthUnavailable => vec!["status".to_string(), "truth_unavailable".to_string()],
    };
    let result = ScoreResult {
        score,
        accepted: global.accepted.len(),
        targets: report.targets,
        residues_consistent: consistent,
    };
    args.output.emit(&Report::new("score", &inst, ok, &result), Some(csv))?;
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, outcome) = match &cli.command {
        Command::Synth(a) => ("synth", synth(a)),
        Command::Audit(a) => ("audit", audit(a)),
        Command::VerifyBounds(a) => ("verify-bounds", verify_bounds(a)),
        Command::Census(a) => ("census", census(a)),
        Command::Recover(a) => ("recover", recover_cmd(a)),
        Command::Score(a) => ("score", score(a)),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let _ = report::print(&(report::error_json(name, &e) + "\n"));
            eprintln!("phaselab {name}: {e:#}");
            ExitCode::from(2)
        }
    }
}
