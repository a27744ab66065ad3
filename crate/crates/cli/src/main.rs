//! `metamr`: generate workloads, run join plans, evaluate bounds, replay the
//! worked examples and check runs against a reference join.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use metamr_core::config::PlanConfig;
use metamr_core::io::write_relation;
use metamr_core::joins::{equijoin_classic, equijoin_meta, hierarchical_equijoin, JoinOptions};
use metamr_core::oracle::{canonical, for_rounds};
use metamr_core::report::{build_report, report_json, ReportContext};
use metamr_core::workloads::fixtures::{fig2, fig5, fig6, knn_points, KNN_K};
use metamr_core::workloads::{gen_chain, gen_relations, knn_meta, shortest_path_meta, GenSpec, Shape};
use metamr_core::{theorem_bound, BoundKind, BoundParams, Channel, CostLedger, CostModel, JobResult, Mode, Topology};
use serde_json::json;

#[derive(Parser)]
#[command(name = "metamr", version, about = "Metadata-first MapReduce joins with an exact cost ledger")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write seeded synthetic relations as TSV files.
    Gen(GenArgs),
    /// Run a TOML job file and report its costs.
    Run(RunArgs),
    /// Evaluate a closed-form cost bound.
    Bound(BoundArgs),
    /// Replay a built-in example.
    Demo(DemoArgs),
    /// Run a job file and compare its output with a nested-loop join.
    Verify(RunArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Directory the relation files go to.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    c_bits: u64,
    #[arg(long, default_value_t = 256)]
    w_bits: u64,
    #[arg(long, default_value_t = 50)]
    distinct_keys: usize,
    #[arg(long, default_value_t = 0.0)]
    zipf: f64,
    #[arg(long, default_value_t = 0)]
    heavy_hitters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit the three-tuple equijoin example instead of random relations.
    #[arg(long)]
    figure2: bool,
    /// Emit a chain of this many relations R1(K1, K2, P1), R2(K2, K3, P2), ...
    #[arg(long)]
    chain: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Classic,
    Meta,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Classic => Mode::Classic,
            ModeArg::Meta => Mode::Meta,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Job file; relation paths in it are relative to the file.
    config: PathBuf,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Count tuples instead of bits.
    #[arg(long)]
    unit_cost: bool,
    /// Map rows on all cores.
    #[arg(long)]
    parallel: bool,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    /// two-way, skew, hashed, multiway, or a classic-* counterpart.
    kind: BoundKind,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    c: Option<u64>,
    #[arg(long)]
    w: Option<u64>,
    #[arg(long)]
    h: Option<u64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    p: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    Fig2,
    Fig5,
    Knn,
    Socialgraph,
}

#[derive(Args)]
struct DemoArgs {
    name: DemoName,
    #[arg(long, value_enum, default_value = "meta")]
    mode: ModeArg,
    #[arg(long)]
    q: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Count tuples instead of bits (fig2 and fig5 always do).
    #[arg(long)]
    unit_cost: bool,
    #[arg(long)]
    report: Option<PathBuf>,
}

enum Outcome {
    Done,
    Mismatch,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Mismatch) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Gen(a) => gen(a),
        Command::Run(a) => run(a),
        Command::Bound(a) => bound(a),
        Command::Demo(a) => demo(a),
        Command::Verify(a) => verify(a),
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen(a: GenArgs) -> Result<Outcome> {
    let spec = GenSpec {
        n: if a.figure2 { 3 } else { a.n },
        c_bits: a.c_bits,
        w_bits: a.w_bits,
        distinct_keys: a.distinct_keys,
        zipf_exponent: a.zipf,
        heavy_hitters: a.heavy_hitters,
        seed: a.seed,
        shape: if a.figure2 { Shape::Figure2 } else { Shape::Random },
    };
    let rels = match a.chain {
        Some(k) => gen_chain(&spec, k)?,
        None => gen_relations(&spec)?,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for rel in &rels {
        println!("{}", write_relation(rel, &a.out)?.display());
    }
    Ok(Outcome::Done)
}

fn load(a: &RunArgs) -> Result<(PlanConfig, PathBuf)> {
    let mut cfg = PlanConfig::load(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    if let Some(q) = a.q {
        cfg.q = q;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(m) = a.mode {
        cfg.mode = m.into();
        if cfg.mode == Mode::Classic {
            cfg.hashed = false;
        }
    }
    cfg.unit_cost |= a.unit_cost;
    cfg.parallel |= a.parallel;
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((cfg, base))
}

fn run(a: RunArgs) -> Result<Outcome> {
    let (cfg, base) = load(&a)?;
    let (_, report) = cfg.run(&base)?;
    emit(&report_json(&report)?, a.report.as_deref())?;
    Ok(Outcome::Done)
}

fn verify(a: RunArgs) -> Result<Outcome> {
    let (cfg, base) = load(&a)?;
    let (result, report) = cfg.run(&base)?;
    let relations = cfg.load_relations(&base)?;
    let (attrs, expected) = for_rounds(&relations, &cfg.rounds())?;
    let got = canonical(&result.outputs);
    let want = canonical(&expected);
    if let Some(p) = &a.report {
        emit(&report_json(&report)?, Some(p))?;
    }
    if attrs == result.attributes && got == want {
        println!("verify: ok, {} outputs match the reference join", got.len());
        Ok(Outcome::Done)
    } else {
        let missing = want.iter().filter(|w| !got.contains(w)).count();
        let extra = got.iter().filter(|g| !want.contains(g)).count();
        println!(
            "verify: MISMATCH, {} outputs vs {} expected ({missing} missing, {extra} unexpected)",
            got.len(),
            want.len()
        );
        Ok(Outcome::Mismatch)
    }
}

fn bound(a: BoundArgs) -> Result<Outcome> {
    let p = BoundParams {
        n: a.n,
        c: a.c,
        w: a.w,
        h: a.h,
        r: a.r,
        m: a.m,
        k: a.k,
        p: a.p,
    };
    println!("{}", theorem_bound(a.kind, &p)?);
    Ok(Outcome::Done)
}

fn job_report(
    result: &JobResult,
    mode: Mode,
    q: u64,
    cost: CostModel,
    bound: BoundKind,
    classic_total: Option<u64>,
) -> Result<String> {
    let ctx = ReportContext {
        q,
        cost,
        bounds: vec![bound],
        classic_total,
    };
    Ok(report_json(&build_report(result, mode, &ctx)?)?)
}

fn ledger_json(ledger: &CostLedger) -> serde_json::Value {
    json!({
        "total": ledger.total(),
        "metadata_total": ledger.metadata_total(),
        "data_total": ledger.data_total(),
        "metadata_records": ledger.metadata_records(),
        "signals": ledger.signals(),
        "rounds": ledger
            .rounds()
            .iter()
            .map(|r| {
                let channels: serde_json::Map<String, serde_json::Value> = Channel::ALL
                    .iter()
                    .map(|&c| (c.name().to_string(), json!(r.costs.channel(c))))
                    .collect();
                json!({ "label": r.label, "total": r.costs.total(), "channels": channels })
            })
            .collect::<Vec<_>>(),
    })
}

fn demo(a: DemoArgs) -> Result<Outcome> {
    let mode: Mode = a.mode.into();
    let text = match a.name {
        DemoName::Fig2 => {
            let f = fig2();
            let q = a.q.unwrap_or(1 << 20);
            let opts = JoinOptions {
                cost: CostModel::Units { per_tuple: 1 },
                seed: a.seed,
                ..Default::default()
            };
            let top = Topology::single_site([&f.x, &f.y]);
            let classic = equijoin_classic(&f.x, &f.y, "B", q, &top, &opts)?;
            match mode {
                Mode::Classic => job_report(&classic, mode, q, opts.cost, BoundKind::ClassicTwoWay, None)?,
                Mode::Meta => {
                    let meta = equijoin_meta(&f.x, &f.y, "B", q, &top, &opts)?;
                    let total = Some(classic.ledger.total());
                    job_report(&meta, mode, q, opts.cost, BoundKind::TwoWay, total)?
                }
            }
        }
        DemoName::Fig5 => {
            let f = fig5();
            let q = a.q.unwrap_or(1 << 20);
            let opts = JoinOptions {
                cost: CostModel::Units { per_tuple: 4 },
                seed: a.seed,
                ..Default::default()
            };
            let clusters: Vec<(&str, Vec<_>)> = f.clusters.iter().map(|(s, r)| (s.as_str(), r.clone())).collect();
            let top = f.topology();
            let classic = hierarchical_equijoin(&clusters, "B", Mode::Classic, q, &top, &opts)?;
            match mode {
                Mode::Classic => job_report(&classic, mode, q, opts.cost, BoundKind::ClassicMultiway, None)?,
                Mode::Meta => {
                    let meta = hierarchical_equijoin(&clusters, "B", Mode::Meta, q, &top, &opts)?;
                    let total = Some(classic.ledger.total());
                    job_report(&meta, mode, q, opts.cost, BoundKind::Multiway, total)?
                }
            }
        }
        DemoName::Knn => {
            if mode == Mode::Classic {
                bail!("the knn demo runs on metadata only");
            }
            let (r, s) = knn_points();
            let cost = demo_cost(a.unit_cost);
            let q = a.q.unwrap_or(4096);
            let res = knn_meta(&r, &s, &["x0", "x1"], KNN_K, q, &cost, false)?;
            let mut v = json!({
                "demo": "knn",
                "unit": cost.unit_name(),
                "k": KNN_K,
                "q": q,
                "partitions": res.partitions,
                "neighbors": res.neighbors,
                "fetched_r": res.fetched_r,
                "fetched_s": res.fetched_s,
                "rounds_executed": res.rounds_executed,
            });
            v["ledger"] = ledger_json(&res.ledger);
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
        DemoName::Socialgraph => {
            if mode == Mode::Classic {
                bail!("the socialgraph demo runs on metadata only");
            }
            let g = fig6();
            let cost = demo_cost(a.unit_cost);
            let res = shortest_path_meta(&g, "P1", "P6", &cost, false)?;
            let mut v = json!({
                "demo": "socialgraph",
                "unit": cost.unit_name(),
                "from": "P1",
                "to": "P6",
                "hops": res.hops,
                "path": res.nodes,
                "fetched": res.fetched,
                "rounds_executed": res.rounds_executed,
            });
            v["ledger"] = ledger_json(&res.ledger);
            format!("{}\n", serde_json::to_string_pretty(&v)?)
        }
    };
    emit(&text, a.report.as_deref())?;
    Ok(Outcome::Done)
}

fn demo_cost(units: bool) -> CostModel {
    if units {
        CostModel::Units { per_tuple: 1 }
    } else {
        CostModel::default()
    }
}
