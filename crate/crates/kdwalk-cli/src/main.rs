//! Experiment runner: every module of the toolkit behind reproducible
//! commands with machine-readable output. All randomness flows from the
//! single --seed through named deterministic generators, so identical
//! configs produce byte-identical output files.

mod verify;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use kdwalk::driver;
use kdwalk::full_sim::Instance;
use kdwalk::store::{self, StoreParams};
use kdwalk::walk::{self, WalkParams};
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Subspace,
    Spectrum,
    Gengrover,
    Hoffman,
    Store,
    Dwise,
    Driver,
    All,
}

#[derive(Parser)]
#[command(name = "kdwalk", version, about = "Quantum-walk k-distinctness toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Success curve and query ledger of the single-solution walk.
    Walk {
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        k: u32,
        /// Alphabet size (defaults to N).
        #[arg(long = "M")]
        m: Option<u64>,
        /// Walk steps per iteration (defaults to ⌈π√r/(3√k)⌉).
        #[arg(long)]
        t2: Option<u64>,
        /// Largest outer iteration count (defaults to twice the spectral t1).
        #[arg(long = "t1-max")]
        t1_max: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite; exits nonzero if any check fails.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long = "N")]
        n: Option<u64>,
        #[arg(long)]
        r: Option<u64>,
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        histories: Option<u32>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide k-distinctness on an instance, or scan the query exponent.
    Distinct {
        /// Instance file: one integer per line, or a JSON array.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Generate a planted instance of this length instead of reading one.
        #[arg(long = "planted-n")]
        planted_n: Option<u64>,
        /// Number of planted disjoint collisions.
        #[arg(long = "planted-collisions", default_value_t = 1)]
        planted_collisions: usize,
        /// Alphabet override for file instances.
        #[arg(long = "M")]
        m: Option<u64>,
        #[arg(long)]
        r: Option<u64>,
        #[arg(long, default_value_t = 2)]
        k: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fit the log-log query slope over --grid instead of deciding one
        /// instance.
        #[arg(long = "scan-exponent", default_value_t = false)]
        scan_exponent: bool,
        /// Comma-separated instance sizes, e.g. 1e3,1e4,1e5,1e6.
        #[arg(long)]
        grid: Option<String>,
        /// Comma-separated memory sizes for a tradeoff sweep at fixed --N.
        #[arg(long = "sweep-r")]
        sweep_r: Option<String>,
        /// Instance length for --sweep-r.
        #[arg(long = "N")]
        n: Option<u64>,
        #[arg(long, default_value_t = 3)]
        trials: u32,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-workload failure-rate measurement for the canonical store.
    StoreBench {
        #[arg(long = "N")]
        n: u64,
        #[arg(long)]
        r: u64,
        #[arg(long, default_value_t = 10_000)]
        ops: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "budget-c")]
        budget_c: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_output(out: &Option<PathBuf>, content: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{content}"),
    }
    Ok(())
}

fn csv_table(config: &serde_json::Value, header: &str, rows: &[String]) -> String {
    let mut s = format!("# {config}\n{header}\n");
    for row in rows {
        s.push_str(row);
        s.push('\n');
    }
    s
}

fn json_doc<T: Serialize>(config: &serde_json::Value, body: &T) -> anyhow::Result<String> {
    let doc = json!({ "config": config, "result": body });
    Ok(format!("{}\n", serde_json::to_string_pretty(&doc)?))
}

fn parse_u64_list(text: &str) -> anyhow::Result<Vec<u64>> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok.parse().with_context(|| format!("bad number {tok:?}"))?;
            if v < 1.0 || v.fract().abs() > 1e-6 * v.max(1.0) {
                bail!("{tok:?} is not a positive integer");
            }
            Ok(v.round() as u64)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_walk(
    n: u64,
    r: u64,
    k: u32,
    m: Option<u64>,
    t2: Option<u64>,
    t1_max: Option<u64>,
    seed: u64,
    format: Format,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let m = m.unwrap_or(n);
    let t2 = t2.unwrap_or_else(|| WalkParams::default_t2(r, k));
    let params = WalkParams::new(n, m, r, k, 0, t2)?;
    let t1_star = walk::spectral_t1(&params)?;
    let t1_max = t1_max.unwrap_or(2 * t1_star);
    let config = json!({
        "command": "walk",
        "version": env!("CARGO_PKG_VERSION"),
        "N": n, "M": m, "r": r, "k": k, "t2": t2,
        "t1_max": t1_max, "spectral_t1": t1_star, "seed": seed,
    });
    let curve = walk::success_curve(&params, t1_max)?;
    let content = match format {
        Format::Csv => {
            let rows: Vec<String> = curve
                .iter()
                .map(|(t1, p)| format!("{t1},{p},{}", r + 2 * t1 * t2))
                .collect();
            csv_table(&config, "t1,success_prob,total_queries", &rows)
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Row {
                t1: u64,
                success_prob: f64,
                total_queries: u64,
            }
            let rows: Vec<Row> = curve
                .iter()
                .map(|&(t1, p)| Row { t1, success_prob: p, total_queries: r + 2 * t1 * t2 })
                .collect();
            json_doc(&config, &rows)?
        }
    };
    write_output(&out, &content)?;
    if out.is_some() {
        let peak = curve
            .iter()
            .cloned()
            .fold((0u64, 0.0f64), |best, (t1, p)| if p > best.1 { (t1, p) } else { best });
        eprintln!(
            "walk: spectral t1 = {t1_star}, success there = {:.4}, curve peak {:.4} at t1 = {}",
            curve.get(t1_star as usize).map(|&(_, p)| p).unwrap_or(f64::NAN),
            peak.1,
            peak.0
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    suite: Suite,
    n: Option<u64>,
    r: Option<u64>,
    k: Option<u32>,
    histories: Option<u32>,
    trials: Option<u32>,
    seed: u64,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut checks = Vec::new();
    let mut ran: Vec<&str> = Vec::new();
    if matches!(suite, Suite::Subspace | Suite::All) {
        ran.push("subspace");
        checks.extend(verify::subspace_suite(n.unwrap_or(6), r.unwrap_or(2), k.unwrap_or(2))?);
    }
    if matches!(suite, Suite::Spectrum | Suite::All) {
        ran.push("spectrum");
        checks.extend(verify::spectrum_suite(
            n.unwrap_or(8000),
            r.unwrap_or(400),
            k.unwrap_or(2),
        )?);
    }
    if matches!(suite, Suite::Gengrover | Suite::All) {
        ran.push("gengrover");
        checks.extend(verify::gengrover_suite(trials.unwrap_or(50), seed ^ 0x6e67)?);
    }
    if matches!(suite, Suite::Hoffman | Suite::All) {
        ran.push("hoffman");
        checks.extend(verify::hoffman_suite(trials.unwrap_or(100), seed ^ 0x6877)?);
    }
    if matches!(suite, Suite::Store | Suite::All) {
        ran.push("store");
        checks.extend(verify::store_suite(
            n.unwrap_or(1024),
            r.unwrap_or(128),
            histories.unwrap_or(1000),
            seed ^ 0x5f0e,
        )?);
    }
    if matches!(suite, Suite::Dwise | Suite::All) {
        ran.push("dwise");
        checks.extend(verify::dwise_suite()?);
    }
    if matches!(suite, Suite::Driver | Suite::All) {
        ran.push("driver");
        checks.extend(verify::driver_suite(
            n.unwrap_or(60),
            r.unwrap_or(16),
            k.unwrap_or(2),
            trials.unwrap_or(200),
            seed ^ 0xd21e,
        )?);
    }
    let all_pass = checks.iter().all(|c| c.pass);
    let config = json!({
        "command": "verify",
        "version": env!("CARGO_PKG_VERSION"),
        "suites": ran, "N": n, "r": r, "k": k,
        "histories": histories, "trials": trials, "seed": seed,
    });
    let doc = json!({ "config": config, "checks": checks, "all_pass": all_pass });
    let content = format!("{}\n", serde_json::to_string_pretty(&doc)?);
    write_output(&out, &content)?;
    for c in &checks {
        eprintln!(
            "  [{}] {}: measured {} vs bound {}",
            if c.pass { "ok" } else { "FAIL" },
            c.name,
            c.measured,
            c.bound
        );
    }
    if !all_pass {
        std::process::exit(1);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_distinct(
    input: Option<PathBuf>,
    planted_n: Option<u64>,
    planted_collisions: usize,
    m: Option<u64>,
    r: Option<u64>,
    k: u32,
    seed: u64,
    scan_exponent: bool,
    grid: Option<String>,
    sweep_r: Option<String>,
    n: Option<u64>,
    trials: u32,
    format: Format,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    if scan_exponent {
        let grid = parse_u64_list(&grid.context("--scan-exponent needs --grid")?)?;
        let scan = driver::exponent_scan(k, &grid, seed, trials)?;
        let config = json!({
            "command": "distinct --scan-exponent",
            "version": env!("CARGO_PKG_VERSION"),
            "k": k, "grid": grid, "trials": trials, "seed": seed,
            "slope": scan.slope,
        });
        let content = match format {
            Format::Csv => {
                let rows: Vec<String> = scan
                    .rows
                    .iter()
                    .map(|w| {
                        format!(
                            "{},{},{},{},{}",
                            w.n, w.r, w.median_queries, w.mean_queries, w.success_rate
                        )
                    })
                    .collect();
                csv_table(&config, "N,r,median_queries,mean_queries,success_rate", &rows)
            }
            Format::Json => json_doc(&config, &scan)?,
        };
        write_output(&out, &content)?;
        eprintln!("exponent scan: k = {k}, fitted slope = {:.4}", scan.slope);
        return Ok(());
    }
    if let Some(list) = sweep_r {
        let n = n.context("--sweep-r needs --N")?;
        let r_values = parse_u64_list(&list)?;
        let rows = driver::memory_sweep(n, k, &r_values, seed, trials)?;
        let config = json!({
            "command": "distinct --sweep-r",
            "version": env!("CARGO_PKG_VERSION"),
            "N": n, "k": k, "r_values": r_values, "trials": trials, "seed": seed,
        });
        let content = match format {
            Format::Csv => {
                let body: Vec<String> = rows
                    .iter()
                    .map(|w| {
                        format!("{},{},{},{}", w.r, w.median_queries, w.mean_queries, w.shape)
                    })
                    .collect();
                csv_table(&config, "r,median_queries,mean_queries,shape", &body)
            }
            Format::Json => json_doc(&config, &rows)?,
        };
        write_output(&out, &content)?;
        return Ok(());
    }

    let instance = match (&input, planted_n) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let inst = Instance::parse(&text)?;
            match m {
                Some(m) => Instance::new(inst.values().to_vec(), m)?,
                None => inst,
            }
        }
        (None, Some(pn)) => {
            let mut rng = rand::SeedableRng::seed_from_u64(seed);
            Instance::planted(pn, k, planted_collisions, &mut rng)?
        }
        _ => bail!("provide exactly one of --input or --planted-n"),
    };
    let r = r.unwrap_or_else(|| driver::optimal_r(instance.len(), k));
    let result = driver::run_k_distinctness(&instance, r, k, seed)?;
    match &result.found {
        Some(found) => {
            let strs: Vec<String> = found.iter().map(|i| i.to_string()).collect();
            println!("k-collision: {}", strs.join(","));
        }
        None => println!("none"),
    }
    println!(
        "queries: total {} (setup {}, walk {}, classical {}, grover {})",
        result.ledger.total(),
        result.ledger.setup_queries,
        result.ledger.walk_queries,
        result.ledger.classical_queries,
        result.ledger.grover_charged
    );
    if out.is_some() {
        let config = json!({
            "command": "distinct",
            "version": env!("CARGO_PKG_VERSION"),
            "input": input.as_ref().map(|p| p.display().to_string()),
            "planted_n": planted_n,
            "planted_collisions": planted_collisions,
            "N": instance.len(), "M": instance.alphabet(),
            "r": r, "k": k, "seed": seed,
        });
        write_output(&out, &json_doc(&config, &result)?)?;
    }
    Ok(())
}

fn cmd_store_bench(
    n: u64,
    r: u64,
    ops: u64,
    seed: u64,
    budget_c: Option<f64>,
    format: Format,
    out: Option<PathBuf>,
) -> anyhow::Result<()> {
    let mut params = StoreParams::new(n, n, r, 2, seed)?;
    if let Some(c) = budget_c {
        params = params.with_budget_c(c);
    }
    let stats = store::measure_failure_rate(params, ops, seed ^ 0xbe7c)?;
    let config = json!({
        "command": "store-bench",
        "version": env!("CARGO_PKG_VERSION"),
        "N": n, "r": r, "ops": ops, "seed": seed,
        "budget_c": budget_c.unwrap_or(1.0),
    });
    let content = match format {
        Format::Csv => csv_table(
            &config,
            "ops,failures,fraction,max_consumed,budget",
            &[format!(
                "{},{},{},{},{}",
                stats.ops, stats.failures, stats.fraction, stats.max_consumed, stats.budget
            )],
        ),
        Format::Json => json_doc(&config, &stats)?,
    };
    write_output(&out, &content)?;
    eprintln!(
        "store-bench: {} failures / {} ops (max step use {} of {})",
        stats.failures, stats.ops, stats.max_consumed, stats.budget
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Command::Walk { n, r, k, m, t2, t1_max, seed, format, out } => {
            cmd_walk(n, r, k, m, t2, t1_max, seed, format, out)
        }
        Command::Verify { suite, n, r, k, histories, trials, seed, out } => {
            cmd_verify(suite, n, r, k, histories, trials, seed, out)
        }
        Command::Distinct {
            input,
            planted_n,
            planted_collisions,
            m,
            r,
            k,
            seed,
            scan_exponent,
            grid,
            sweep_r,
            n,
            trials,
            format,
            out,
        } => cmd_distinct(
            input,
            planted_n,
            planted_collisions,
            m,
            r,
            k,
            seed,
            scan_exponent,
            grid,
            sweep_r,
            n,
            trials,
            format,
            out,
        ),
        Command::StoreBench { n, r, ops, seed, budget_c, format, out } => {
            cmd_store_bench(n, r, ops, seed, budget_c, format, out)
        }
    }
}
