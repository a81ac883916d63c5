//! Command-line front end for the frontrunning detection engine.
//!
//! Subcommands cover the whole pipeline: `synth` fabricates a ground-truth
//! chain fixture, `scan` runs one of the three detectors over a chain range,
//! `cluster` links attacks that share actors or bytecode, `compete` finds
//! sandwiches fighting over one victim, `report` renders summary tables, and
//! `score` grades detector output against a fixture manifest.
//!
//! Machine-readable results (NDJSON, CSV) go to `--out` or stdout; run
//! statistics and warnings go to stderr. Exit codes: 0 success, 1 usage
//! error, 2 bad input data, 3 internal error.

use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use frontrun::attacker_graph::{cluster_attacks, AttackRef};
use frontrun::chain_model::{ChainSnapshot, PriceTable};
use frontrun::config::{EngineConfig, SourceConfig};
use frontrun::displacement::scan_displacement;
use frontrun::ingestion::{load_snapshot, read_records, FixtureSource, Record};
use frontrun::insertion::{detect_competition, scan_insertion, GasTokenConfig, InsertionAttack};
use frontrun::report::{
    distribution_rows, read_attack_records, render_distribution_csv, render_weekday_hour_csv,
    render_yearly_csv, score_against_manifest, weekday_hour_matrix, write_attack_records,
    yearly_percentages, AttackRecord,
};
use frontrun::suppression::scan_suppression;
use frontrun::synthetic_chain::{generate, GeneratorConfig, GroundTruthManifest, ReplayOracle};
use frontrun::{Error, Result};

/// Detects displacement, sandwich-insertion, and block-stuffing suppression
/// attacks in blockchain history, and generates labeled test chains.
#[derive(Parser)]
#[command(name = "frontrun", version)]
struct Cli {
    /// TOML configuration file (chain source, prices, detector thresholds).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Worker threads for block-parallel stages (overrides the config file;
    /// 0 means one per core).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic chain with planted attacks and a
    /// ground-truth manifest.
    Synth {
        /// RNG seed; the same seed always yields byte-identical output.
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Chain length in blocks.
        #[arg(long, default_value_t = 200)]
        blocks: u64,

        /// How many of each attack to plant, e.g.
        /// `insertion=5,displacement=3,suppression=1`.
        #[arg(long, default_value = "insertion=5,displacement=3,suppression=1")]
        plant: String,

        /// Benign transfer transactions added to every block.
        #[arg(long, default_value_t = 2, value_name = "N")]
        noise: u32,

        /// Skip the near-miss decoys that exercise each detector's rejection
        /// paths.
        #[arg(long)]
        no_controls: bool,

        /// Directory that receives chain.ndjson, prices.csv, and
        /// manifest.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },

    /// Scan a chain range with one of the detectors; emits one NDJSON attack
    /// record per line.
    #[command(subcommand)]
    Scan(ScanCommand),

    /// Link attack records into attacker clusters via shared accounts and
    /// identical bot bytecode; emits one NDJSON cluster per line.
    Cluster {
        /// NDJSON attack records produced by `scan`.
        #[arg(long, value_name = "PATH")]
        attacks: PathBuf,

        /// Chain fixture whose code records supply bot bytecode.
        #[arg(long, value_name = "PATH")]
        code: Option<PathBuf>,

        /// Output path (stdout when omitted).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Group sandwich attacks that raced for the same victim trade; emits one
    /// NDJSON group per line.
    Compete {
        /// NDJSON attack records produced by `scan` (non-sandwich records are
        /// ignored).
        #[arg(long, value_name = "PATH")]
        attacks: PathBuf,

        /// Chain fixture whose code records supply bot bytecode for
        /// same-cluster detection.
        #[arg(long, value_name = "PATH")]
        code: Option<PathBuf>,

        /// Output path (stdout when omitted).
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },

    /// Render CSV summary tables (cost/profit distributions and, given a
    /// chain for timestamps, weekday-hour and yearly activity).
    Report {
        /// NDJSON attack records produced by `scan`.
        #[arg(long, value_name = "PATH")]
        attacks: PathBuf,

        /// Chain fixture used to resolve block timestamps (overrides the
        /// configured source).
        #[arg(long, value_name = "PATH")]
        chain: Option<PathBuf>,

        /// Daily price CSV (overrides the configured table).
        #[arg(long, value_name = "PATH")]
        prices: Option<PathBuf>,

        /// Directory that receives the CSV files.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },

    /// Grade attack records against a ground-truth manifest: precision,
    /// recall, and worst profit error per attack kind.
    Score {
        /// NDJSON attack records produced by `scan`.
        #[arg(long, value_name = "PATH")]
        attacks: PathBuf,

        /// manifest.json produced by `synth`.
        #[arg(long, value_name = "PATH")]
        manifest: PathBuf,
    },
}

#[derive(Subcommand)]
enum ScanCommand {
    /// Find transactions that copied a pending payload and outbid its sender.
    Displacement {
        #[command(flatten)]
        common: ScanArgs,

        /// Width of the sliding block window.
        #[arg(long, value_name = "BLOCKS")]
        window: Option<u64>,

        /// Distance between consecutive window starts.
        #[arg(long, value_name = "BLOCKS")]
        stride: Option<u64>,

        /// Minimum fraction of the victim's payload grams the copy must
        /// contain.
        #[arg(long, value_name = "FRACTION")]
        threshold: Option<f64>,
    },

    /// Find sandwich attacks: a buy in front of a victim trade and a matched
    /// sell behind it.
    Insertion {
        #[command(flatten)]
        common: ScanArgs,

        /// TOML file naming gas-token contracts credited against attack
        /// costs.
        #[arg(long, value_name = "PATH")]
        gas_token_config: Option<PathBuf>,
    },

    /// Find block-stuffing campaigns that crowd a victim contract's
    /// competitors out of blocks.
    Suppression {
        #[command(flatten)]
        common: ScanArgs,
    },
}

#[derive(Args)]
struct ScanArgs {
    /// Chain fixture to scan (overrides the configured source).
    #[arg(long, value_name = "PATH")]
    chain: Option<PathBuf>,

    /// Daily price CSV (overrides the configured table).
    #[arg(long, value_name = "PATH")]
    prices: Option<PathBuf>,

    /// First block of the scan range (defaults to the fixture's first block).
    #[arg(long, value_name = "BLOCK")]
    from: Option<u64>,

    /// Last block of the scan range, inclusive (defaults to the fixture's
    /// last block).
    #[arg(long, value_name = "BLOCK")]
    to: Option<u64>,

    /// NDJSON output path (stdout when omitted).
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => EngineConfig::from_path(path)?,
        None => EngineConfig::default(),
    };
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }

    match cli.command {
        Command::Synth {
            seed,
            blocks,
            plant,
            noise,
            no_controls,
            out,
        } => {
            let (insertions, displacements, suppressions) = parse_plant(&plant)?;
            let generator = GeneratorConfig {
                seed,
                blocks,
                insertions,
                displacements,
                suppressions,
                negative_controls: !no_controls,
                noise_txs_per_block: noise,
                ..GeneratorConfig::default()
            };
            let chain = generate(&generator)?;
            chain.write_to_dir(&out)?;
            eprintln!(
                "synth: {} blocks, {} planted attacks, {} controls -> {}",
                blocks,
                chain.manifest.planted.len(),
                chain.manifest.controls.len(),
                out.display()
            );
        }

        Command::Scan(scan) => run_scan(&cfg, scan)?,

        Command::Cluster { attacks, code, out } => {
            let records = read_attack_records(&attacks)?;
            let refs: Vec<AttackRef> = records.iter().map(AttackRef::from).collect();
            let code = match &code {
                Some(path) => codes_from_fixture(path)?,
                None => BTreeMap::new(),
            };
            let (graph, clusters, _) = cluster_attacks(&refs, &code)?;
            for warning in &graph.warnings {
                eprintln!("warning: {warning}");
            }
            emit_json_lines(&out, &clusters)?;
            eprintln!(
                "cluster: {} attacks -> {} clusters ({} nodes, {} edges)",
                refs.len(),
                clusters.len(),
                graph.nodes.len(),
                graph.edges.len()
            );
        }

        Command::Compete { attacks, code, out } => {
            let records = read_attack_records(&attacks)?;
            let refs: Vec<AttackRef> = records.iter().map(AttackRef::from).collect();
            let code = match &code {
                Some(path) => codes_from_fixture(path)?,
                None => BTreeMap::new(),
            };
            let (graph, _, ids) = cluster_attacks(&refs, &code)?;
            for warning in &graph.warnings {
                eprintln!("warning: {warning}");
            }
            let mut sandwiches: Vec<InsertionAttack> = Vec::new();
            let mut sandwich_ids: Vec<Option<u64>> = Vec::new();
            for (record, id) in records.iter().zip(&ids) {
                if let AttackRecord::Insertion(attack) = record {
                    sandwiches.push(attack.clone());
                    sandwich_ids.push(*id);
                }
            }
            let groups = detect_competition(&sandwiches, &sandwich_ids)?;
            emit_json_lines(&out, &groups)?;
            eprintln!(
                "compete: {} sandwiches -> {} contested victims",
                sandwiches.len(),
                groups.len()
            );
        }

        Command::Report {
            attacks,
            chain,
            prices,
            out,
        } => {
            apply_source_overrides(&mut cfg, &chain, &prices);
            let records = read_attack_records(&attacks)?;
            std::fs::create_dir_all(&out)?;
            let rows = distribution_rows(&records)?;
            let mut written = Vec::new();
            let dist_path = out.join("distributions.csv");
            std::fs::write(&dist_path, render_distribution_csv(&rows))?;
            written.push(dist_path);

            if cfg.source.is_some() && !records.is_empty() {
                let times = attack_times(&cfg, &records)?;
                let wh_path = out.join("weekday_hour.csv");
                std::fs::write(
                    &wh_path,
                    render_weekday_hour_csv(&weekday_hour_matrix(&times)),
                )?;
                written.push(wh_path);
                let yearly_path = out.join("yearly.csv");
                std::fs::write(&yearly_path, render_yearly_csv(&yearly_percentages(&times)))?;
                written.push(yearly_path);
            }
            for path in &written {
                println!("{}", path.display());
            }
        }

        Command::Score { attacks, manifest } => {
            let records = read_attack_records(&attacks)?;
            let manifest = GroundTruthManifest::from_path(&manifest)?;
            let report = score_against_manifest(&records, &manifest);
            print!("{}", report.render_text());
        }
    }
    Ok(())
}

fn run_scan(cfg: &EngineConfig, scan: ScanCommand) -> Result<()> {
    let common = match &scan {
        ScanCommand::Displacement { common, .. } => common,
        ScanCommand::Insertion { common, .. } => common,
        ScanCommand::Suppression { common } => common,
    };
    let mut cfg = cfg.clone();
    apply_source_overrides(&mut cfg, &common.chain, &common.prices);
    init_workers(&cfg);
    let prices = cfg.load_prices()?;
    let snapshot = load_chain(&cfg, common.from, common.to, prices)?;

    match scan {
        ScanCommand::Displacement {
            common,
            window,
            stride,
            threshold,
        } => {
            let mut detector = cfg.displacement.clone();
            if let Some(window) = window {
                detector.window_blocks = window;
            }
            if let Some(stride) = stride {
                detector.window_stride = stride;
            }
            if let Some(threshold) = threshold {
                detector.match_threshold = threshold;
            }
            let oracle = ReplayOracle::from_snapshot(&snapshot);
            let result = scan_displacement(&snapshot, &oracle, &detector)?;
            let records: Vec<AttackRecord> = result
                .attacks
                .into_iter()
                .map(AttackRecord::Displacement)
                .collect();
            emit_attacks(&common.out, &records)?;
            eprintln!(
                "displacement: {} attacks in blocks {}..={} ({} windows, {} pairs compared, {} simulations)",
                records.len(),
                snapshot.from_block,
                snapshot.to_block,
                result.windows_scanned,
                result.pairs_compared,
                result.simulations_run
            );
        }

        ScanCommand::Insertion {
            common,
            gas_token_config,
        } => {
            let mut detector = cfg.insertion.clone();
            if let Some(path) = &gas_token_config {
                detector.gas_tokens = load_gas_tokens(path)?;
            }
            let attacks = scan_insertion(&snapshot, &detector)?;
            let records: Vec<AttackRecord> =
                attacks.into_iter().map(AttackRecord::Insertion).collect();
            emit_attacks(&common.out, &records)?;
            eprintln!(
                "insertion: {} attacks in blocks {}..={}",
                records.len(),
                snapshot.from_block,
                snapshot.to_block
            );
        }

        ScanCommand::Suppression { common } => {
            let result = scan_suppression(&snapshot, &cfg.suppression)?;
            for warning in &result.warnings {
                eprintln!("warning: {warning}");
            }
            let records: Vec<AttackRecord> = result
                .attacks
                .into_iter()
                .map(AttackRecord::Suppression)
                .collect();
            emit_attacks(&common.out, &records)?;
            eprintln!(
                "suppression: {} attacks in blocks {}..={} ({} stuffing clusters)",
                records.len(),
                snapshot.from_block,
                snapshot.to_block,
                result.clusters_found
            );
        }
    }
    Ok(())
}

/// Replaces the configured chain source and price table with paths given on
/// the command line.
fn apply_source_overrides(
    cfg: &mut EngineConfig,
    chain: &Option<PathBuf>,
    prices: &Option<PathBuf>,
) {
    if let Some(path) = chain {
        cfg.source = Some(SourceConfig::Fixture { path: path.clone() });
    }
    if let Some(path) = prices {
        cfg.prices = Some(path.clone());
    }
}

fn init_workers(cfg: &EngineConfig) {
    if cfg.workers > 0 {
        // The global pool can only be built once per process; a second call
        // (e.g. in tests) fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global();
    }
}

/// Loads the requested block range. A fixture source fills in missing range
/// bounds from the blocks it holds; a remote source requires both.
fn load_chain(
    cfg: &EngineConfig,
    from: Option<u64>,
    to: Option<u64>,
    prices: PriceTable,
) -> Result<ChainSnapshot> {
    match &cfg.source {
        Some(SourceConfig::Fixture { path }) => {
            let source = FixtureSource::from_path(path)?;
            let (first, last) = source.block_range().ok_or_else(|| {
                Error::Data(format!("{}: fixture holds no blocks", path.display()))
            })?;
            load_snapshot(&source, from.unwrap_or(first), to.unwrap_or(last), prices)
        }
        Some(SourceConfig::Rpc { .. }) => {
            let (from, to) = match (from, to) {
                (Some(from), Some(to)) => (from, to),
                _ => {
                    return Err(Error::InvalidParameter(
                        "--from and --to are required with an RPC source".into(),
                    ))
                }
            };
            let source = cfg.open_source()?;
            load_snapshot(source.as_ref(), from, to, prices)
        }
        None => Err(Error::InvalidParameter(
            "no chain source configured; set [source] or pass --chain".into(),
        )),
    }
}

/// Parses `insertion=5,displacement=3,suppression=1` into per-kind counts;
/// omitted kinds default to zero.
fn parse_plant(spec: &str) -> Result<(u32, u32, u32)> {
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!(
                "--plant entry `{part}` is not of the form kind=count"
            ))
        })?;
        let key = key.trim();
        if !matches!(key, "insertion" | "displacement" | "suppression") {
            return Err(Error::InvalidParameter(format!(
                "--plant kind `{key}` is not one of insertion, displacement, suppression"
            )));
        }
        let count: u32 = value.trim().parse().map_err(|_| {
            Error::InvalidParameter(format!(
                "--plant count `{}` is not a whole number",
                value.trim()
            ))
        })?;
        if counts.insert(key, count).is_some() {
            return Err(Error::InvalidParameter(format!("--plant repeats `{key}`")));
        }
    }
    Ok((
        counts.get("insertion").copied().unwrap_or(0),
        counts.get("displacement").copied().unwrap_or(0),
        counts.get("suppression").copied().unwrap_or(0),
    ))
}

fn load_gas_tokens(path: &Path) -> Result<GasTokenConfig> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text)
        .map_err(|e| Error::Data(format!("gas token config {}: {e}", path.display())))
}

/// Collects the bytecode of every code record in a chain fixture.
fn codes_from_fixture(path: &Path) -> Result<BTreeMap<frontrun::chain_model::Address, Vec<u8>>> {
    let mut codes = BTreeMap::new();
    for record in read_records(path)? {
        if let Record::Code(code) = record {
            codes.insert(code.address, code.bytecode);
        }
    }
    Ok(codes)
}

/// Resolves each attack's block to a UTC timestamp via the configured chain.
fn attack_times(cfg: &EngineConfig, records: &[AttackRecord]) -> Result<Vec<DateTime<Utc>>> {
    let first = records.iter().map(|r| r.block_number()).min().unwrap_or(0);
    let last = records.iter().map(|r| r.block_number()).max().unwrap_or(0);
    // Timestamps do not need exchange rates, so a missing price table is
    // substituted with an empty one rather than reported.
    let prices = match cfg.load_prices() {
        Ok(table) => table,
        Err(_) => PriceTable::new(Vec::new())?,
    };
    let snapshot = load_chain(cfg, Some(first), Some(last), prices)?;
    records
        .iter()
        .map(|record| {
            let number = record.block_number();
            let seconds = snapshot
                .timestamp_of_block(number)
                .ok_or(Error::MissingBlock(number))?;
            DateTime::from_timestamp(seconds as i64, 0).ok_or_else(|| {
                Error::Data(format!(
                    "block {number} timestamp {seconds} is out of range"
                ))
            })
        })
        .collect()
}

fn open_sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn emit_attacks(out: &Option<PathBuf>, records: &[AttackRecord]) -> Result<()> {
    let mut sink = open_sink(out)?;
    write_attack_records(&mut sink, records)?;
    sink.flush()?;
    Ok(())
}

fn emit_json_lines<T: Serialize>(out: &Option<PathBuf>, items: &[T]) -> Result<()> {
    let mut sink = open_sink(out)?;
    for item in items {
        let line = serde_json::to_string(item)
            .map_err(|e| Error::Internal(format!("serialization failed: {e}")))?;
        writeln!(sink, "{line}")?;
    }
    sink.flush()?;
    Ok(())
}
