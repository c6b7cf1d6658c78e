use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use ghdinc::bench::{render_table, run_bench, RunConfig};
use ghdinc::decompose::{decompose_with_deadline, validate, DecomposeOutcome, Ghd};
use ghdinc::hypergraph::Hypergraph;
use ghdinc::modify::{generate, ModClass, Modification};
use ghdinc::update::{explain_json, update_pipeline, PipelineError};

const EXIT_OK: u8 = 0;
const EXIT_REJECT: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "ghdinc",
    version,
    about = "Generalized hypertree decompositions with incremental updates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a width-bounded decomposition of a hypergraph file.
    Decompose {
        #[arg(long)]
        hypergraph: PathBuf,
        /// Width bound (at least 1).
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        width: u32,
        /// Output file for the decomposition JSON (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cooperative timeout in seconds.
        #[arg(long)]
        timeout: Option<u64>,
    },
    /// Update a decomposition after an elementary modification.
    Update {
        #[arg(long)]
        hypergraph: PathBuf,
        /// Modification JSON file.
        #[arg(long = "mod")]
        modification: PathBuf,
        /// Decomposition JSON of the unmodified hypergraph.
        #[arg(long)]
        ghd: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
        width: u32,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timeout: Option<u64>,
        /// Dump the mutable subtree and its bag constraints to stderr.
        #[arg(long)]
        explain: bool,
    },
    /// Generate seeded random modifications as JSON files.
    Mutate {
        #[arg(long)]
        hypergraph: PathBuf,
        #[arg(long, value_parser = parse_class)]
        class: ModClass,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: u32,
        /// Output directory (current directory when absent).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a decomposition against a hypergraph.
    Validate {
        #[arg(long)]
        hypergraph: PathBuf,
        #[arg(long)]
        ghd: PathBuf,
        /// Width bound; defaults to the width recorded in the file.
        #[arg(long)]
        width: Option<u32>,
    },
    /// Compare scratch recomputation against incremental updates on a
    /// corpus directory of .hg files.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        /// Fixed width bound; per-instance optimal width when absent.
        #[arg(long)]
        width: Option<u32>,
        #[arg(long, default_value_t = 1800)]
        timeout: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Modifications per class and instance.
        #[arg(long, default_value_t = 5)]
        count: u32,
        /// Comma-separated class filter, e.g. AddConstr,DelConstr.
        #[arg(long)]
        classes: Option<String>,
        /// Classic-time floor (ms) below which records are excluded from
        /// the aggregate rows.
        #[arg(long, default_value_t = 15.0)]
        min_classic_ms: f64,
        /// Output file for the report JSON (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Additionally render the aggregate table.
        #[arg(long)]
        pretty: bool,
    },
}

fn parse_class(s: &str) -> Result<ModClass, String> {
    s.parse()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GHD_INCR_LOG")).init();
    let cli = Cli::parse();
    ExitCode::from(run(cli))
}

fn run(cli: Cli) -> u8 {
    match cli.command {
        Command::Decompose {
            hypergraph,
            width,
            out,
            timeout,
        } => cmd_decompose(&hypergraph, width as usize, out.as_deref(), timeout),
        Command::Update {
            hypergraph,
            modification,
            ghd,
            width,
            out,
            timeout,
            explain,
        } => cmd_update(
            &hypergraph,
            &modification,
            &ghd,
            width as usize,
            out.as_deref(),
            timeout,
            explain,
        ),
        Command::Mutate {
            hypergraph,
            class,
            seed,
            count,
            out,
        } => cmd_mutate(&hypergraph, class, seed, count, out.as_deref()),
        Command::Validate {
            hypergraph,
            ghd,
            width,
        } => cmd_validate(&hypergraph, &ghd, width.map(|w| w as usize)),
        Command::Bench {
            corpus,
            width,
            timeout,
            seed,
            count,
            classes,
            min_classic_ms,
            out,
            pretty,
        } => cmd_bench(
            &corpus,
            width.map(|w| w as usize),
            timeout,
            seed,
            count,
            classes.as_deref(),
            min_classic_ms,
            out.as_deref(),
            pretty,
        ),
    }
}

fn read_hypergraph(path: &Path) -> Result<Hypergraph, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    Hypergraph::parse(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn read_ghd(path: &Path) -> Result<Ghd, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    Ghd::from_json(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn read_modification(path: &Path) -> Result<Modification, u8> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_USAGE
    })?;
    Modification::from_json(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        EXIT_USAGE
    })
}

fn write_output(ghd: &Ghd, out: Option<&Path>) -> Result<(), u8> {
    let json = ghd.to_json_pretty();
    match out {
        Some(path) => fs::write(path, json + "\n").map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            EXIT_USAGE
        }),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn deadline_from(timeout: Option<u64>) -> Option<Instant> {
    timeout.map(|secs| Instant::now() + Duration::from_secs(secs))
}

fn cmd_decompose(hypergraph: &Path, width: usize, out: Option<&Path>, timeout: Option<u64>) -> u8 {
    let h = match read_hypergraph(hypergraph) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let result = match decompose_with_deadline(&h, width, deadline_from(timeout)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    log::info!(
        "decompose: {} separators tried, {} component computations",
        result.stats.separators_tried,
        result.stats.components_computed
    );
    match result.outcome {
        DecomposeOutcome::Found(ghd) => {
            if let Err(code) = write_output(&ghd, out) {
                return code;
            }
            EXIT_OK
        }
        DecomposeOutcome::Reject => {
            eprintln!("reject: no decomposition of width <= {width}");
            EXIT_REJECT
        }
        DecomposeOutcome::TimedOut => {
            eprintln!("timeout");
            EXIT_TIMEOUT
        }
    }
}

fn cmd_update(
    hypergraph: &Path,
    modification: &Path,
    ghd: &Path,
    width: usize,
    out: Option<&Path>,
    timeout: Option<u64>,
    explain: bool,
) -> u8 {
    let h = match read_hypergraph(hypergraph) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let m = match read_modification(modification) {
        Ok(m) => m,
        Err(code) => return code,
    };
    let g = match read_ghd(ghd) {
        Ok(g) => g,
        Err(code) => return code,
    };
    let run = match update_pipeline(&h, &m, &g, width, deadline_from(timeout)) {
        Ok(run) => run,
        Err(PipelineError::InvalidInput(v)) => {
            eprintln!("error: input decomposition does not validate: {v}");
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if run.fast_path {
        eprintln!("fast-path: vertex deletion handled without search");
    }
    if explain {
        match &run.mutable_subtree {
            Some(t_star) => eprintln!("{}", explain_json(t_star, &run.constraints)),
            None => eprintln!("{}", explain_json(&ghdinc::update::MutableSubtree::empty(), &[])),
        }
    }
    log::info!(
        "update: {} separators tried, {} scene hits, {} search calls",
        run.stats.search.separators_tried,
        run.stats.search.scene_hits,
        run.stats.search.search_calls
    );
    match run.outcome {
        DecomposeOutcome::Found(ghd) => {
            if let Err(code) = write_output(&ghd, out) {
                return code;
            }
            EXIT_OK
        }
        DecomposeOutcome::Reject => {
            eprintln!("reject: the modification does not admit width <= {width}");
            EXIT_REJECT
        }
        DecomposeOutcome::TimedOut => {
            eprintln!("timeout");
            EXIT_TIMEOUT
        }
    }
}

fn cmd_mutate(
    hypergraph: &Path,
    class: ModClass,
    seed: u64,
    count: u32,
    out: Option<&Path>,
) -> u8 {
    let h = match read_hypergraph(hypergraph) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let dir = out.unwrap_or_else(|| Path::new("."));
    if let Err(e) = fs::create_dir_all(dir) {
        eprintln!("error: cannot create {}: {e}", dir.display());
        return EXIT_USAGE;
    }
    for i in 0..count {
        let file_seed = seed.wrapping_add(u64::from(i));
        let m = match generate(class, &h, file_seed) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        };
        let path = dir.join(format!("{class}_{file_seed}.json"));
        if let Err(e) = fs::write(&path, m.to_json() + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_USAGE;
        }
        println!("{}", path.display());
    }
    EXIT_OK
}

fn cmd_validate(hypergraph: &Path, ghd: &Path, width: Option<usize>) -> u8 {
    let h = match read_hypergraph(hypergraph) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let g = match read_ghd(ghd) {
        Ok(g) => g,
        Err(code) => return code,
    };
    let k = width.unwrap_or(g.width);
    let violations = validate(&h, &g, k);
    if violations.is_empty() {
        println!("valid: width {} decomposition at bound {k}", g.width);
        EXIT_OK
    } else {
        for v in &violations {
            println!("violation: {v}");
        }
        EXIT_REJECT
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    corpus: &Path,
    width: Option<usize>,
    timeout: u64,
    seed: u64,
    count: u32,
    classes: Option<&str>,
    min_classic_ms: f64,
    out: Option<&Path>,
    pretty: bool,
) -> u8 {
    let mut entries: Vec<PathBuf> = match fs::read_dir(corpus) {
        Ok(rd) => rd
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|ext| ext == "hg"))
            .collect(),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", corpus.display());
            return EXIT_USAGE;
        }
    };
    entries.sort();
    let mut instances = Vec::new();
    for path in entries {
        let h = match read_hypergraph(&path) {
            Ok(h) => h,
            Err(code) => return code,
        };
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        instances.push((name, h));
    }

    let class_filter = match classes {
        None => ModClass::ALL.to_vec(),
        Some(list) => {
            let mut parsed = Vec::new();
            for item in list.split(',') {
                match item.trim().parse::<ModClass>() {
                    Ok(c) => parsed.push(c),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_USAGE;
                    }
                }
            }
            parsed
        }
    };

    let config = RunConfig {
        width,
        timeout: Duration::from_secs(timeout),
        seed,
        per_class: count,
        classes: class_filter,
        min_classic_ms,
    };
    let report = match run_bench(&instances, &config) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => {
            if let Err(e) = fs::write(path, json + "\n") {
                eprintln!("error: cannot write {}: {e}", path.display());
                return EXIT_USAGE;
            }
            if pretty {
                println!("{}", render_table(&report));
            }
        }
        None => {
            println!("{json}");
            if pretty {
                eprintln!("{}", render_table(&report));
            }
        }
    }
    EXIT_OK
}
