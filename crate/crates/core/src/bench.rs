//! Benchmark harness comparing scratch recomputation (Classic) against the
//! incremental route (Update) over a corpus of hypergraphs.
//!
//! For every instance the harness finds a base decomposition of optimal
//! width (or a fixed width, when configured), generates seeded
//! modifications per class, and times both routes on the modified
//! hypergraph. Aggregates follow the usual reporting scheme: positive and
//! better percentages, geometric means, exclusive timeout counts, and a
//! floor on Classic runtimes that filters noise rows out of the
//! aggregates.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::{decompose_with_deadline, DecomposeOutcome};
use crate::hypergraph::Hypergraph;
use crate::modify::{generate, ModClass, ModifyError};
use crate::update::update_pipeline;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    /// Fixed width bound; `None` means per-instance optimal width.
    pub width: Option<usize>,
    pub timeout: Duration,
    pub seed: u64,
    /// Modifications generated per class and instance.
    pub per_class: u32,
    pub classes: Vec<ModClass>,
    /// Records whose Classic time is at or below this floor (in
    /// milliseconds) are kept but excluded from the aggregate rows.
    pub min_classic_ms: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            width: None,
            timeout: Duration::from_secs(1800),
            seed: 0,
            per_class: 5,
            classes: ModClass::ALL.to_vec(),
            min_classic_ms: 15.0,
        }
    }
}

/// One timed Classic-versus-Update comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance: String,
    pub class: ModClass,
    pub seed: u64,
    /// Width did not increase: some route found a decomposition at the
    /// base width.
    pub positive: bool,
    /// At least one route finished, so `positive` is meaningful.
    pub decided: bool,
    pub classic_ms: f64,
    pub update_ms: f64,
    pub classic_timeout: bool,
    pub update_timeout: bool,
    pub classic_separators: u64,
    pub update_separators: u64,
    pub scene_hits: u64,
    pub width_before: usize,
    pub width_after: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub class: String,
    /// All records for this class.
    pub records: usize,
    /// Records above the Classic-time floor (or Classic timeouts).
    pub considered: usize,
    pub positive_pct: f64,
    pub better_pct: f64,
    pub mean_classic_ms: f64,
    pub mean_update_ms: f64,
    pub mean_speedup: f64,
    pub timeout_classic: usize,
    pub timeout_update: usize,
}

#[derive(Serialize)]
pub struct BenchReport {
    pub config: RunConfig,
    pub records: Vec<BenchRecord>,
    pub classes: Vec<Aggregate>,
    pub total: Aggregate,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("instance `{0}`: base decomposition timed out at every width")]
    BaseTimeout(String),
}

/// Stable 64-bit hash for deriving per-instance seeds; FNV-1a.
fn stable_hash(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs the harness over named instances. Instances whose base
/// decomposition cannot be computed within the timeout are skipped with a
/// log message rather than failing the whole run.
pub fn run_bench(
    corpus: &[(String, Hypergraph)],
    config: &RunConfig,
) -> Result<BenchReport, BenchError> {
    if corpus.is_empty() {
        return Err(BenchError::EmptyCorpus);
    }
    let mut records = Vec::new();
    for (name, h) in corpus {
        let base = match base_decomposition(h, config) {
            Some(base) => base,
            None => {
                log::warn!("skipping `{name}`: no base decomposition within the timeout");
                continue;
            }
        };
        let (width, ghd) = base;
        log::info!("instance `{name}`: base width {width}");
        for &class in &config.classes {
            for i in 0..config.per_class {
                let seed = config
                    .seed
                    .wrapping_add(stable_hash(name))
                    .wrapping_add((class as u64) << 32)
                    .wrapping_add(u64::from(i));
                let modification = match generate(class, h, seed) {
                    Ok(m) => m,
                    Err(ModifyError::Inadmissible { reason, .. }) => {
                        log::debug!("`{name}` {class} seed {seed}: inadmissible ({reason})");
                        continue;
                    }
                    Err(err) => {
                        log::debug!("`{name}` {class} seed {seed}: {err}");
                        continue;
                    }
                };

                let update_deadline = Instant::now() + config.timeout;
                let update_start = Instant::now();
                let update_run = update_pipeline(h, &modification, &ghd, width, Some(update_deadline));
                let update_elapsed = update_start.elapsed();
                let Ok(update_run) = update_run else {
                    log::debug!("`{name}` {class} seed {seed}: modification not applicable");
                    continue;
                };

                let new_h = &update_run.new_hypergraph;
                let classic_deadline = Instant::now() + config.timeout;
                let classic_start = Instant::now();
                let classic = decompose_with_deadline(new_h, width, Some(classic_deadline))
                    .expect("width and hypergraph already checked");
                let classic_elapsed = classic_start.elapsed();

                let classic_found = classic.outcome.found().is_some();
                let update_found = update_run.outcome.found().is_some();
                let decided =
                    !classic.outcome.is_timeout() || !update_run.outcome.is_timeout();
                let width_after = update_run
                    .outcome
                    .found()
                    .or(classic.outcome.found())
                    .map(|g| g.width);
                records.push(BenchRecord {
                    instance: name.clone(),
                    class,
                    seed,
                    positive: classic_found || update_found,
                    decided,
                    classic_ms: ms(classic_elapsed),
                    update_ms: ms(update_elapsed),
                    classic_timeout: classic.outcome.is_timeout(),
                    update_timeout: update_run.outcome.is_timeout(),
                    classic_separators: classic.stats.separators_tried,
                    update_separators: update_run.stats.search.separators_tried,
                    scene_hits: update_run.stats.search.scene_hits,
                    width_before: width,
                    width_after,
                });
            }
        }
    }
    let (classes, total) = aggregate(&records, config);
    Ok(BenchReport {
        config: config.clone(),
        records,
        classes,
        total,
    })
}

fn base_decomposition(h: &Hypergraph, config: &RunConfig) -> Option<(usize, crate::Ghd)> {
    match config.width {
        Some(k) => {
            let deadline = Instant::now() + config.timeout;
            match decompose_with_deadline(h, k, Some(deadline)).ok()?.outcome {
                DecomposeOutcome::Found(g) => Some((k, g)),
                _ => None,
            }
        }
        None => {
            for k in 1..=h.n_edges() {
                let deadline = Instant::now() + config.timeout;
                match decompose_with_deadline(h, k, Some(deadline)).ok()?.outcome {
                    DecomposeOutcome::Found(g) => return Some((k, g)),
                    DecomposeOutcome::Reject => continue,
                    DecomposeOutcome::TimedOut => return None,
                }
            }
            None
        }
    }
}

fn geometric_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v.max(1e-4).ln();
        count += 1;
    }
    if count == 0 {
        return 0.0;
    }
    (sum / count as f64).exp()
}

fn aggregate_for(class_label: &str, records: &[&BenchRecord], floor_ms: f64) -> Aggregate {
    // The floor keeps noise-dominated rows out of the statistics; rows
    // where Classic timed out stay in by construction.
    let considered: Vec<&&BenchRecord> = records
        .iter()
        .filter(|r| r.classic_timeout || r.classic_ms > floor_ms)
        .collect();
    let decided: Vec<&&&BenchRecord> = considered.iter().filter(|r| r.decided).collect();
    let both_finished: Vec<&&&BenchRecord> = considered
        .iter()
        .filter(|r| !r.classic_timeout && !r.update_timeout)
        .collect();
    let positive = decided.iter().filter(|r| r.positive).count();
    let better = both_finished
        .iter()
        .filter(|r| r.update_ms < r.classic_ms)
        .count();
    Aggregate {
        class: class_label.to_string(),
        records: records.len(),
        considered: considered.len(),
        positive_pct: if decided.is_empty() {
            0.0
        } else {
            100.0 * positive as f64 / decided.len() as f64
        },
        better_pct: if both_finished.is_empty() {
            0.0
        } else {
            100.0 * better as f64 / both_finished.len() as f64
        },
        mean_classic_ms: geometric_mean(both_finished.iter().map(|r| r.classic_ms)),
        mean_update_ms: geometric_mean(both_finished.iter().map(|r| r.update_ms)),
        mean_speedup: geometric_mean(
            both_finished
                .iter()
                .map(|r| r.classic_ms.max(1e-4) / r.update_ms.max(1e-4)),
        ),
        timeout_classic: considered.iter().filter(|r| r.classic_timeout).count(),
        timeout_update: considered.iter().filter(|r| r.update_timeout).count(),
    }
}

/// Recomputes the per-class rows and the Total row from raw records;
/// this is the single source of truth for the report's aggregate section.
pub fn aggregate(records: &[BenchRecord], config: &RunConfig) -> (Vec<Aggregate>, Aggregate) {
    let mut classes = Vec::new();
    for class in ModClass::ALL {
        if !config.classes.contains(&class) {
            continue;
        }
        let rows: Vec<&BenchRecord> = records.iter().filter(|r| r.class == class).collect();
        classes.push(aggregate_for(&class.to_string(), &rows, config.min_classic_ms));
    }
    let all: Vec<&BenchRecord> = records.iter().collect();
    let total = aggregate_for("Total", &all, config.min_classic_ms);
    (classes, total)
}

/// Human-readable table for the `--pretty` flag, rendered from the report.
pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>10} {:>8} {:>10} {:>9} {:>13} {:>12} {:>13} {:>9} {:>9}\n",
        "Operation",
        "Records",
        "Positive%",
        "Better%",
        "MeanClassic",
        "MeanUpdate",
        "MeanSpeedup",
        "TO-Cls",
        "TO-Upd"
    ));
    for row in report.classes.iter().chain(std::iter::once(&report.total)) {
        out.push_str(&format!(
            "{:>10} {:>8} {:>10.2} {:>9.2} {:>13.3} {:>12.3} {:>13.2} {:>9} {:>9}\n",
            row.class,
            row.records,
            row.positive_pct,
            row.better_pct,
            row.mean_classic_ms,
            row.mean_update_ms,
            row.mean_speedup,
            row.timeout_classic,
            row.timeout_update,
        ));
    }
    out
}
