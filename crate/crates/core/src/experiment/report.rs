use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::run::RunResult;
use crate::experiment::spec::{ExperimentSpec, Scenario};
use crate::metrics::NDCG_CUTOFFS;

pub const RESULTS_FILE: &str = "results.tsv";
pub const REPEATS_FILE: &str = "repeats.jsonl";
pub const FAILED_MARKER: &str = "FAILED";

fn header(spec: &ExperimentSpec, r: &RunResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# scenario: {}", r.scenario);
    let _ = writeln!(out, "# config_hash: {}", r.config_hash);
    let _ = writeln!(out, "# seed: {}", r.seed);
    let seeds: Vec<String> = r.seeds().iter().map(u64::to_string).collect();
    if !seeds.is_empty() {
        let _ = writeln!(out, "# repeat_seeds: [{}]", seeds.join(", "));
    }
    if matches!(r.scenario, Scenario::Table1Repair | Scenario::AblationInterventionCost) {
        let _ = writeln!(
            out,
            "# swap_impressions: each added record gets the mean per-record impressions of the click budget"
        );
    }
    let _ = writeln!(out, "# repeats: {}", spec.repeats);
    let _ = writeln!(out, "# status: {}", if r.failures() == 0 { "ok" } else { "failed" });
    out
}

/// Result table: one row per cell with mean and standard deviation of
/// every metric, or the grid / ratio table for the Monte-Carlo scenarios.
pub fn results_tsv(spec: &ExperimentSpec, r: &RunResult) -> String {
    let mut out = header(spec, r);
    match r.scenario {
        Scenario::ProbEstimateGrid => {
            out.push_str("dsize\txsize\ttsize\ttrials\tfrequency\testimate\n");
            for g in &r.grid {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{:.4}\t{:.4}",
                    g.dsize, g.xsize, g.tsize, g.trials, g.frequency, g.estimate
                );
            }
        }
        Scenario::SamplingRatio => {
            out.push_str("ratio\ttrials\tfrequency\tstderr\n");
            for row in &r.ratios {
                let _ = writeln!(out, "{}\t{}\t{:.4}\t{:.4}", row.ratio, row.trials, row.frequency, row.stderr);
            }
        }
        _ => {
            out.push_str("condition\tK\tclicks\tok\tmcc_mean\tmcc_std");
            for k in NDCG_CUTOFFS {
                let _ = write!(out, "\tndcg@{k}_mean\tndcg@{k}_std");
            }
            out.push('\n');
            for c in &r.cells {
                let ok = c.repeats.len() - c.failures();
                let _ = write!(
                    out,
                    "{}\t{}\t{}\t{}\t{:.3}\t{:.3}",
                    c.condition, c.components, c.budget, ok, c.mean.mcc, c.std.mcc
                );
                for k in NDCG_CUTOFFS {
                    let _ = write!(out, "\t{:.3}\t{:.3}", c.mean.ndcg[&k], c.std.ndcg[&k]);
                }
                out.push('\n');
            }
        }
    }
    out
}

/// One JSON object per repeat.
pub fn repeats_jsonl(r: &RunResult) -> Result<String> {
    let mut out = String::new();
    for c in &r.cells {
        for rep in &c.repeats {
            let line = serde_json::json!({
                "condition": c.condition,
                "K": c.components,
                "clicks": c.budget,
                "repeat": rep.repeat,
                "seed": rep.seed,
                "report": rep.report,
                "error": rep.error,
            });
            out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Serialize(e.to_string()))?);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Writes the result table, per-repeat JSON and spec into `dir`. A
/// `FAILED` marker listing the failed repeats is written when any failed.
pub fn write_outputs(spec: &ExperimentSpec, r: &RunResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    write(RESULTS_FILE, results_tsv(spec, r))?;
    write(REPEATS_FILE, repeats_jsonl(r)?)?;
    write("spec.toml", spec.to_toml()?)?;
    let marker = dir.join(FAILED_MARKER);
    if r.failures() > 0 {
        let mut text = String::new();
        for c in &r.cells {
            for rep in c.repeats.iter().filter(|x| x.error.is_some()) {
                let _ = writeln!(
                    text,
                    "{}\tK={}\tclicks={}\trepeat={}\t{}",
                    c.condition,
                    c.components,
                    c.budget,
                    rep.repeat,
                    rep.error.as_deref().unwrap_or_default()
                );
            }
        }
        write(FAILED_MARKER, text)?;
    } else if marker.exists() {
        fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    }
    Ok(())
}
