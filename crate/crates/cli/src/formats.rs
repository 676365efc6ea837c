//! Conversions between core types and artifacts.

use anyhow::{anyhow, bail, Context, Result};
use detsft_core::bucket::SampleSet;
use detsft_core::filter::{certify_filter, FlatFilter};
use detsft_core::forge::ConditionReport;
use detsft_core::hashing::{HashingSchedule, HashingTriple};
use detsft_core::oracle::GuaranteeReport;
use detsft_core::{Complex64, SparseApproximation};
use serde_json::Value;

use crate::artifact::Artifact;

pub const SCHEDULE: &str = "schedule";
pub const SAMPLES: &str = "samples";
pub const APPROXIMATION: &str = "approximation";
pub const ROWS: &str = "rows";
pub const FILTER: &str = "filter";
pub const GUARANTEE: &str = "guarantee";

fn fields(line: &str, count: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != count {
        bail!("expected {count} fields in {line:?}");
    }
    Ok(f)
}

/// Body lines `r sigma a b`.
pub fn schedule_artifact(schedule: &HashingSchedule, report: &ConditionReport) -> Artifact {
    let mut a = Artifact::new(SCHEDULE);
    a.set("n", schedule.n())
        .set("buckets", schedule.buckets())
        .set("sharpness", schedule.sharpness())
        .set("d", schedule.len() as u64)
        .set("worst_sum", report.worst_sum)
        .set("threshold", report.threshold)
        .set("certified", report.passed);
    a.body = schedule
        .triples()
        .iter()
        .enumerate()
        .map(|(r, t)| format!("{r} {} {} {}", t.sigma(), t.a(), t.b()))
        .collect();
    a
}

pub fn read_schedule(a: &Artifact) -> Result<HashingSchedule> {
    let n = a.get_u64("n")?;
    let buckets = a.get_u64("buckets")?;
    let sharpness = u32::try_from(a.get_u64("sharpness")?).context("sharpness too large")?;
    let mut triples = Vec::with_capacity(a.body.len());
    for (expect, line) in a.body.iter().enumerate() {
        let f = fields(line, 4)?;
        let r: usize = f[0].parse()?;
        if r != expect {
            bail!("schedule rows out of order at {line:?}");
        }
        let (sigma, shift, b) = (f[1].parse()?, f[2].parse()?, f[3].parse()?);
        triples.push(HashingTriple::new(sigma, shift, b, n).map_err(|e| anyhow!("{e}"))?);
    }
    if triples.len() as u64 != a.get_u64("d")? {
        bail!("header d disagrees with the number of rows");
    }
    HashingSchedule::new(n, buckets, sharpness, triples).map_err(|e| anyhow!("{e}"))
}

pub fn samples_artifact(set: &SampleSet, n: u64, pipeline: &str, modulations: &[u64]) -> Artifact {
    let mut a = Artifact::new(SAMPLES);
    a.set("n", n)
        .set("pipeline", pipeline)
        .set("modulations", modulations.to_vec())
        .set("count", set.len() as u64)
        .set("uses", set.uses() as u64);
    a.body = set.indices().iter().map(u64::to_string).collect();
    a
}

pub fn read_samples(a: &Artifact) -> Result<Vec<u64>> {
    let n = a.get_u64("n")?;
    let mut out = Vec::with_capacity(a.body.len());
    for line in &a.body {
        let i: u64 = line
            .trim()
            .parse()
            .with_context(|| format!("bad index {line:?}"))?;
        if i >= n {
            bail!("sample index {i} out of range for n={n}");
        }
        out.push(i);
    }
    Ok(out)
}

/// Body lines `f re im`, ascending `f`.
pub fn approximation_artifact(z: &SparseApproximation) -> Artifact {
    let mut a = Artifact::new(APPROXIMATION);
    a.set("n", z.n()).set("entries", z.len() as u64);
    a.body = z
        .iter()
        .map(|(f, v)| format!("{f} {} {}", v.re, v.im))
        .collect();
    a
}

pub fn read_approximation(a: &Artifact) -> Result<SparseApproximation> {
    let n = a.get_u64("n")?;
    let mut entries = Vec::with_capacity(a.body.len());
    for line in &a.body {
        let f = fields(line, 3)?;
        entries.push((f[0].parse()?, Complex64::new(f[1].parse()?, f[2].parse()?)));
    }
    SparseApproximation::from_entries(n, entries).map_err(|e| anyhow!("{e}"))
}

/// Rows one per line in ascending order, repeats kept.
pub fn rows_artifact(n: u64, rows: &[u64], certified_bound: f64, measured: f64) -> Artifact {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    let mut a = Artifact::new(ROWS);
    a.set("n", n)
        .set("rows", sorted.len() as u64)
        .set("certified_bound", certified_bound)
        .set("measured_incoherence", measured)
        .set("certified", measured <= certified_bound);
    a.body = sorted.iter().map(u64::to_string).collect();
    a
}

pub fn read_rows(a: &Artifact) -> Result<Vec<u64>> {
    a.body
        .iter()
        .map(|l| l.trim().parse().with_context(|| format!("bad row {l:?}")))
        .collect()
}

/// Frequency response `m Ĝ_m` for `m = 0..n`, or the time taps `t G_t`.
pub fn filter_artifact(filter: &FlatFilter, time_domain: bool) -> Artifact {
    let cert = certify_filter(filter);
    let mut a = Artifact::new(FILTER);
    a.set("n", filter.n())
        .set("buckets", filter.buckets())
        .set("sharpness", filter.sharpness())
        .set("epsilon", filter.epsilon())
        .set("support_len", filter.support_len() as u64)
        .set("support_constant", cert.support_constant)
        .set("certified", cert.passed())
        .set("domain", if time_domain { "time" } else { "frequency" });
    a.body = if time_domain {
        filter.window().map(|(t, v)| format!("{t} {v}")).collect()
    } else {
        filter
            .response()
            .iter()
            .enumerate()
            .map(|(m, v)| format!("{m} {v}"))
            .collect()
    };
    a
}

pub fn guarantee_artifact(rep: &GuaranteeReport) -> Artifact {
    let mut a = Artifact::new(GUARANTEE);
    a.set("k", rep.k as u64)
        .set("linf_error", rep.linf_error)
        .set("linf_bound", rep.linf_bound)
        .set("linf_pass", rep.linf_pass)
        .set("l2_error", rep.l2_error)
        .set("l2_bound", rep.l2_bound)
        .set("l2_pass", rep.l2_pass);
    a
}

/// Header fields as `key: value` lines for terminal output.
pub fn describe(a: &Artifact) -> String {
    let mut s = format!("{}\n", a.kind);
    for (k, v) in &a.header {
        let v = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        s.push_str(&format!("  {k}: {v}\n"));
    }
    s
}
