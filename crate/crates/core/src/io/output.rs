//! Output files. Every file starts with a `#` line recording the command
//! and master seed; numbers use the shortest exact decimal form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::{ess, summarize, CvResult, SummaryRow};
use crate::mcmc::PosteriorSamples;
use crate::models::SpatialSupport;
use crate::stats::log_mean_exp;

/// Buffered file that tags IO errors with its path.
struct Out {
    path: PathBuf,
    w: BufWriter<File>,
}

impl Out {
    fn create(dir: &Path, name: &str, header: &str) -> Result<Self> {
        let path = dir.join(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = Self {
            path,
            w: BufWriter::new(f),
        };
        out.line(&format!("# {header}"))?;
        Ok(out)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.w, "{s}").map_err(|e| Error::io(&self.path, e))
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.w.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Column names of the samples file after `chain`.
fn sample_columns(s: &PosteriorSamples) -> Vec<String> {
    let mut c = s.names.clone();
    c.extend(s.derived_names.iter().cloned());
    c.push("log_lik".into());
    c
}

/// One row per stored state: chain index, parameters, derived quantities
/// and the log-likelihood.
pub fn write_samples(dir: &Path, header: &str, chains: &[PosteriorSamples]) -> Result<PathBuf> {
    let mut out = Out::create(dir, "samples.csv", header)?;
    if let Some(first) = chains.first() {
        out.line(&format!("chain,{}", sample_columns(first).join(",")))?;
    }
    for (c, s) in chains.iter().enumerate() {
        for t in 0..s.len() {
            let vals = s.draws.iter().chain(&s.derived).map(|d| d[t]).chain([s.log_lik[t]]);
            out.line(&format!("{c},{}", row(vals)))?;
        }
    }
    out.finish()
}

/// Column names and rows of a samples file, chain column included.
pub fn read_samples(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let names = rdr.headers().map_err(|e| err(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let r = rec
            .iter()
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad number `{v}`"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(r);
    }
    Ok((names, rows))
}

/// Draws of all chains laid end to end.
pub fn pool_chains(chains: &[PosteriorSamples]) -> Option<PosteriorSamples> {
    let mut pooled = chains.first()?.clone();
    for s in &chains[1..] {
        for (a, b) in pooled.draws.iter_mut().zip(&s.draws) {
            a.extend_from_slice(b);
        }
        for (a, b) in pooled.derived.iter_mut().zip(&s.derived) {
            a.extend_from_slice(b);
        }
        pooled.log_lik.extend_from_slice(&s.log_lik);
        for (a, b) in pooled.field_mean.iter_mut().zip(&s.field_mean) {
            *a += b;
        }
        pooled.seconds += s.seconds;
        pooled.burn_in_seconds += s.burn_in_seconds;
        pooled.pd_events += s.pd_events;
    }
    let k = chains.len() as f64;
    pooled.field_mean.iter_mut().for_each(|v| *v /= k);
    Some(pooled)
}

fn summary_file(dir: &Path, name: &str, header: &str, rows: &[(SummaryRow, &Vec<f64>)]) -> Result<PathBuf> {
    let mut out = Out::create(dir, name, header)?;
    out.line("parameter,mean,lower,upper,ess")?;
    for (r, t) in rows {
        let e = ess(t).map(|v| v.to_string()).unwrap_or_default();
        out.line(&format!("{},{},{},{},{e}", r.parameter, r.mean, r.lower, r.upper))?;
    }
    out.finish()
}

/// Posterior mean, 95% interval and effective sample size: sampled
/// parameters go to `summary.csv`, derived quantities to `derived.csv`.
pub fn write_summary(dir: &Path, header: &str, pooled: &PosteriorSamples) -> Result<Vec<PathBuf>> {
    let rows: Vec<_> = summarize(pooled).into_iter().zip(pooled.draws.iter().chain(&pooled.derived)).collect();
    let (params, derived) = rows.split_at(pooled.names.len());
    Ok(vec![
        summary_file(dir, "summary.csv", header, params)?,
        summary_file(dir, "derived.csv", header, derived)?,
    ])
}

/// Timing and mixing report: seconds after burn-in and the effective
/// sample size of the log-likelihood trace per second.
pub fn write_report(dir: &Path, header: &str, chains: &[PosteriorSamples]) -> Result<PathBuf> {
    let mut out = Out::create(dir, "report.txt", header)?;
    for (c, s) in chains.iter().enumerate() {
        let e = ess(&s.log_lik).ok();
        out.line(&format!("[chain {c}]"))?;
        out.line(&format!("stored_states = {}", s.len()))?;
        out.line(&format!("burn_in_seconds = {:.3}", s.burn_in_seconds))?;
        out.line(&format!("seconds = {:.3}", s.seconds))?;
        out.line(&format!("ess_log_lik = {}", e.map_or("NA".into(), |v| format!("{v:.1}"))))?;
        out.line(&format!(
            "ess_per_second = {}",
            e.map_or("NA".into(), |v| format!("{:.1}", v / s.seconds.max(f64::MIN_POSITIVE)))
        ))?;
        out.line(&format!("pd_rejections = {}", s.pd_events))?;
    }
    out.finish()
}

/// Posterior mean of the field at every node, with mesh coordinates when
/// the support is a mesh.
pub fn write_predictions(dir: &Path, header: &str, support: &SpatialSupport, field_mean: &[f64]) -> Result<PathBuf> {
    let mut out = Out::create(dir, "predictions.csv", header)?;
    match support {
        SpatialSupport::Mesh { mesh, .. } => {
            out.line("node,x,y,field_mean")?;
            for (i, (p, m)) in mesh.nodes().iter().zip(field_mean).enumerate() {
                out.line(&format!("{i},{},{},{m}", p[0], p[1]))?;
            }
        }
        SpatialSupport::Graph { graph, .. } => {
            out.line("node,label,field_mean")?;
            for (i, m) in field_mean.iter().enumerate() {
                let label = graph.labels().map_or("", |l| l[i].as_str());
                out.line(&format!("{i},{label},{m}"))?;
            }
        }
    }
    out.finish()
}

/// Fold assignment and per-fold scores of a cross-validation run.
pub fn write_cv(dir: &Path, header: &str, cv: &CvResult, seconds: f64) -> Result<Vec<PathBuf>> {
    let mut folds = Out::create(dir, "folds.csv", header)?;
    folds.line("record,fold")?;
    for (i, f) in cv.plan.folds.iter().enumerate() {
        folds.line(&format!("{i},{f}"))?;
    }
    let mut rep = Out::create(dir, "cv_report.txt", header)?;
    rep.line(&format!("bcvs = {}", cv.bcvs))?;
    rep.line(&format!("folds = {}", cv.plan.k))?;
    rep.line(&format!("grouped = {}", cv.plan.grouped))?;
    rep.line(&format!("seconds = {seconds:.3}"))?;
    for (f, lds) in cv.fold_log_densities.iter().enumerate() {
        rep.line(&format!("fold_{f} = {}", -log_mean_exp(lds)))?;
    }
    Ok(vec![folds.finish()?, rep.finish()?])
}

/// Prior field draws, one row per draw.
pub fn write_simulation(dir: &Path, header: &str, draws: &[Vec<f64>]) -> Result<PathBuf> {
    let mut out = Out::create(dir, "simulate.csv", header)?;
    let n = draws.first().map_or(0, Vec::len);
    let cols: Vec<String> = (0..n).map(|i| format!("node_{i}")).collect();
    out.line(&format!("draw,{}", cols.join(",")))?;
    for (d, v) in draws.iter().enumerate() {
        out.line(&format!("{d},{}", row(v.iter().copied())))?;
    }
    out.finish()
}
