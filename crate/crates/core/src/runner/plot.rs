//! Tidy CSV files for external plotting, derived from a run directory.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evaluation::ecdf;
use crate::runner::experiment::read_samples;

pub const FIGURES: [&str; 7] = [
    "mi_trace",
    "constraint_gap",
    "prior_histogram",
    "posterior_histogram",
    "posterior_scatter",
    "posterior_ecdf",
    "chain_trace",
];

fn need(dir: &Path, file: &str) -> Result<PathBuf> {
    let p = dir.join(file);
    if p.is_file() {
        Ok(p)
    } else {
        Err(Error::MissingArtifact(p))
    }
}

fn mi_trace(dir: &Path, out: &Path) -> Result<()> {
    let mut r = csv::Reader::from_path(need(dir, "mi_trace.csv")?)?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["epoch", "mi_mean", "mi_lo95", "mi_hi95"])?;
    for rec in r.records() {
        let rec = rec?;
        w.write_record(rec.iter().take(4))?;
    }
    w.flush()?;
    Ok(())
}

fn constraint_gap(dir: &Path, out: &Path) -> Result<()> {
    let mut r = csv::Reader::from_path(need(dir, "multiplier_trace.csv")?)?;
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["epoch", "constraint", "abs_gap"])?;
    for rec in r.records() {
        let rec = rec?;
        let gap: f64 = rec[2].parse().unwrap_or(f64::NAN);
        w.write_record([&rec[0], &rec[1], &gap.abs().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (source, draw, component).
fn histogram(sources: &[(&str, Vec<Vec<f64>>)], out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["source", "draw", "component", "value"])?;
    for (label, samples) in sources {
        for (i, s) in samples.iter().enumerate() {
            for (j, v) in s.iter().enumerate() {
                w.write_record([label.to_string(), i.to_string(), (j + 1).to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

type Labelled = (&'static str, Vec<Vec<f64>>);

fn posterior_sources(dir: &Path) -> Result<Vec<Labelled>> {
    let mut v = vec![("fitted", kept_theta(dir)?)];
    let r = dir.join("reference_posterior.csv");
    if r.is_file() {
        v.push(("reference", read_samples(&r)?));
    }
    Ok(v)
}

/// θ columns of the kept window of `posterior_chain.csv`.
fn kept_theta(dir: &Path) -> Result<Vec<Vec<f64>>> {
    read_samples(&need(dir, "posterior_chain.csv")?)
}

fn scatter(dir: &Path, out: &Path) -> Result<()> {
    let samples = kept_theta(dir)?;
    let q = samples.first().map_or(0, |s| s.len());
    let mut w = csv::Writer::from_path(out)?;
    let mut header = vec!["draw".to_string()];
    header.extend((1..=q).map(|j| format!("theta_{j}")));
    w.write_record(&header)?;
    for (i, s) in samples.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(s.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn posterior_ecdf(dir: &Path, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["source", "component", "value", "cdf"])?;
    for (label, samples) in posterior_sources(dir)? {
        let q = samples.first().map_or(0, |s| s.len());
        for j in 0..q {
            let xs: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let c = ecdf(&xs)?;
            for (x, h) in c.support.iter().zip(&c.heights) {
                w.write_record([label.to_string(), (j + 1).to_string(), x.to_string(), h.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn chain_trace(dir: &Path, out: &Path) -> Result<()> {
    let mut r = csv::Reader::from_path(need(dir, "posterior_chain.csv")?)?;
    let headers = r.headers()?.clone();
    let mut w = csv::Writer::from_path(out)?;
    w.write_record(["iter", "accepted", "component", "value"])?;
    for rec in r.records() {
        let rec = rec?;
        for (k, h) in headers.iter().enumerate() {
            if let Some(j) = h.strip_prefix("theta_") {
                w.write_record([&rec[0], &rec[1], j, &rec[k]])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Write `plots/<figure>.csv` under `dir`. `figure = "all"` writes every
/// figure whose inputs exist.
pub fn emit_plot_data(dir: &Path, figure: &str) -> Result<Vec<PathBuf>> {
    if !dir.join("manifest.json").is_file() {
        return Err(Error::MissingArtifact(dir.join("manifest.json")));
    }
    let figures: Vec<&str> = if figure == "all" {
        FIGURES.to_vec()
    } else if FIGURES.contains(&figure) {
        vec![figure]
    } else {
        return Err(Error::Unknown(figure.to_string()));
    };
    let plots = dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    let mut written = Vec::new();
    for f in figures {
        let out = plots.join(format!("{f}.csv"));
        let res = match f {
            "mi_trace" => mi_trace(dir, &out),
            "constraint_gap" => constraint_gap(dir, &out),
            "prior_histogram" => {
                need(dir, "prior_samples.csv").and_then(|p| histogram(&[("fitted", read_samples(&p)?)], &out))
            }
            "posterior_histogram" => posterior_sources(dir).and_then(|s| histogram(&s, &out)),
            "posterior_scatter" => scatter(dir, &out),
            "posterior_ecdf" => posterior_ecdf(dir, &out),
            "chain_trace" => chain_trace(dir, &out),
            _ => unreachable!("figure list checked above"),
        };
        match res {
            Ok(()) => written.push(out),
            Err(Error::MissingArtifact(_)) if figure == "all" => {
                let _ = std::fs::remove_file(&out);
            }
            Err(e) => {
                let _ = std::fs::remove_file(&out);
                return Err(e);
            }
        }
    }
    Ok(written)
}
