//! CSV formats.
//!
//! An observation path file looks like
//!
//! ```text
//! level,horizon,d_y
//! 8,10,1
//! k,dy_1
//! 0,-3.0145307433542651e-2
//! ...
//! ```
//!
//! with one row per finest-level increment and floats written with 17
//! significant digits, so a path survives a write/read cycle bit-for-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use zakai_core::estimators::{MlpfOutput, ReplicateSummary};
use zakai_core::filters::{CoupledFilterOutput, FilterOutput};
use zakai_core::ObservationPath;

use crate::{Error, Result};

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_path<W: Write>(path: &ObservationPath, out: W) -> Result<()> {
    let d = path.obs_dim();
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["level", "horizon", "d_y"])?;
    w.write_record([
        path.finest_level().to_string(),
        path.horizon().to_string(),
        d.to_string(),
    ])?;
    let mut header = vec!["k".to_string()];
    header.extend((1..=d).map(|j| format!("dy_{j}")));
    w.write_record(&header)?;
    for (k, row) in path.fine_increments().chunks(d).enumerate() {
        let mut rec = vec![k.to_string()];
        rec.extend(row.iter().map(|v| sci(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    field.and_then(|f| f.trim().parse().ok()).ok_or_else(|| Error::Format {
        line,
        message: format!("expected {what}"),
    })
}

pub fn read_path<R: Read>(input: R) -> Result<ObservationPath> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = r.records();
    let mut next = |line: usize| -> Result<csv::StringRecord> {
        records.next().transpose()?.ok_or(Error::Format {
            line,
            message: "unexpected end of file".into(),
        })
    };
    let header = next(1)?;
    if header.iter().map(str::trim).collect::<Vec<_>>() != ["level", "horizon", "d_y"] {
        return Err(Error::Format {
            line: 1,
            message: "expected `level,horizon,d_y`".into(),
        });
    }
    let meta = next(2)?;
    let level: u32 = parse(meta.get(0), 2, "level")?;
    let horizon: usize = parse(meta.get(1), 2, "horizon")?;
    let d: usize = parse(meta.get(2), 2, "d_y")?;
    let columns = next(3)?;
    if columns.len() != d + 1 || columns.get(0).map(str::trim) != Some("k") {
        return Err(Error::Format {
            line: 3,
            message: format!("expected `k` and {d} increment columns"),
        });
    }
    if level > 30 || horizon == 0 || d == 0 {
        return Err(Error::Format {
            line: 2,
            message: "level must be at most 30, horizon and d_y positive".into(),
        });
    }
    let steps = horizon << level;
    let mut increments = Vec::with_capacity(steps * d);
    for k in 0..steps {
        let line = k + 4;
        let rec = next(line)?;
        if rec.len() != d + 1 {
            return Err(Error::Format {
                line,
                message: format!("expected {} fields", d + 1),
            });
        }
        let idx: usize = parse(rec.get(0), line, "step index")?;
        if idx != k {
            return Err(Error::Format {
                line,
                message: format!("expected step index {k}"),
            });
        }
        for j in 1..=d {
            increments.push(parse::<f64>(rec.get(j), line, "increment")?);
        }
    }
    if next(steps + 4).is_ok() {
        return Err(Error::Format {
            line: steps + 4,
            message: "more rows than level and horizon imply".into(),
        });
    }
    Ok(ObservationPath::from_increments(level, horizon, d, increments)?)
}

pub fn save_path(path: &ObservationPath, file: &Path) -> Result<()> {
    write_path(path, create(file)?)
}

pub fn load_path(file: &Path) -> Result<ObservationPath> {
    read_path(open(file)?)
}

/// `log_gamma_phi` holds `log|γ_t(φ)|`; the sign is that of `eta_phi`.
pub fn write_filter<W: Write>(out: &FilterOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "t",
        "level",
        "particles",
        "eta_phi",
        "log_gamma_one",
        "log_gamma_phi",
        "ess",
        "resampled",
    ])?;
    for s in &out.steps {
        w.write_record([
            s.time.to_string(),
            out.level.to_string(),
            out.particles.to_string(),
            s.eta_phi.to_string(),
            s.log_gamma_one.to_string(),
            s.log_abs_gamma_phi().to_string(),
            s.ess.to_string(),
            s.resampled.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_coupled<W: Write>(out: &CoupledFilterOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "t",
        "level",
        "particles",
        "eta_diff",
        "gamma_phi_diff",
        "gamma_one_diff",
        "ess_min",
        "resampled",
    ])?;
    for s in &out.steps {
        w.write_record([
            s.time.to_string(),
            out.level.to_string(),
            out.particles.to_string(),
            s.eta_diff().to_string(),
            s.gamma_phi_diff().to_string(),
            s.gamma_one_diff().to_string(),
            s.ess_min.to_string(),
            s.resampled.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_mlpf<W: Write>(out: &MlpfOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["t", "max_level", "eta_phi", "gamma_phi", "gamma_one", "cost"])?;
    for s in &out.steps {
        w.write_record([
            s.time.to_string(),
            out.max_level.to_string(),
            s.eta_phi.to_string(),
            s.gamma_phi.to_string(),
            s.gamma_one.to_string(),
            out.cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(s: &ReplicateSummary, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "t",
        "replicates",
        "base_seed",
        "mean_gamma_phi",
        "var_gamma_phi",
        "mean_gamma_one",
        "var_gamma_one",
        "total_cost",
        "expected_cost",
    ])?;
    for p in &s.points {
        w.write_record([
            p.time.to_string(),
            s.replicates().to_string(),
            s.base_seed.to_string(),
            p.mean_phi.to_string(),
            p.variance_phi.to_string(),
            p.mean_one.to_string(),
            p.variance_one.to_string(),
            s.total_cost.to_string(),
            s.expected_cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per replicate and time.
pub fn write_draws<W: Write>(s: &ReplicateSummary, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record([
        "replicate",
        "seed",
        "level_drawn",
        "cost",
        "t",
        "gamma_phi",
        "gamma_one",
    ])?;
    for (i, e) in s.estimates.iter().enumerate() {
        for p in &e.points {
            w.write_record([
                i.to_string(),
                e.seed.to_string(),
                e.level_drawn.to_string(),
                e.cost.to_string(),
                p.time.to_string(),
                p.gamma_phi.to_string(),
                p.gamma_one.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
