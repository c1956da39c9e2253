use anyhow::{Context, Result};
use mrd_core::CurvePoint;
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const HEADER: &str = "rate_bits,d0,d1,d1_min,d1_max,ensemble,tie_rule,source,n,trials,seed";

/// One output row. Columns that do not apply are left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub rate_bits: f64,
    pub d0: Option<f64>,
    pub d1: f64,
    pub d1_min: Option<f64>,
    pub d1_max: Option<f64>,
    pub ensemble: String,
    pub tie_rule: String,
    pub source: String,
    pub n: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

impl Row {
    pub fn analytic(p: &CurvePoint) -> Row {
        Row {
            rate_bits: p.rate_bits,
            d0: Some(p.d0),
            d1: p.d1,
            d1_min: Some(p.d1_min),
            d1_max: Some(p.d1_max),
            ensemble: p.ensemble.as_str().to_string(),
            tie_rule: p.tie_rule.as_str().to_string(),
            source: "analytic".into(),
            n: None,
            trials: None,
            seed: None,
        }
    }

    pub fn closed_form(rate_bits: f64, d1: f64, ensemble: &str, tie_rule: &str) -> Row {
        Row {
            rate_bits,
            d0: None,
            d1,
            d1_min: None,
            d1_max: None,
            ensemble: ensemble.into(),
            tie_rule: tie_rule.into(),
            source: "closed_form".into(),
            n: None,
            trials: None,
            seed: None,
        }
    }

    fn csv(&self) -> String {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        [
            self.rate_bits.to_string(),
            opt(self.d0),
            self.d1.to_string(),
            opt(self.d1_min),
            opt(self.d1_max),
            self.ensemble.clone(),
            self.tie_rule.clone(),
            self.source.clone(),
            opt(self.n),
            opt(self.trials),
            opt(self.seed),
        ]
        .join(",")
    }
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut s = String::from(HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Appends rows to a CSV file, writing the header if the file is new or
/// empty.
pub fn append_csv(rows: &[Row], path: &Path) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("opening {}", path.display()))?;
    if fresh {
        writeln!(f, "{HEADER}")?;
    }
    for r in rows {
        writeln!(f, "{}", r.csv())?;
    }
    Ok(())
}
