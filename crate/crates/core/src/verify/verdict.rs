use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::stats::{z_score, Estimate};

pub const DEFAULT_THRESHOLD: f64 = 5.0;

/// How a verdict turns its statistic into pass/fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sidedness {
    /// `|z| ≤ threshold`.
    TwoSided,
    /// `statistic ≤ threshold`.
    Upper,
    /// `statistic ≥ threshold`.
    Lower,
}

/// JSON has no infinities or NaN; they are written as `null` and read back as NaN.
fn nullable_f64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// One pass/fail outcome of a statistical or analytic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestVerdict {
    pub test: String,
    /// Identity being checked (`ibp`, `flow`, `dlr`, ...).
    pub equation: String,
    #[serde(deserialize_with = "nullable_f64")]
    pub statistic: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub se: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub z: f64,
    #[serde(deserialize_with = "nullable_f64")]
    pub threshold: f64,
    pub sided: Sidedness,
    pub pass: bool,
    pub n: usize,
    pub seed: u64,
    pub model_hash: String,
    /// Set when the check could not be carried out; such records never pass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TestVerdict {
    /// Two-sided test of `est.mean = 0`.
    pub fn two_sided(test: impl Into<String>, equation: &str, est: Estimate, n: usize, threshold: f64) -> Self {
        let z = z_score(est.mean, est.se);
        Self {
            test: test.into(),
            equation: equation.into(),
            statistic: est.mean,
            se: est.se,
            z,
            threshold,
            sided: Sidedness::TwoSided,
            pass: z.abs() <= threshold,
            n,
            seed: 0,
            model_hash: String::new(),
            error: None,
        }
    }

    /// One-sided bound on `statistic`; `z` measures the distance to the bound in SE.
    pub fn bounded(
        test: impl Into<String>,
        equation: &str,
        statistic: f64,
        se: f64,
        bound: f64,
        sided: Sidedness,
        n: usize,
    ) -> Self {
        let pass = match sided {
            Sidedness::Upper => statistic <= bound,
            Sidedness::Lower => statistic >= bound,
            Sidedness::TwoSided => panic!("use two_sided for two-sided verdicts"),
        };
        Self {
            test: test.into(),
            equation: equation.into(),
            statistic,
            se,
            z: z_score(statistic - bound, se),
            threshold: bound,
            sided,
            pass,
            n,
            seed: 0,
            model_hash: String::new(),
            error: None,
        }
    }

    /// Failed record for a check that raised an error.
    pub fn error(test: impl Into<String>, equation: &str, message: impl Into<String>) -> Self {
        Self {
            test: test.into(),
            equation: equation.into(),
            statistic: 0.0,
            se: 0.0,
            z: 0.0,
            threshold: 0.0,
            sided: Sidedness::TwoSided,
            pass: false,
            n: 0,
            seed: 0,
            model_hash: String::new(),
            error: Some(message.into()),
        }
    }

    pub fn with_context(mut self, seed: u64, model_hash: &str) -> Self {
        self.seed = seed;
        self.model_hash = model_hash.into();
        self
    }
}

/// Seed and threshold shared by the tests of one suite run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyContext {
    pub seed: u64,
    pub threshold: f64,
}

impl VerifyContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

pub fn all_pass(verdicts: &[TestVerdict]) -> bool {
    verdicts.iter().all(|v| v.pass)
}

pub fn write_verdicts_json(verdicts: &[TestVerdict], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, verdicts)?;
    writeln!(f)?;
    Ok(())
}

#[derive(Serialize)]
struct CsvRow<'a> {
    test: &'a str,
    equation: &'a str,
    statistic: f64,
    se: f64,
    z: f64,
    threshold: f64,
    pass: bool,
    n: usize,
    seed: u64,
    model_hash: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    version: Option<&'a str>,
    error: &'a str,
}

/// One row per verdict.
pub fn write_verdicts_csv<W: Write>(verdicts: &[TestVerdict], w: W) -> Result<()> {
    csv_rows(verdicts, None, w)
}

/// Like [`write_verdicts_csv`] with a `version` column before `error`.
pub fn write_verdicts_csv_versioned<W: Write>(verdicts: &[TestVerdict], version: &str, w: W) -> Result<()> {
    csv_rows(verdicts, Some(version), w)
}

fn csv_rows<W: Write>(verdicts: &[TestVerdict], version: Option<&str>, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for v in verdicts {
        out.serialize(CsvRow {
            test: &v.test,
            equation: &v.equation,
            statistic: v.statistic,
            se: v.se,
            z: v.z,
            threshold: v.threshold,
            pass: v.pass,
            n: v.n,
            seed: v.seed,
            model_hash: &v.model_hash,
            version,
            error: v.error.as_deref().unwrap_or(""),
        })
        .map_err(|e| crate::Error::Io(std::io::Error::other(e)))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sided_rule() {
        let v = TestVerdict::two_sided("t", "ibp", Estimate { mean: 0.4, se: 0.1 }, 100, 5.0);
        assert!(v.pass && (v.z - 4.0).abs() < 1e-12);
        let v = TestVerdict::two_sided("t", "ibp", Estimate { mean: -0.6, se: 0.1 }, 100, 5.0);
        assert!(!v.pass);
        let v = TestVerdict::two_sided("t", "ibp", Estimate::exact(0.0), 100, 5.0);
        assert!(v.pass && v.z == 0.0);
        let v = TestVerdict::two_sided("t", "ibp", Estimate::exact(1e-3), 100, 5.0);
        assert!(!v.pass);
    }

    #[test]
    fn one_sided_rule() {
        assert!(TestVerdict::bounded("t", "m", 1.0, 0.1, 1.2, Sidedness::Upper, 1).pass);
        assert!(!TestVerdict::bounded("t", "m", 1.3, 0.1, 1.2, Sidedness::Upper, 1).pass);
        assert!(TestVerdict::bounded("t", "m", 0.95, 0.01, 0.9, Sidedness::Lower, 1).pass);
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let v = vec![TestVerdict::two_sided("a,b", "ibp", Estimate { mean: 0.1, se: 0.1 }, 10, 5.0).with_context(7, "abc")];
        let mut buf = vec![];
        write_verdicts_csv(&v, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("test,equation,statistic,se,z,threshold,pass,n,seed,model_hash,error\n"));
        assert!(text.contains("\"a,b\",ibp,0.1,0.1,1.0,5.0,true,10,7,abc,\n"));
        let mut buf = vec![];
        write_verdicts_csv_versioned(&v, "v1-gabc", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("test,equation,statistic,se,z,threshold,pass,n,seed,model_hash,version,error\n"));
        assert!(text.ends_with(",7,abc,v1-gabc,\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.json");
        write_verdicts_json(&v, &p).unwrap();
        let back: Vec<TestVerdict> = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(back, v);
        let e = TestVerdict::error("suite:dlr", "dlr", "too few samples");
        assert!(!e.pass && !all_pass(std::slice::from_ref(&e)));
        assert!(serde_json::to_string(&e).unwrap().contains("too few samples"));
        assert!(!serde_json::to_string(&v[0]).unwrap().contains("error"));
        let inf = TestVerdict::bounded("t", "m", f64::INFINITY, 0.0, 1.0, Sidedness::Upper, 1);
        let back: TestVerdict = serde_json::from_str(&serde_json::to_string(&inf).unwrap()).unwrap();
        assert!(back.statistic.is_nan() && !back.pass);
    }
}
