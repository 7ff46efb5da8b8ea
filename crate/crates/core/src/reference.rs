//! Reference trajectories for the tracking experiments.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// `y*_{k+1} = r y*_k (1 - y*_k)`.
    Logistic {
        r: f64,
        #[serde(default = "default_y0")]
        y0: f64,
    },
    Constant {
        value: f64,
    },
    /// One value per line.
    File {
        path: PathBuf,
    },
}

fn default_y0() -> f64 {
    0.7
}

impl ReferenceSpec {
    pub fn logistic(r: f64) -> Self {
        ReferenceSpec::Logistic { r, y0: default_y0() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ReferenceSpec::Logistic { r, y0 } => {
                if !(*r > 0.0 && *r < 4.0) {
                    return Err(Error::Config(format!("reference.r must lie in (0, 4), got {r}")));
                }
                if !(*y0 > 0.0 && *y0 < 1.0) {
                    return Err(Error::Config(format!("reference.y0 must lie in (0, 1), got {y0}")));
                }
            }
            ReferenceSpec::Constant { value } if !value.is_finite() => {
                return Err(Error::Config(format!("reference.value must be finite, got {value}")));
            }
            _ => {}
        }
        Ok(())
    }
}

/// `[y*_1, .., y*_horizon]`; entry `t` is the target for the output at `t + 1`.
pub fn generate(spec: &ReferenceSpec, horizon: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec {
        ReferenceSpec::Logistic { r, y0 } => {
            let mut y = *y0;
            Ok((0..horizon)
                .map(|_| {
                    y = r * y * (1.0 - y);
                    y
                })
                .collect())
        }
        ReferenceSpec::Constant { value } => Ok(vec![*value; horizon]),
        ReferenceSpec::File { path } => {
            let values = read_column(path)?;
            if values.len() < horizon {
                return Err(Error::Config(format!(
                    "{} holds {} values, horizon is {horizon}",
                    path.display(),
                    values.len()
                )));
            }
            Ok(values[..horizon].to_vec())
        }
    }
}

/// Reads a single column of finite reals, one per line.
pub fn read_column(path: &std::path::Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        if field.is_empty() {
            continue;
        }
        let v: f64 = field.parse().map_err(|_| {
            Error::Config(format!("{}:{}: not a number: {field:?}", path.display(), line + 1))
        })?;
        if !v.is_finite() {
            return Err(Error::Config(format!(
                "{}:{}: non-finite value",
                path.display(),
                line + 1
            )));
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn logistic_first_iterate() {
        let y = generate(&ReferenceSpec::logistic(1.5), 3).unwrap();
        assert!((y[0] - 0.315).abs() < 1e-15);
    }

    #[test]
    fn logistic_fixed_point() {
        let y = generate(&ReferenceSpec::logistic(1.5), 300).unwrap();
        assert!(y[99..].iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-6));
    }

    #[test]
    fn logistic_r344_settles_on_a_cycle() {
        // r = 3.44 lies below the period-4 onset 1 + sqrt(6), so the
        // four-step recurrence holds through an underlying two-cycle
        let y = generate(&ReferenceSpec::logistic(3.44), 2000).unwrap();
        let tail = &y[1900..1990];
        for k in 0..80 {
            assert!((tail[k + 4] - tail[k]).abs() < 1e-9);
            assert!((tail[k + 2] - tail[k]).abs() < 1e-9);
            assert!((tail[k + 1] - tail[k]).abs() > 0.3);
        }
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn logistic_chaotic_sensitivity() {
        let a = generate(&ReferenceSpec::Logistic { r: 3.8, y0: 0.7 }, 100).unwrap();
        let b = generate(&ReferenceSpec::Logistic { r: 3.8, y0: 0.7 + 1e-9 }, 100).unwrap();
        assert!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 0.1));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate(&ReferenceSpec::Logistic { r: 4.5, y0: 0.5 }, 5).is_err());
        assert!(generate(&ReferenceSpec::Logistic { r: 2.0, y0: 1.0 }, 5).is_err());
        assert!(generate(&ReferenceSpec::Constant { value: f64::NAN }, 5).is_err());
    }

    #[test]
    fn file_backed() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "0.1\n0.2\n0.3").unwrap();
        let spec = ReferenceSpec::File {
            path: f.path().to_path_buf(),
        };
        assert_eq!(generate(&spec, 2).unwrap(), vec![0.1, 0.2]);
        assert!(generate(&spec, 4).is_err());

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "0.1\nNaN").unwrap();
        let spec = ReferenceSpec::File {
            path: bad.path().to_path_buf(),
        };
        assert!(generate(&spec, 2).is_err());
        let missing = ReferenceSpec::File {
            path: "/nonexistent/ref.csv".into(),
        };
        assert!(generate(&missing, 1).is_err());
    }

    #[test]
    fn deterministic() {
        let s = ReferenceSpec::logistic(3.8);
        assert_eq!(generate(&s, 500).unwrap(), generate(&s, 500).unwrap());
    }
}
