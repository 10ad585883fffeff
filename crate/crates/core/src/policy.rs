//! Choice of the truncation cutoff `N(n)` for the delta sum.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffPolicy {
    /// No truncation.
    Full,
    /// `N = n^(1 / ln ln n)`.
    Paper,
    /// `N = n^(1 / ln ln ln n)`.
    #[default]
    Corrected,
    Fixed(u64),
}

impl CutoffPolicy {
    /// `N(n)` before capping at `n` (may be below 2 or above `n`).
    pub fn raw(&self, n: u64) -> f64 {
        let x = n as f64;
        let lnln = x.ln().ln();
        match self {
            CutoffPolicy::Full => f64::INFINITY,
            CutoffPolicy::Fixed(c) => *c as f64,
            CutoffPolicy::Paper => {
                if lnln <= 0.0 {
                    f64::INFINITY
                } else {
                    x.powf(1.0 / lnln)
                }
            }
            CutoffPolicy::Corrected => {
                let lnlnln = lnln.ln();
                if !(lnlnln > 0.0) {
                    f64::INFINITY
                } else {
                    x.powf(1.0 / lnlnln)
                }
            }
        }
    }

    /// The cutoff to pass to a sweep: `None` for no truncation, otherwise
    /// `floor(N(n))` capped at `n` (a cutoff `>= n` truncates nothing).
    pub fn resolve(&self, n: u64) -> Result<Option<u64>> {
        match self {
            CutoffPolicy::Full => Ok(None),
            CutoffPolicy::Fixed(c) if *c < 2 => {
                Err(Error::InvalidArgument(format!("fixed cutoff must be >= 2, got {c}")))
            }
            CutoffPolicy::Fixed(c) => Ok(Some(*c)),
            _ => {
                let raw = self.raw(n);
                let capped = if raw >= n as f64 { n } else { raw.floor() as u64 };
                Ok(Some(capped.max(2)))
            }
        }
    }
}

impl fmt::Display for CutoffPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutoffPolicy::Full => write!(f, "full"),
            CutoffPolicy::Paper => write!(f, "paper"),
            CutoffPolicy::Corrected => write!(f, "corrected"),
            CutoffPolicy::Fixed(c) => write!(f, "fixed:{c}"),
        }
    }
}

impl FromStr for CutoffPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(CutoffPolicy::Full),
            "paper" => Ok(CutoffPolicy::Paper),
            "corrected" => Ok(CutoffPolicy::Corrected),
            _ => match s.strip_prefix("fixed:") {
                Some(v) => v
                    .parse()
                    .map(CutoffPolicy::Fixed)
                    .map_err(|_| Error::InvalidArgument(format!("bad fixed cutoff {v:?}"))),
                None => Err(Error::InvalidArgument(format!("unknown cutoff policy {s:?}"))),
            },
        }
    }
}
