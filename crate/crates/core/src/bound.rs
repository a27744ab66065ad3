//! Closed-form communication-cost bounds.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::RunStats;
use crate::error::{Error, Result};
use crate::hashing::required_digest_bits;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    TwoWay,
    Skew,
    Hashed,
    Multiway,
    ClassicTwoWay,
    ClassicSkew,
    ClassicHashed,
    ClassicMultiway,
}

impl BoundKind {
    pub const ALL: [BoundKind; 8] = [
        BoundKind::TwoWay,
        BoundKind::Skew,
        BoundKind::Hashed,
        BoundKind::Multiway,
        BoundKind::ClassicTwoWay,
        BoundKind::ClassicSkew,
        BoundKind::ClassicHashed,
        BoundKind::ClassicMultiway,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::TwoWay => "two-way",
            BoundKind::Skew => "skew",
            BoundKind::Hashed => "hashed",
            BoundKind::Multiway => "multiway",
            BoundKind::ClassicTwoWay => "classic-two-way",
            BoundKind::ClassicSkew => "classic-skew",
            BoundKind::ClassicHashed => "classic-hashed",
            BoundKind::ClassicMultiway => "classic-multiway",
        }
    }

    pub fn is_classic(self) -> bool {
        matches!(
            self,
            BoundKind::ClassicTwoWay
                | BoundKind::ClassicSkew
                | BoundKind::ClassicHashed
                | BoundKind::ClassicMultiway
        )
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown bound kind `{s}`")))
    }
}

/// Symbols of the bounds. Unset ones are only an error for kinds that use them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: Option<u64>,
    pub c: Option<u64>,
    pub w: Option<u64>,
    pub h: Option<u64>,
    pub r: Option<f64>,
    pub m: Option<u64>,
    pub k: Option<u64>,
    pub p: Option<u64>,
}

impl BoundParams {
    /// Parameters as measured by a run. `r` is the replication of output tuples.
    pub fn from_stats(s: &RunStats) -> Self {
        Self {
            n: Some(s.n),
            c: Some(s.c),
            w: Some(s.w),
            h: Some(s.h),
            r: Some(s.replication),
            m: Some(s.m),
            k: Some(s.k),
            p: Some(s.p),
        }
    }
}

fn need<T: Copy>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(Error::MissingParameter(name))
}

/// Evaluates a bound with digest widths rounded up to whole bits,
/// `ceil(3 log2 m)`.
pub fn theorem_bound(kind: BoundKind, p: &BoundParams) -> Result<f64> {
    evaluate(kind, p, |m| required_digest_bits(m) as f64)
}

/// The same bound with `3 log2 m` left unrounded.
pub fn unrounded_bound(kind: BoundKind, p: &BoundParams) -> Result<f64> {
    evaluate(kind, p, |m| 3.0 * (m.max(2) as f64).log2())
}

fn evaluate(kind: BoundKind, p: &BoundParams, width: impl Fn(u64) -> f64) -> Result<f64> {
    let n = || need(p.n, "n").map(|v| v as f64);
    let c = || need(p.c, "c").map(|v| v as f64);
    let w = || need(p.w, "w").map(|v| v as f64);
    let h = || need(p.h, "h").map(|v| v as f64);
    let r = || need(p.r, "r");
    let m = || need(p.m, "m");
    let k = || need(p.k, "k").map(|v| v as f64);
    let pp = || need(p.p, "p").map(|v| v as f64);
    Ok(match kind {
        BoundKind::TwoWay => 2.0 * n()? * c()? + h()? * (c()? + w()?),
        BoundKind::Skew => 2.0 * n()? * c()? + r()? * h()? * (c()? + w()?),
        BoundKind::Hashed => 2.0 * n()? * width(m()?) + h()? * (c()? + w()?),
        BoundKind::Multiway => k()? * n()? * pp()? * width(m()?) + h()? * (c()? + w()?),
        BoundKind::ClassicTwoWay | BoundKind::ClassicHashed => 4.0 * n()? * w()?,
        BoundKind::ClassicSkew => 2.0 * n()? * w()? * (1.0 + r()?),
        BoundKind::ClassicMultiway => 2.0 * k()? * n()? * w()?,
    })
}
