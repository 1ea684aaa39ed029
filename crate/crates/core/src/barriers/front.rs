//! Offset sets `{dist(x, {u₀>0}) < t^{1/4}}` and `{dist(x, {u₀<0}) > t^{1/4}}`
//! of one-dimensional initial data.

use serde::Serialize;

use super::Sense;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffsetSet {
    pub mask: Vec<bool>,
    /// Disjoint open intervals, sorted; unbounded ends are infinite.
    pub intervals: Vec<(f64, f64)>,
}

/// Maximal open intervals where `u > 0` (`positive`) or `u < 0`, with
/// endpoints at linearly interpolated zero crossings. Components touching the
/// end of the grid extend to infinity.
pub fn sign_intervals(x: &[f64], u: &[f64], positive: bool) -> Vec<(f64, f64)> {
    let inside = |v: f64| if positive { v > 0.0 } else { v < 0.0 };
    let crossing = |i: usize| {
        let (a, b) = (u[i], u[i + 1]);
        if a == 0.0 {
            x[i]
        } else if b == 0.0 {
            x[i + 1]
        } else {
            x[i] + (x[i + 1] - x[i]) * a / (a - b)
        }
    };
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..x.len() {
        let now = inside(u[i]);
        match (start, now) {
            (None, true) => {
                start = Some(if i == 0 {
                    f64::NEG_INFINITY
                } else {
                    crossing(i - 1)
                })
            }
            (Some(s), false) => {
                out.push((s, crossing(i - 1)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, f64::INFINITY));
    }
    out
}

fn merge(mut iv: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in iv {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

pub fn front_offset_sets(x: &[f64], u0: &[f64], t: f64, sense: Sense) -> Result<OffsetSet> {
    if x.len() != u0.len() {
        return Err(Error::Shape(format!(
            "{} nodes but {} values",
            x.len(),
            u0.len()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("offset time must be >= 0, got {t}")));
    }
    let d = t.powf(0.25);
    match sense {
        Sense::Super => {
            let iv = merge(
                sign_intervals(x, u0, true)
                    .into_iter()
                    .map(|(a, b)| (a - d, b + d))
                    .collect(),
            );
            let mask = x
                .iter()
                .map(|&p| iv.iter().any(|&(a, b)| a < p && p < b))
                .collect();
            Ok(OffsetSet {
                mask,
                intervals: iv,
            })
        }
        Sense::Sub => {
            // complement of the closed d-neighbourhood of {u₀ < 0}
            let closed = merge(
                sign_intervals(x, u0, false)
                    .into_iter()
                    .map(|(a, b)| (a - d, b + d))
                    .collect(),
            );
            let mask = x
                .iter()
                .map(|&p| !closed.iter().any(|&(a, b)| a <= p && p <= b))
                .collect();
            let mut intervals = Vec::new();
            let mut lo = f64::NEG_INFINITY;
            for &(a, b) in &closed {
                if a > lo {
                    intervals.push((lo, a));
                }
                lo = b;
            }
            if lo < f64::INFINITY {
                intervals.push((lo, f64::INFINITY));
            }
            Ok(OffsetSet { mask, intervals })
        }
    }
}
