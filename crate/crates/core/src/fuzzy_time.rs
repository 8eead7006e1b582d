//! Trapezoidal fuzzy periods and the polygon-based temporal distance.
//!
//! A period is a membership function over fractional years that is 0 outside
//! `[a, d]`, 1 on `[b, c]` and linear on the two flanks. Distances treat the
//! period as a polygon in the (time, membership) plane with years on the x
//! axis and membership degree on the y axis, without any rescaling.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_distance, Coord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeriodError {
    #[error("period breakpoints must be finite")]
    NonFinite,
    #[error("period breakpoints out of order: {0} > {1}")]
    Unordered(f64, f64),
    #[error("malformed date token {token:?}")]
    Parse { token: String },
}

/// Uncertain valid time as a trapezoidal fuzzy set with breakpoints `a ≤ b ≤ c ≤ d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct FuzzyPeriod {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl FuzzyPeriod {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, PeriodError> {
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(PeriodError::NonFinite);
        }
        for (lo, hi) in [(a, b), (b, c), (c, d)] {
            if lo > hi {
                return Err(PeriodError::Unordered(lo, hi));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// Crisp interval `[start, end]`.
    pub fn crisp(start: f64, end: f64) -> Result<Self, PeriodError> {
        Self::new(start, start, end, end)
    }

    pub fn breakpoints(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    /// Support envelope `[a, d]`.
    pub fn support(&self) -> (f64, f64) {
        (self.a, self.d)
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            a: self.a + dt,
            b: self.b + dt,
            c: self.c + dt,
            d: self.d + dt,
        }
    }

    pub fn membership(&self, t: f64) -> f64 {
        if t < self.a || t > self.d {
            0.0
        } else if t >= self.b && t <= self.c {
            1.0
        } else if t < self.b {
            (t - self.a) / (self.b - self.a)
        } else {
            (self.d - t) / (self.d - self.c)
        }
    }

    /// Area under the membership curve, in year·degree.
    pub fn area(&self) -> f64 {
        ((self.d - self.a) + (self.c - self.b)) / 2.0
    }

    /// Value at `t` of the linear piece that contains `probe`.
    ///
    /// Used for integration so that vertical flanks (`a == b`, `c == d`)
    /// never leak an ambiguous endpoint value into a segment.
    fn piece_value(&self, probe: f64, t: f64) -> f64 {
        if probe < self.a || probe > self.d {
            0.0
        } else if probe < self.b {
            (t - self.a) / (self.b - self.a)
        } else if probe <= self.c {
            1.0
        } else {
            (self.d - t) / (self.d - self.c)
        }
    }

    /// Area under `min(self, other)`, integrated exactly segment by segment.
    pub fn intersection_area(&self, other: &FuzzyPeriod) -> f64 {
        let lo = self.a.max(other.a);
        let hi = self.d.min(other.d);
        if lo >= hi {
            return 0.0;
        }
        let mut ts: Vec<f64> = self
            .breakpoints()
            .into_iter()
            .chain(other.breakpoints())
            .filter(|t| *t > lo && *t < hi)
            .collect();
        ts.push(lo);
        ts.push(hi);
        ts.sort_by(f64::total_cmp);
        ts.dedup();

        let mut total = 0.0;
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let mid = 0.5 * (t0 + t1);
            let (f0, f1) = (self.piece_value(mid, t0), self.piece_value(mid, t1));
            let (g0, g1) = (other.piece_value(mid, t0), other.piece_value(mid, t1));
            let (d0, d1) = (f0 - g0, f1 - g1);
            if d0 * d1 < 0.0 {
                // the two lines cross inside the segment
                let tc = t0 + (t1 - t0) * d0 / (d0 - d1);
                let vc = f0 + (f1 - f0) * (tc - t0) / (t1 - t0);
                total += 0.5 * (tc - t0) * (f0.min(g0) + vc);
                total += 0.5 * (t1 - tc) * (vc + f1.min(g1));
            } else {
                total += 0.5 * (t1 - t0) * (f0.min(g0) + f1.min(g1));
            }
        }
        total
    }

    fn polygon(&self) -> [Coord; 5] {
        [
            Coord::new(self.a, 0.0),
            Coord::new(self.b, 1.0),
            Coord::new(self.c, 1.0),
            Coord::new(self.d, 0.0),
            Coord::new(self.a, 0.0),
        ]
    }

    /// Shortest distance between the two trapezoid polygons in the
    /// (time, membership) plane. Zero when the supports overlap or touch.
    pub fn gap(&self, other: &FuzzyPeriod) -> f64 {
        if self.a <= other.d && other.a <= self.d {
            return 0.0;
        }
        let (p, q) = (self.polygon(), other.polygon());
        let mut best = f64::INFINITY;
        for e in p.windows(2) {
            for f in q.windows(2) {
                best = best.min(segment_distance(e[0], e[1], f[0], f[1]));
            }
        }
        best
    }

    /// Asymmetric distance from this (query) period to `candidate`:
    /// `gap + area(query) − intersection_area`.
    pub fn temporal_distance(&self, candidate: &FuzzyPeriod) -> f64 {
        let d = self.gap(candidate) + self.area() - self.intersection_area(candidate);
        d.max(0.0)
    }
}

/// Free-function form of [`FuzzyPeriod::temporal_distance`]; `query` plays the role of A.
pub fn temporal_distance(query: &FuzzyPeriod, candidate: &FuzzyPeriod) -> f64 {
    query.temporal_distance(candidate)
}

impl TryFrom<[f64; 4]> for FuzzyPeriod {
    type Error = PeriodError;

    fn try_from([a, b, c, d]: [f64; 4]) -> Result<Self, Self::Error> {
        Self::new(a, b, c, d)
    }
}

impl From<FuzzyPeriod> for [f64; 4] {
    fn from(p: FuzzyPeriod) -> Self {
        p.breakpoints()
    }
}

impl fmt::Display for FuzzyPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{};{};{}", self.a, self.b, self.c, self.d)
    }
}

fn parse_year(token: &str) -> Result<f64, PeriodError> {
    let token = token.trim();
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return Err(PeriodError::Parse { token: token.to_string() });
    }
    token
        .parse::<u32>()
        .map(f64::from)
        .map_err(|_| PeriodError::Parse { token: token.to_string() })
}

fn parse_real(token: &str) -> Result<f64, PeriodError> {
    let token = token.trim();
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(PeriodError::Parse { token: token.to_string() }),
    }
}

/// Parses `"YYYY"`, `"YYYY-YYYY"` or four `;`-separated reals.
pub fn parse_fuzzy_date(text: &str) -> Result<FuzzyPeriod, PeriodError> {
    let text = text.trim();
    if text.contains(';') {
        let parts: Vec<&str> = text.split(';').collect();
        if parts.len() != 4 {
            return Err(PeriodError::Parse { token: text.to_string() });
        }
        let v = parts.iter().map(|p| parse_real(p)).collect::<Result<Vec<_>, _>>()?;
        return FuzzyPeriod::new(v[0], v[1], v[2], v[3]);
    }
    if let Some((start, end)) = text.split_once('-') {
        let (start, end) = (parse_year(start)?, parse_year(end)?);
        return FuzzyPeriod::crisp(start, end);
    }
    let year = parse_year(text)?;
    FuzzyPeriod::crisp(year, year + 1.0)
}

impl FromStr for FuzzyPeriod {
    type Err = PeriodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_fuzzy_date(s)
    }
}
