//! Ground-control-point transforms for georeferencing scanned maps:
//! least-squares affine and polynomial fits, and thin-plate splines.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Coord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPoint {
    pub source: Coord,
    pub target: Coord,
}

impl ControlPoint {
    pub fn new(sx: f64, sy: f64, tx: f64, ty: f64) -> Self {
        Self {
            source: Coord::new(sx, sy),
            target: Coord::new(tx, ty),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeorefError {
    #[error("need at least {needed} control points, got {found}")]
    TooFewPoints { needed: usize, found: usize },
    #[error("control points are degenerate (collinear or rank deficient)")]
    RankDeficient,
    #[error("polynomial order must be 1, 2 or 3, got {0}")]
    InvalidOrder(usize),
    #[error("duplicate source point ({x}, {y})")]
    DuplicateSource { x: f64, y: f64 },
    #[error("regularization must be nonnegative and finite, got {0}")]
    InvalidRegularization(f64),
    #[error("non-finite control point")]
    NonFinite,
    #[error("singular system")]
    Singular,
    #[error("bad control point file: {0}")]
    File(String),
}

/// A fitted forward mapping from map coordinates to planar meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// `x' = x[0] + x[1]·x + x[2]·y`, likewise for `y'`.
    Affine { x: [f64; 3], y: [f64; 3] },
    /// Coefficients over monomials ordered by total degree, then by
    /// decreasing power of x: 1, x, y, x², xy, y², x³, …
    Polynomial { order: usize, x: Vec<f64>, y: Vec<f64> },
    /// Thin-plate spline with kernel r² ln r, fitted in normalized source
    /// coordinates `(p − center) / scale`.
    Tps {
        center: Coord,
        scale: f64,
        lambda: f64,
        centers: Vec<Coord>,
        weights_x: Vec<f64>,
        weights_y: Vec<f64>,
        affine_x: [f64; 3],
        affine_y: [f64; 3],
    },
}

impl Transform {
    pub fn identity() -> Self {
        Transform::Affine {
            x: [0.0, 1.0, 0.0],
            y: [0.0, 0.0, 1.0],
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Transform::Affine { .. } => 6,
            Transform::Polynomial { x, y, .. } => x.len() + y.len(),
            Transform::Tps { weights_x, weights_y, .. } => weights_x.len() + weights_y.len() + 6,
        }
    }

    pub fn apply_point(&self, p: Coord) -> Coord {
        match self {
            Transform::Affine { x, y } => Coord::new(
                x[0] + x[1] * p.x + x[2] * p.y,
                y[0] + y[1] * p.x + y[2] * p.y,
            ),
            Transform::Polynomial { order, x, y } => {
                let m = monomials(p, *order);
                Coord::new(dot(&m, x), dot(&m, y))
            }
            Transform::Tps {
                center,
                scale,
                centers,
                weights_x,
                weights_y,
                affine_x,
                affine_y,
                ..
            } => {
                let q = normalize(p, *center, *scale);
                let (mut u, mut v) = (
                    affine_x[0] + affine_x[1] * q.x + affine_x[2] * q.y,
                    affine_y[0] + affine_y[1] * q.x + affine_y[2] * q.y,
                );
                for ((c, wx), wy) in centers.iter().zip(weights_x).zip(weights_y) {
                    let k = kernel(q.distance(*c));
                    u += wx * k;
                    v += wy * k;
                }
                Coord::new(u, v)
            }
        }
    }
}

pub fn apply(t: &Transform, points: &[Coord]) -> Vec<Coord> {
    points.iter().map(|p| t.apply_point(*p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub per_point: Vec<f64>,
    pub rmse: f64,
    pub max: f64,
}

/// Distance between each transformed source and its target, with
/// `rmse = sqrt(mean(residual²))`.
pub fn residuals(t: &Transform, gcps: &[ControlPoint]) -> Residuals {
    let per_point: Vec<f64> = gcps.iter().map(|g| t.apply_point(g.source).distance(g.target)).collect();
    let rmse = if per_point.is_empty() {
        0.0
    } else {
        (per_point.iter().map(|r| r * r).sum::<f64>() / per_point.len() as f64).sqrt()
    };
    let max = per_point.iter().copied().fold(0.0, f64::max);
    Residuals { per_point, rmse, max }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn monomials(p: Coord, order: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity((order + 1) * (order + 2) / 2);
    for degree in 0..=order {
        for j in 0..=degree {
            out.push(p.x.powi((degree - j) as i32) * p.y.powi(j as i32));
        }
    }
    out
}

fn check_finite(gcps: &[ControlPoint]) -> Result<(), GeorefError> {
    let finite = |c: Coord| c.x.is_finite() && c.y.is_finite();
    if gcps.iter().all(|g| finite(g.source) && finite(g.target)) {
        Ok(())
    } else {
        Err(GeorefError::NonFinite)
    }
}

fn targets(gcps: &[ControlPoint]) -> DMatrix<f64> {
    DMatrix::from_fn(gcps.len(), 2, |i, j| if j == 0 { gcps[i].target.x } else { gcps[i].target.y })
}

/// Scales each column to unit norm; returns the scaled matrix and the norms.
fn equilibrate(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>), GeorefError> {
    let norms: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    if norms.contains(&0.0) {
        return Err(GeorefError::RankDeficient);
    }
    let mut scaled = a.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    Ok((scaled, norms))
}

const RANK_TOLERANCE: f64 = 1e-10;

/// Least squares through Householder QR.
fn solve_qr(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, GeorefError> {
    let (scaled, norms) = equilibrate(a)?;
    let qr = scaled.qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| v.abs() <= RANK_TOLERANCE * diag_max) {
        return Err(GeorefError::RankDeficient);
    }
    let qtb = qr.q().transpose() * b;
    let mut x = r.solve_upper_triangular(&qtb).ok_or(GeorefError::RankDeficient)?;
    for (j, n) in norms.iter().enumerate() {
        x.row_mut(j).scale_mut(1.0 / n);
    }
    Ok(x)
}

/// Least squares through the singular value decomposition.
fn solve_svd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, GeorefError> {
    let (scaled, norms) = equilibrate(a)?;
    let svd = scaled.svd(true, true);
    let s = &svd.singular_values;
    let s_max = s.max();
    if s.iter().any(|v| *v <= RANK_TOLERANCE * s_max) {
        return Err(GeorefError::RankDeficient);
    }
    let mut x = svd.solve(b, 0.0).map_err(|_| GeorefError::Singular)?;
    for (j, n) in norms.iter().enumerate() {
        x.row_mut(j).scale_mut(1.0 / n);
    }
    Ok(x)
}

pub fn fit_affine(gcps: &[ControlPoint]) -> Result<Transform, GeorefError> {
    check_finite(gcps)?;
    if gcps.len() < 3 {
        return Err(GeorefError::TooFewPoints { needed: 3, found: gcps.len() });
    }
    let a = DMatrix::from_fn(gcps.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => gcps[i].source.x,
        _ => gcps[i].source.y,
    });
    let sol = solve_qr(&a, &targets(gcps))?;
    Ok(Transform::Affine {
        x: [sol[(0, 0)], sol[(1, 0)], sol[(2, 0)]],
        y: [sol[(0, 1)], sol[(1, 1)], sol[(2, 1)]],
    })
}

pub fn fit_polynomial(gcps: &[ControlPoint], order: usize) -> Result<Transform, GeorefError> {
    if !(1..=3).contains(&order) {
        return Err(GeorefError::InvalidOrder(order));
    }
    check_finite(gcps)?;
    let terms = (order + 1) * (order + 2) / 2;
    if gcps.len() < terms {
        return Err(GeorefError::TooFewPoints { needed: terms, found: gcps.len() });
    }
    let rows: Vec<Vec<f64>> = gcps.iter().map(|g| monomials(g.source, order)).collect();
    let a = DMatrix::from_fn(gcps.len(), terms, |i, j| rows[i][j]);
    let sol = solve_svd(&a, &targets(gcps))?;
    Ok(Transform::Polynomial {
        order,
        x: sol.column(0).iter().copied().collect(),
        y: sol.column(1).iter().copied().collect(),
    })
}

fn kernel(r: f64) -> f64 {
    if r == 0.0 {
        0.0
    } else {
        r * r * r.ln()
    }
}

fn normalize(p: Coord, center: Coord, scale: f64) -> Coord {
    Coord::new((p.x - center.x) / scale, (p.y - center.y) / scale)
}

/// Thin-plate spline through the control points. With `lambda = 0` it
/// interpolates them exactly; larger values trade fidelity for smoothness.
/// `lambda` is added to the kernel diagonal in normalized coordinates.
pub fn fit_tps(gcps: &[ControlPoint], lambda: f64) -> Result<Transform, GeorefError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(GeorefError::InvalidRegularization(lambda));
    }
    check_finite(gcps)?;
    let n = gcps.len();
    if n < 3 {
        return Err(GeorefError::TooFewPoints { needed: 3, found: n });
    }
    if lambda == 0.0 {
        let mut sorted: Vec<Coord> = gcps.iter().map(|g| g.source).collect();
        sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GeorefError::DuplicateSource { x: w[0].x, y: w[0].y });
        }
    }
    let center = Coord::new(
        gcps.iter().map(|g| g.source.x).sum::<f64>() / n as f64,
        gcps.iter().map(|g| g.source.y).sum::<f64>() / n as f64,
    );
    let scale = gcps.iter().map(|g| g.source.distance(center)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(GeorefError::RankDeficient);
    }
    let pts: Vec<Coord> = gcps.iter().map(|g| normalize(g.source, center, scale)).collect();

    let p = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => pts[i].x,
        _ => pts[i].y,
    });
    let sv = p.clone().svd(false, false).singular_values;
    if sv.min() <= RANK_TOLERANCE * sv.max() {
        return Err(GeorefError::RankDeficient);
    }

    let size = n + 3;
    let mut l = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            l[(i, j)] = kernel(pts[i].distance(pts[j]));
        }
        l[(i, i)] += lambda;
        for k in 0..3 {
            l[(i, n + k)] = p[(i, k)];
            l[(n + k, i)] = p[(i, k)];
        }
    }
    let mut rhs = DMatrix::<f64>::zeros(size, 2);
    for (i, g) in gcps.iter().enumerate() {
        rhs[(i, 0)] = g.target.x;
        rhs[(i, 1)] = g.target.y;
    }
    let sol = l.lu().solve(&rhs).ok_or(GeorefError::Singular)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(GeorefError::Singular);
    }
    let column = |c: usize| -> DVector<f64> { sol.column(c).into_owned() };
    let (sx, sy) = (column(0), column(1));
    Ok(Transform::Tps {
        center,
        scale,
        lambda,
        centers: pts,
        weights_x: sx.rows(0, n).iter().copied().collect(),
        weights_y: sy.rows(0, n).iter().copied().collect(),
        affine_x: [sx[n], sx[n + 1], sx[n + 2]],
        affine_y: [sy[n], sy[n + 1], sy[n + 2]],
    })
}

/// Reads a delimited file with columns `src_x, src_y, dst_x, dst_y`.
pub fn read_gcps<R: Read>(reader: R) -> Result<Vec<ControlPoint>, GeorefError> {
    #[derive(Deserialize)]
    struct Row {
        src_x: f64,
        src_y: f64,
        dst_x: f64,
        dst_y: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize::<Row>()
        .map(|r| {
            r.map(|r| ControlPoint::new(r.src_x, r.src_y, r.dst_x, r.dst_y))
                .map_err(|e| GeorefError::File(e.to_string()))
        })
        .collect()
}
