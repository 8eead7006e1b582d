//! Minimal planar geometry kernel.
//!
//! Everything is computed in a projected planar reference system with
//! coordinates in meters. Geometries carry the identifier of that system so
//! that values coming from different projections are never mixed silently.
//!
//! The JSON encoding follows the usual web-map feature convention: a `type`
//! tag, nested `coordinates` arrays, and an optional `crs` string. See
//! `docs/geometry-json.md` for the exact layout.

use std::fmt;
use std::sync::Arc;

use geo::algorithm::buffer::{Buffer, BufferStyle, LineCap, LineJoin};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of segments used to approximate a full circle when buffering.
pub const CIRCLE_SEGMENTS: usize = 64;

/// Reference system used when a geometry does not name one.
pub const DEFAULT_CRS: &str = "local";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("negative buffer radius {0}")]
    NegativeRadius(f64),
    #[error("reference system mismatch: {left} vs {right}")]
    CrsMismatch { left: String, right: String },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("ring is not closed (first and last coordinates differ)")]
    RingNotClosed,
    #[error("ring needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("outer ring self-intersects")]
    SelfIntersecting,
    #[error("polyline needs at least 2 coordinates")]
    ShortLine,
    #[error("empty multi-geometry")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Coord {
    pub x: f64,
    pub y: f64,
}

impl Coord {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Coord) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Coord {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Coord> for [f64; 2] {
    fn from(c: Coord) -> Self {
        [c.x, c.y]
    }
}

impl From<(f64, f64)> for Coord {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// Identifier of the planar reference system a geometry lives in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CrsId(Arc<str>);

impl CrsId {
    pub fn new(id: &str) -> Self {
        Self(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Default for CrsId {
    fn default() -> Self {
        Self::new(DEFAULT_CRS)
    }
}

impl fmt::Display for CrsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Coord,
    pub max: Coord,
}

impl Rect {
    pub fn new(a: Coord, b: Coord) -> Self {
        Self {
            min: Coord::new(a.x.min(b.x), a.y.min(b.y)),
            max: Coord::new(a.x.max(b.x), a.y.max(b.y)),
        }
    }

    /// Closed-interval overlap test; touching boxes intersect.
    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    fn expand(&mut self, c: Coord) {
        self.min.x = self.min.x.min(c.x);
        self.min.y = self.min.y.min(c.y);
        self.max.x = self.max.x.max(c.x);
        self.max.y = self.max.y.max(c.y);
    }
}

/// A polygon with a closed, non-self-intersecting outer ring and optional holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Vec<Coord>,
    interiors: Vec<Vec<Coord>>,
}

impl Polygon {
    pub fn new(exterior: Vec<Coord>, interiors: Vec<Vec<Coord>>) -> Result<Self, GeometryError> {
        validate_ring(&exterior)?;
        if ring_self_intersects(&exterior) {
            return Err(GeometryError::SelfIntersecting);
        }
        for hole in &interiors {
            validate_ring(hole)?;
        }
        Ok(Self { exterior, interiors })
    }

    /// Builds a polygon from an open or closed vertex list, closing it if needed.
    pub fn from_vertices(mut vertices: Vec<Coord>) -> Result<Self, GeometryError> {
        if let (Some(first), Some(last)) = (vertices.first().copied(), vertices.last().copied()) {
            if first != last {
                vertices.push(first);
            }
        }
        Self::new(vertices, Vec::new())
    }

    pub fn exterior(&self) -> &[Coord] {
        &self.exterior
    }

    pub fn interiors(&self) -> &[Vec<Coord>] {
        &self.interiors
    }

    pub fn area(&self) -> f64 {
        let holes: f64 = self.interiors.iter().map(|r| ring_signed_area(r).abs()).sum();
        (ring_signed_area(&self.exterior).abs() - holes).max(0.0)
    }

    fn rings(&self) -> impl Iterator<Item = &[Coord]> {
        std::iter::once(self.exterior.as_slice()).chain(self.interiors.iter().map(Vec::as_slice))
    }

    fn contains(&self, p: Coord) -> bool {
        ring_contains(&self.exterior, p) && !self.interiors.iter().any(|h| ring_contains(h, p))
    }

    fn centroid(&self) -> Coord {
        let ring = &self.exterior;
        let a = ring_signed_area(ring);
        if a.abs() < f64::EPSILON {
            return ring[0];
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for w in ring.windows(2) {
            let cross = w[0].x * w[1].y - w[1].x * w[0].y;
            cx += (w[0].x + w[1].x) * cross;
            cy += (w[0].y + w[1].y) * cross;
        }
        Coord::new(cx / (6.0 * a), cy / (6.0 * a))
    }
}

fn validate_ring(ring: &[Coord]) -> Result<(), GeometryError> {
    if ring.iter().any(|c| !c.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if ring.len() < 2 || ring.first() != ring.last() {
        return Err(GeometryError::RingNotClosed);
    }
    let mut distinct: Vec<Coord> = Vec::with_capacity(ring.len());
    for c in &ring[..ring.len() - 1] {
        if !distinct.contains(c) {
            distinct.push(*c);
        }
    }
    if distinct.len() < 3 {
        return Err(GeometryError::TooFewVertices(distinct.len()));
    }
    Ok(())
}

fn ring_self_intersects(ring: &[Coord]) -> bool {
    let n = ring.len() - 1;
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share an endpoint, as do the first and last edges
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(ring[i], ring[i + 1], ring[j], ring[j + 1]) {
                return true;
            }
        }
    }
    false
}

fn ring_signed_area(ring: &[Coord]) -> f64 {
    0.5 * ring
        .windows(2)
        .map(|w| w[0].x * w[1].y - w[1].x * w[0].y)
        .sum::<f64>()
}

fn ring_contains(ring: &[Coord], p: Coord) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Point(Coord),
    Polyline(Vec<Coord>),
    Polygon(Polygon),
    MultiPoint(Vec<Coord>),
    MultiPolyline(Vec<Vec<Coord>>),
    MultiPolygon(Vec<Polygon>),
}

/// A planar geometry tagged with its reference system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryRepr", into = "GeometryRepr")]
pub struct Geometry {
    shape: Shape,
    crs: CrsId,
}

impl Geometry {
    pub fn new(shape: Shape, crs: CrsId) -> Result<Self, GeometryError> {
        validate_shape(&shape)?;
        Ok(Self { shape, crs })
    }

    pub fn point(x: f64, y: f64) -> Self {
        Self {
            shape: Shape::Point(Coord::new(x, y)),
            crs: CrsId::default(),
        }
    }

    pub fn polyline(coords: Vec<Coord>) -> Result<Self, GeometryError> {
        Self::new(Shape::Polyline(coords), CrsId::default())
    }

    pub fn polygon(polygon: Polygon) -> Self {
        Self {
            shape: Shape::Polygon(polygon),
            crs: CrsId::default(),
        }
    }

    pub fn with_crs(mut self, crs: CrsId) -> Self {
        self.crs = crs;
        self
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn crs(&self) -> &CrsId {
        &self.crs
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Point(_) => "Point",
            Shape::Polyline(_) => "LineString",
            Shape::Polygon(_) => "Polygon",
            Shape::MultiPoint(_) => "MultiPoint",
            Shape::MultiPolyline(_) => "MultiLineString",
            Shape::MultiPolygon(_) => "MultiPolygon",
        }
    }

    /// Planar area in m². Zero for points and polylines.
    pub fn area(&self) -> f64 {
        match &self.shape {
            Shape::Polygon(p) => p.area(),
            Shape::MultiPolygon(ps) => ps.iter().map(Polygon::area).sum(),
            _ => 0.0,
        }
    }

    pub fn bbox(&self) -> Rect {
        let mut coords = self.coords();
        let first = coords.next().expect("validated geometries are non-empty");
        let mut rect = Rect::new(first, first);
        for c in coords {
            rect.expand(c);
        }
        rect
    }

    /// Minimal Euclidean distance between the two point sets; zero when they intersect.
    pub fn distance(&self, other: &Geometry) -> Result<f64, GeometryError> {
        if self.crs != other.crs {
            return Err(GeometryError::CrsMismatch {
                left: self.crs.to_string(),
                right: other.crs.to_string(),
            });
        }
        Ok(shape_distance(&self.shape, &other.shape))
    }

    /// Polygon enclosing every point within `radius` of this geometry.
    ///
    /// Circular arcs use [`CIRCLE_SEGMENTS`] segments per full turn. A zero
    /// radius returns polygons unchanged and an empty multipolygon otherwise.
    pub fn buffer(&self, radius: f64) -> Result<Geometry, GeometryError> {
        if radius.is_nan() || radius < 0.0 {
            return Err(GeometryError::NegativeRadius(radius));
        }
        let shape = if radius == 0.0 {
            match &self.shape {
                Shape::Polygon(_) | Shape::MultiPolygon(_) => self.shape.clone(),
                _ => Shape::MultiPolygon(Vec::new()),
            }
        } else if let Shape::Point(c) = self.shape {
            Shape::Polygon(circle(c, radius))
        } else {
            let style = BufferStyle::new(radius)
                .line_join(LineJoin::Round(circle_step()))
                .line_cap(LineCap::Round(circle_step()));
            let buffered = to_geo(&self.shape).buffer_with_style(style);
            from_geo_multipolygon(buffered)
        };
        Ok(Geometry {
            shape,
            crs: self.crs.clone(),
        })
    }

    /// A single point standing for the geometry: the point itself, the
    /// mid-length point of a polyline, or the centroid of a polygon's outer
    /// ring. Multi-geometries use their first member.
    pub fn representative_point(&self) -> Coord {
        match &self.shape {
            Shape::Point(c) => *c,
            Shape::Polyline(l) => point_along(l, 0.5 * polyline_length(l)),
            Shape::Polygon(p) => p.centroid(),
            Shape::MultiPoint(ps) => ps[0],
            Shape::MultiPolyline(ls) => point_along(&ls[0], 0.5 * polyline_length(&ls[0])),
            Shape::MultiPolygon(ps) => ps[0].centroid(),
        }
    }

    /// Applies `f` to every vertex and revalidates the result.
    pub fn try_map_coords<E>(
        &self,
        mut f: impl FnMut(Coord) -> Result<Coord, E>,
        crs: CrsId,
    ) -> Result<Result<Geometry, GeometryError>, E> {
        let mut line = |l: &[Coord]| l.iter().map(|c| f(*c)).collect::<Result<Vec<_>, E>>();
        let mut poly = |p: &Polygon| -> Result<Result<Polygon, GeometryError>, E> {
            let exterior = line(&p.exterior)?;
            let interiors = p.interiors.iter().map(|r| line(r)).collect::<Result<Vec<_>, E>>()?;
            Ok(Polygon::new(exterior, interiors))
        };
        let shape = match &self.shape {
            Shape::Point(c) => Ok(Shape::Point(line(std::slice::from_ref(c))?[0])),
            Shape::Polyline(l) => Ok(Shape::Polyline(line(l)?)),
            Shape::MultiPoint(l) => Ok(Shape::MultiPoint(line(l)?)),
            Shape::MultiPolyline(ls) => Ok(Shape::MultiPolyline(ls.iter().map(|l| line(l)).collect::<Result<_, E>>()?)),
            Shape::Polygon(p) => poly(p)?.map(Shape::Polygon),
            Shape::MultiPolygon(ps) => {
                let mut out = Vec::with_capacity(ps.len());
                for p in ps {
                    out.push(poly(p)?);
                }
                out.into_iter().collect::<Result<Vec<_>, _>>().map(Shape::MultiPolygon)
            }
        };
        Ok(shape.and_then(|s| Geometry::new(s, crs)))
    }

    fn coords(&self) -> Box<dyn Iterator<Item = Coord> + '_> {
        match &self.shape {
            Shape::Point(c) => Box::new(std::iter::once(*c)),
            Shape::Polyline(l) | Shape::MultiPoint(l) => Box::new(l.iter().copied()),
            Shape::Polygon(p) => Box::new(p.exterior.iter().copied()),
            Shape::MultiPolyline(ls) => Box::new(ls.iter().flatten().copied()),
            Shape::MultiPolygon(ps) => Box::new(ps.iter().flat_map(|p| p.exterior.iter().copied())),
        }
    }
}

fn validate_shape(shape: &Shape) -> Result<(), GeometryError> {
    let line_ok = |l: &[Coord]| {
        if l.iter().any(|c| !c.is_finite()) {
            Err(GeometryError::NonFinite)
        } else if l.len() < 2 {
            Err(GeometryError::ShortLine)
        } else {
            Ok(())
        }
    };
    match shape {
        Shape::Point(c) => {
            if !c.is_finite() {
                return Err(GeometryError::NonFinite);
            }
        }
        Shape::Polyline(l) => line_ok(l)?,
        Shape::Polygon(_) => {}
        Shape::MultiPoint(ps) => {
            if ps.is_empty() {
                return Err(GeometryError::Empty);
            }
            if ps.iter().any(|c| !c.is_finite()) {
                return Err(GeometryError::NonFinite);
            }
        }
        Shape::MultiPolyline(ls) => {
            if ls.is_empty() {
                return Err(GeometryError::Empty);
            }
            for l in ls {
                line_ok(l)?;
            }
        }
        // buffering a bare point with radius 0 legitimately yields no polygon
        Shape::MultiPolygon(_) => {}
    }
    Ok(())
}

fn circle_step() -> f64 {
    2.0 * std::f64::consts::PI / CIRCLE_SEGMENTS as f64
}

fn circle(center: Coord, radius: f64) -> Polygon {
    let step = circle_step();
    let mut ring: Vec<Coord> = (0..CIRCLE_SEGMENTS)
        .map(|k| {
            let t = step * k as f64;
            Coord::new(center.x + radius * t.cos(), center.y + radius * t.sin())
        })
        .collect();
    ring.push(ring[0]);
    Polygon {
        exterior: ring,
        interiors: Vec::new(),
    }
}

pub(crate) fn polyline_length(line: &[Coord]) -> f64 {
    line.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Point at curvilinear abscissa `s` along `line`, clamped to its ends.
pub(crate) fn point_along(line: &[Coord], s: f64) -> Coord {
    let mut remaining = s.max(0.0);
    for w in line.windows(2) {
        let len = w[0].distance(w[1]);
        if remaining <= len && len > 0.0 {
            let t = remaining / len;
            return Coord::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
        }
        remaining -= len;
    }
    *line.last().expect("polyline has coordinates")
}

// ---- planar primitives ----

fn orient(a: Coord, b: Coord, c: Coord) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Coord, b: Coord, p: Coord) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed segment intersection test, including collinear overlap and touching.
pub fn segments_intersect(p1: Coord, p2: Coord, q1: Coord, q2: Coord) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

pub fn point_segment_distance(p: Coord, a: Coord, b: Coord) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Coord::new(a.x + t * dx, a.y + t * dy))
}

pub fn segment_distance(p1: Coord, p2: Coord, q1: Coord, q2: Coord) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

/// Flattened view of a shape: isolated points, segments, and polygons for
/// containment tests.
struct Parts<'a> {
    points: Vec<Coord>,
    segments: Vec<(Coord, Coord)>,
    polygons: Vec<&'a Polygon>,
}

fn parts(shape: &Shape) -> Parts<'_> {
    let mut out = Parts {
        points: Vec::new(),
        segments: Vec::new(),
        polygons: Vec::new(),
    };
    let add_line = |out: &mut Parts, l: &[Coord]| {
        out.segments.extend(l.windows(2).map(|w| (w[0], w[1])));
    };
    match shape {
        Shape::Point(c) => out.points.push(*c),
        Shape::MultiPoint(ps) => out.points.extend(ps.iter().copied()),
        Shape::Polyline(l) => add_line(&mut out, l),
        Shape::MultiPolyline(ls) => ls.iter().for_each(|l| add_line(&mut out, l)),
        Shape::Polygon(p) => {
            p.rings().for_each(|r| add_line(&mut out, r));
            out.polygons.push(p);
        }
        Shape::MultiPolygon(ps) => {
            for p in ps {
                p.rings().for_each(|r| add_line(&mut out, r));
                out.polygons.push(p);
            }
        }
    }
    out
}

fn shape_distance(a: &Shape, b: &Shape) -> f64 {
    if let (Shape::Point(p), Shape::Point(q)) = (a, b) {
        return p.distance(*q);
    }
    let pa = parts(a);
    let pb = parts(b);

    // containment of any vertex in the other side's polygons
    let vertices = |p: &Parts| -> Vec<Coord> {
        let mut v = p.points.clone();
        v.extend(p.segments.iter().map(|s| s.0));
        v
    };
    for (from, into) in [(&pa, &pb), (&pb, &pa)] {
        if !into.polygons.is_empty() && vertices(from).iter().any(|c| into.polygons.iter().any(|poly| poly.contains(*c))) {
            return 0.0;
        }
    }

    let mut best = f64::INFINITY;
    for p in &pa.points {
        for q in &pb.points {
            best = best.min(p.distance(*q));
        }
        for s in &pb.segments {
            best = best.min(point_segment_distance(*p, s.0, s.1));
        }
    }
    for s in &pa.segments {
        for q in &pb.points {
            best = best.min(point_segment_distance(*q, s.0, s.1));
        }
        for t in &pb.segments {
            best = best.min(segment_distance(s.0, s.1, t.0, t.1));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

// ---- conversion to and from `geo` for buffering ----

fn to_geo_line(l: &[Coord]) -> geo::LineString<f64> {
    geo::LineString::from(l.iter().map(|c| (c.x, c.y)).collect::<Vec<_>>())
}

fn to_geo_polygon(p: &Polygon) -> geo::Polygon<f64> {
    geo::Polygon::new(
        to_geo_line(&p.exterior),
        p.interiors.iter().map(|r| to_geo_line(r)).collect(),
    )
}

fn to_geo(shape: &Shape) -> geo::Geometry<f64> {
    match shape {
        Shape::Point(c) => geo::Geometry::Point(geo::Point::new(c.x, c.y)),
        Shape::Polyline(l) => geo::Geometry::LineString(to_geo_line(l)),
        Shape::Polygon(p) => geo::Geometry::Polygon(to_geo_polygon(p)),
        Shape::MultiPoint(ps) => geo::Geometry::MultiPoint(geo::MultiPoint::new(
            ps.iter().map(|c| geo::Point::new(c.x, c.y)).collect(),
        )),
        Shape::MultiPolyline(ls) => geo::Geometry::MultiLineString(geo::MultiLineString::new(
            ls.iter().map(|l| to_geo_line(l)).collect(),
        )),
        Shape::MultiPolygon(ps) => geo::Geometry::MultiPolygon(geo::MultiPolygon::new(
            ps.iter().map(to_geo_polygon).collect(),
        )),
    }
}

fn from_geo_ring(r: &geo::LineString<f64>) -> Vec<Coord> {
    r.coords().map(|c| Coord::new(c.x, c.y)).collect()
}

fn from_geo_multipolygon(mp: geo::MultiPolygon<f64>) -> Shape {
    let polys: Vec<Polygon> = mp
        .0
        .iter()
        .map(|p| Polygon {
            exterior: from_geo_ring(p.exterior()),
            interiors: p.interiors().iter().map(from_geo_ring).collect(),
        })
        .collect();
    if polys.len() == 1 {
        Shape::Polygon(polys.into_iter().next().unwrap())
    } else {
        Shape::MultiPolygon(polys)
    }
}

// ---- JSON representation ----

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", content = "coordinates")]
enum ShapeRepr {
    Point(Coord),
    LineString(Vec<Coord>),
    Polygon(Vec<Vec<Coord>>),
    MultiPoint(Vec<Coord>),
    MultiLineString(Vec<Vec<Coord>>),
    MultiPolygon(Vec<Vec<Vec<Coord>>>),
}

#[derive(Serialize, Deserialize)]
struct GeometryRepr {
    #[serde(flatten)]
    shape: ShapeRepr,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    crs: Option<String>,
}

fn polygon_from_rings(mut rings: Vec<Vec<Coord>>) -> Result<Polygon, GeometryError> {
    if rings.is_empty() {
        return Err(GeometryError::Empty);
    }
    let exterior = rings.remove(0);
    Polygon::new(exterior, rings)
}

fn polygon_to_rings(p: Polygon) -> Vec<Vec<Coord>> {
    let mut rings = vec![p.exterior];
    rings.extend(p.interiors);
    rings
}

impl TryFrom<GeometryRepr> for Geometry {
    type Error = GeometryError;

    fn try_from(repr: GeometryRepr) -> Result<Self, Self::Error> {
        let shape = match repr.shape {
            ShapeRepr::Point(c) => Shape::Point(c),
            ShapeRepr::LineString(l) => Shape::Polyline(l),
            ShapeRepr::Polygon(rings) => Shape::Polygon(polygon_from_rings(rings)?),
            ShapeRepr::MultiPoint(ps) => Shape::MultiPoint(ps),
            ShapeRepr::MultiLineString(ls) => Shape::MultiPolyline(ls),
            ShapeRepr::MultiPolygon(ps) => Shape::MultiPolygon(
                ps.into_iter().map(polygon_from_rings).collect::<Result<_, _>>()?,
            ),
        };
        let crs = repr.crs.as_deref().map(CrsId::new).unwrap_or_default();
        Geometry::new(shape, crs)
    }
}

impl From<Geometry> for GeometryRepr {
    fn from(g: Geometry) -> Self {
        let shape = match g.shape {
            Shape::Point(c) => ShapeRepr::Point(c),
            Shape::Polyline(l) => ShapeRepr::LineString(l),
            Shape::Polygon(p) => ShapeRepr::Polygon(polygon_to_rings(p)),
            Shape::MultiPoint(ps) => ShapeRepr::MultiPoint(ps),
            Shape::MultiPolyline(ls) => ShapeRepr::MultiLineString(ls),
            Shape::MultiPolygon(ps) => {
                ShapeRepr::MultiPolygon(ps.into_iter().map(polygon_to_rings).collect())
            }
        };
        GeometryRepr {
            shape,
            crs: Some(g.crs.to_string()),
        }
    }
}
