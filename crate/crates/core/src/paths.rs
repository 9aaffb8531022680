//! Planar reference paths: generation, curvature, nearest-point queries and
//! the limited-horizon segment observed by the controllers.
//!
//! Paths are polylines sampled at (nominally) 1 m arc-length spacing, so
//! index arithmetic doubles as arc-length arithmetic.

use std::fmt;
use std::io::{Read, Write};
use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points in a horizon segment.
pub const HORIZON_POINTS: usize = 25;
/// Arc-length gap between consecutive horizon points (m).
pub const HORIZON_SPACING: f64 = 1.0;
/// Minimum turning radius assumed for generated paths (m).
pub const DEFAULT_R_MIN: f64 = 15.0;

/// Relative tolerance on consecutive point gaps.
const SPACING_TOLERANCE: f64 = 0.1;
/// Window of [`Path::nearest_point_local`], in points.
const LOCAL_SEARCH_BACK: usize = 5;
const LOCAL_SEARCH_AHEAD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    /// Rotates counter-clockwise by `angle` radians.
    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Expresses `self` in the frame of a body at `origin` with the given heading.
    pub fn to_frame(self, origin: Point, heading: f64) -> Point {
        (self - origin).rotate(-heading)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Signed Menger curvature of three points; positive for a left turn.
///
/// Degenerate triples (coincident points) have zero curvature.
pub fn menger_curvature(a: Point, b: Point, c: Point) -> f64 {
    let ab = b - a;
    let bc = c - b;
    let ac = c - a;
    let denom = ab.norm() * bc.norm() * ac.norm();
    if denom <= f64::EPSILON {
        return 0.0;
    }
    2.0 * ab.cross(bc) / denom
}

/// An ordered planar polyline with cached arc length and curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    points: Vec<Point>,
    spacing: f64,
    cum_arc: Vec<f64>,
    curvature: Vec<f64>,
}

impl Path {
    /// Builds a path from raw points, checking that the gaps are near-uniform.
    pub fn from_points(points: Vec<Point>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidPath(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        let mut cum_arc = Vec::with_capacity(points.len());
        cum_arc.push(0.0);
        for w in points.windows(2) {
            let gap = w[0].distance(w[1]);
            cum_arc.push(cum_arc.last().unwrap() + gap);
        }
        let total = *cum_arc.last().unwrap();
        let spacing = total / (points.len() - 1) as f64;
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidPath("path has zero length".into()));
        }
        for (i, w) in cum_arc.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if (gap - spacing).abs() > SPACING_TOLERANCE * spacing {
                return Err(Error::InvalidPath(format!(
                    "gap {gap:.4} m between points {i} and {} deviates more than 10% from spacing {spacing:.4} m",
                    i + 1
                )));
            }
        }
        let curvature = Self::curvatures(&points);
        Ok(Self {
            points,
            spacing,
            cum_arc,
            curvature,
        })
    }

    /// Resamples an arbitrary polyline at a fixed arc-length spacing before
    /// building the path.
    pub fn resampled(points: &[Point], spacing: f64) -> Result<Self> {
        if points.len() < 2 || !(spacing > 0.0) {
            return Err(Error::InvalidPath("cannot resample fewer than 2 points".into()));
        }
        let mut out = vec![points[0]];
        let mut carried = 0.0; // arc length since the last emitted point
        for w in points.windows(2) {
            let seg = w[1] - w[0];
            let len = seg.norm();
            if len <= f64::EPSILON {
                continue;
            }
            let mut t = spacing - carried;
            while t <= len {
                out.push(w[0] + seg * (t / len));
                t += spacing;
            }
            carried = len - (t - spacing);
        }
        // keep the tail if it is long enough to be a regular gap
        if carried > (1.0 - SPACING_TOLERANCE) * spacing {
            out.push(*points.last().unwrap());
        }
        Self::from_points(out)
    }

    fn curvatures(points: &[Point]) -> Vec<f64> {
        let n = points.len();
        let mut k = vec![0.0; n];
        for i in 1..n - 1 {
            k[i] = menger_curvature(points[i - 1], points[i], points[i + 1]);
        }
        k[0] = k[1];
        k[n - 1] = k[n - 2];
        k
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Mean arc-length gap between consecutive points (m).
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cum_arc(&self) -> &[f64] {
        &self.cum_arc
    }

    /// Total length D (m).
    pub fn length(&self) -> f64 {
        *self.cum_arc.last().unwrap()
    }

    pub fn curvature(&self) -> &[f64] {
        &self.curvature
    }

    pub fn max_abs_curvature(&self) -> f64 {
        self.curvature.iter().fold(0.0, |m, k| m.max(k.abs()))
    }

    /// Signed curvature at point `i`; endpoints copy their neighbor.
    pub fn curvature_at(&self, i: usize) -> f64 {
        self.curvature[i]
    }

    /// Heading of the final segment.
    pub fn end_heading(&self) -> f64 {
        let n = self.points.len();
        let d = self.points[n - 1] - self.points[n - 2];
        d.y.atan2(d.x)
    }

    /// Heading of the first segment.
    pub fn start_heading(&self) -> f64 {
        let d = self.points[1] - self.points[0];
        d.y.atan2(d.x)
    }

    /// Point `i`, extended past the end along the final heading.
    pub fn point_extended(&self, i: usize) -> Point {
        let n = self.points.len();
        if i < n {
            return self.points[i];
        }
        let last = self.points[n - 1];
        let dir = last - self.points[n - 2];
        let dir = dir * (1.0 / dir.norm());
        last + dir * ((i - (n - 1)) as f64 * self.spacing)
    }

    /// Point at arc length `s`, linearly interpolated; extrapolated straight
    /// past either end.
    pub fn point_at_arc(&self, s: f64) -> Point {
        let n = self.points.len();
        let idx = match self.cum_arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => return self.points[i],
            Err(i) => i,
        };
        let (i0, i1) = if idx == 0 {
            (0, 1)
        } else if idx >= n {
            (n - 2, n - 1)
        } else {
            (idx - 1, idx)
        };
        let (a, b) = (self.points[i0], self.points[i1]);
        let t = (s - self.cum_arc[i0]) / (self.cum_arc[i1] - self.cum_arc[i0]);
        a + (b - a) * t
    }

    /// Index of the closest path point and the deviation from the path.
    ///
    /// The deviation is measured to the closest point on any segment, so it
    /// resolves below the point spacing. Equidistant points resolve toward
    /// the larger index.
    pub fn nearest_point(&self, q: Point) -> (usize, f64) {
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = *p - q;
            let d2 = d.dot(d);
            if d2 <= best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        let mut dev2 = best_d2;
        for w in self.points.windows(2) {
            dev2 = dev2.min(segment_distance_sq(q, w[0], w[1]));
        }
        (best, dev2.sqrt())
    }

    /// Nearest point searched only in a window around `hint`, for followers
    /// that track their progress along the path. Past the last point the
    /// deviation is measured to the final segment extended as a ray.
    pub fn nearest_point_local(&self, q: Point, hint: usize) -> (usize, f64) {
        let n = self.points.len();
        let lo = hint.saturating_sub(LOCAL_SEARCH_BACK).min(n - 1);
        let hi = (hint + LOCAL_SEARCH_AHEAD).min(n - 1);
        let mut best = lo;
        let mut best_d2 = f64::INFINITY;
        for i in lo..=hi {
            let d = self.points[i] - q;
            let d2 = d.dot(d);
            if d2 <= best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        let mut dev2 = best_d2;
        for i in lo.saturating_sub(1)..hi.min(n - 2) + 1 {
            dev2 = dev2.min(segment_distance_sq(q, self.points[i], self.points[i + 1]));
        }
        if hi == n - 1 {
            dev2 = dev2.min(ray_distance_sq(q, self.points[n - 2], self.points[n - 1]));
        }
        (best, dev2.sqrt())
    }

    /// The 25-point horizon starting at the point nearest `q`, expressed in
    /// the frame of a vehicle at `q` heading `heading`.
    pub fn extract_horizon(&self, q: Point, heading: f64) -> PathHorizon {
        let (anchor, _) = self.nearest_point(q);
        self.horizon_from(anchor, q, heading)
    }

    /// Horizon anchored at a known index.
    pub fn horizon_from(&self, anchor: usize, q: Point, heading: f64) -> PathHorizon {
        let downsample = self.downsample();
        let points = (0..HORIZON_POINTS)
            .map(|j| self.point_extended(anchor + j * downsample).to_frame(q, heading))
            .collect();
        PathHorizon {
            points_vehicle_frame: points,
            anchor_index: anchor,
            downsample,
        }
    }

    /// Index stride that gives 1 m between horizon points.
    pub fn downsample(&self) -> usize {
        ((HORIZON_SPACING / self.spacing).round() as usize).max(1)
    }

    /// Writes `x,y` CSV with 6 decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_points_csv(&self.points, writer)
    }

    /// Reads `x,y` CSV. Point sets whose spacing is not within 10% of 1 m
    /// are resampled at 1 m.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(Error::InvalidPath("expected header `x,y`".into()));
        }
        let mut points = Vec::new();
        for record in rdr.deserialize() {
            let (x, y): (f64, f64) = record?;
            points.push(Point::new(x, y));
        }
        match Self::from_points(points.clone()) {
            Ok(path) if (path.spacing - HORIZON_SPACING).abs() <= SPACING_TOLERANCE * HORIZON_SPACING => {
                Ok(path)
            }
            _ => Self::resampled(&points, HORIZON_SPACING),
        }
    }
}

pub(crate) fn write_points_csv<W: Write>(points: &[Point], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "y"])?;
    for p in points {
        w.write_record([format!("{:.6}", p.x), format!("{:.6}", p.y)])?;
    }
    w.flush()?;
    Ok(())
}

fn segment_distance_sq(q: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((q - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = q - (a + ab * t);
    d.dot(d)
}

/// Distance to the ray starting at `a` through `b`, beyond `b` only.
fn ray_distance_sq(q: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 0.0 {
        let d = q - b;
        return d.dot(d);
    }
    let t = ((q - a).dot(ab) / len2).max(1.0);
    let d = q - (a + ab * t);
    d.dot(d)
}

/// Down-sampled path segment ahead of the vehicle, in vehicle coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PathHorizon {
    pub points_vehicle_frame: Vec<Point>,
    pub anchor_index: usize,
    pub downsample: usize,
}

impl PathHorizon {
    /// The horizon as a standalone path (vehicle frame).
    pub fn to_path(&self) -> Path {
        Path::from_points(self.points_vehicle_frame.clone())
            .expect("horizon points are evenly spaced")
    }
}

/// Parameters of the random path generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathGenParams {
    pub target_length: f64,
    pub segment_length_range: [f64; 2],
    pub curvature_bound: f64,
    pub seed: u64,
}

impl Default for PathGenParams {
    fn default() -> Self {
        Self {
            target_length: 650.0,
            segment_length_range: [10.0, 40.0],
            curvature_bound: 1.0 / DEFAULT_R_MIN,
            seed: 0,
        }
    }
}

impl PathGenParams {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self, r_min: f64) -> Result<()> {
        let [lo, hi] = self.segment_length_range;
        if !(self.target_length > 0.0) {
            return Err(Error::InvalidConfig("target_length must be positive".into()));
        }
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidConfig(format!(
                "segment_length_range [{lo}, {hi}] is not a positive interval"
            )));
        }
        if !(self.curvature_bound >= 0.0) || self.curvature_bound > 1.0 / r_min + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "curvature_bound {} exceeds 1/r_min = {}",
                self.curvature_bound,
                1.0 / r_min
            )));
        }
        Ok(())
    }
}

/// Joins constant-curvature arcs tangent-continuously until the target length
/// is reached. Points are placed exactly on the arcs at 1 m arc-length steps.
pub fn generate_random_path(params: &PathGenParams) -> Path {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let [lo, hi] = params.segment_length_range;
    let kb = params.curvature_bound;
    let ds = HORIZON_SPACING;
    let mut points = Vec::with_capacity((params.target_length / ds).ceil() as usize + 2);
    let (mut x, mut y, mut heading) = (0.0_f64, 0.0_f64, 0.0_f64);
    points.push(Point::new(x, y));
    let mut length = 0.0;
    while length < params.target_length {
        let seg_len = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let kappa = if kb > 0.0 { rng.random_range(-kb..=kb) } else { 0.0 };
        let seg_steps = ((seg_len / ds).round() as usize).max(1);
        for _ in 0..seg_steps {
            let next_heading = heading + kappa * ds;
            if kappa.abs() < 1e-12 {
                x += ds * heading.cos();
                y += ds * heading.sin();
            } else {
                x += (next_heading.sin() - heading.sin()) / kappa;
                y += (heading.cos() - next_heading.cos()) / kappa;
            }
            heading = next_heading;
            let p = Point::new(x, y);
            length += p.distance(*points.last().unwrap());
            points.push(p);
        }
    }
    Path::from_points(points).expect("generated arcs are evenly spaced")
}

/// Samples a circle arc of radius `radius` (counter-clockwise when
/// `radius > 0`) starting at the origin heading +x, `n` points at `ds`.
pub fn circle_path(radius: f64, n: usize, ds: f64) -> Path {
    let kappa = 1.0 / radius;
    let points = (0..n)
        .map(|i| {
            let phi = kappa * ds * i as f64;
            Point::new(phi.sin() / kappa, (1.0 - phi.cos()) / kappa)
        })
        .collect();
    Path::from_points(points).expect("circle samples are evenly spaced")
}

/// Straight path along +x with `n` points at `ds`.
pub fn straight_path(n: usize, ds: f64) -> Path {
    let points = (0..n).map(|i| Point::new(i as f64 * ds, 0.0)).collect();
    Path::from_points(points).expect("straight samples are evenly spaced")
}
