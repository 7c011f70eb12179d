//! Axis-aligned domains in R^N, N ∈ {1,2,3}, with exact measures for balls,
//! annuli and boundary strips.
//!
//! Everything here is immutable after construction and cheap to clone, so
//! values can be shared freely across threads.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Volume of the unit ball in R^n (ω_N): 2, π, 4π/3.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => panic!("unsupported dimension {n}"),
    }
}

/// Surface area of the unit sphere in R^n (= N ω_N).
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

/// An open axis-aligned box (interval, rectangle or cuboid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    dim: usize,
    bounds: Vec<[f64; 2]>,
}

impl Domain {
    pub fn new(bounds: &[[f64; 2]]) -> Result<Self> {
        let dim = bounds.len();
        if !(1..=3).contains(&dim) {
            return Err(CoreError::Geometry(format!(
                "dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        for (k, b) in bounds.iter().enumerate() {
            if !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1]) {
                return Err(CoreError::Geometry(format!(
                    "axis {k} bounds [{}, {}] must satisfy lo < hi",
                    b[0], b[1]
                )));
            }
        }
        Ok(Domain {
            dim,
            bounds: bounds.to_vec(),
        })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Self::new(&[[lo, hi]])
    }

    pub fn unit_interval() -> Self {
        Self::interval(0.0, 1.0).unwrap()
    }

    pub fn unit_square() -> Self {
        Self::new(&[[0.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    pub fn unit_cube() -> Self {
        Self::new(&[[0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn edge(&self, axis: usize) -> f64 {
        self.bounds[axis][1] - self.bounds[axis][0]
    }

    pub fn min_edge(&self) -> f64 {
        (0..self.dim)
            .map(|k| self.edge(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// |Ω|, the product of the edge lengths.
    pub fn volume(&self) -> f64 {
        (0..self.dim).map(|k| self.edge(k)).product()
    }

    /// |∂Ω|: 2 endpoints in 1D, perimeter in 2D, surface area in 3D.
    pub fn boundary_measure(&self) -> f64 {
        match self.dim {
            1 => 2.0,
            2 => 2.0 * (self.edge(0) + self.edge(1)),
            3 => {
                let (a, b, c) = (self.edge(0), self.edge(1), self.edge(2));
                2.0 * (a * b + b * c + a * c)
            }
            _ => unreachable!(),
        }
    }

    /// Exact measure of the strip {x ∈ Ω : dist(x, ∂Ω) < ε}.
    ///
    /// The complement is the box shrunk by ε on every side, so the strip
    /// measure is |Ω| − Π(L_k − 2ε).
    pub fn strip_volume(&self, eps: f64) -> Result<f64> {
        BoundaryStrip::new(eps, self)?;
        let inner: f64 = (0..self.dim).map(|k| self.edge(k) - 2.0 * eps).product();
        Ok(self.volume() - inner)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && (0..self.dim).all(|k| x[k] > self.bounds[k][0] && x[k] < self.bounds[k][1])
    }

    /// Euclidean distance from an interior point to ∂Ω; per-axis closed form.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        (0..self.dim)
            .map(|k| (x[k] - self.bounds[k][0]).min(self.bounds[k][1] - x[k]))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when B(center, radius) is compactly contained in Ω.
    pub fn contains_ball(&self, ball: &Ball) -> bool {
        ball.center.len() == self.dim && self.boundary_distance(&ball.center) > ball.radius
    }

    /// Center point of the box.
    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect()
    }

    /// The box scaled by t about the origin of its lower corner.
    pub fn scaled(&self, t: f64) -> Self {
        let bounds: Vec<[f64; 2]> = self
            .bounds
            .iter()
            .map(|b| [b[0] * t, b[0] * t + (b[1] - b[0]) * t])
            .collect();
        Domain {
            dim: self.dim,
            bounds,
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Open Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(CoreError::Geometry(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) < self.radius
    }

    pub fn volume(&self, dim: usize) -> f64 {
        unit_ball_volume(dim) * self.radius.powi(dim as i32)
    }
}

/// Open annulus A(a, r, R) = {r < |x − a| < R}; r = 0 degenerates to a
/// punctured ball, which has the same measure as B(a, R).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: Vec<f64>,
    pub inner: f64,
    pub outer: f64,
}

impl Annulus {
    pub fn new(center: Vec<f64>, inner: f64, outer: f64) -> Result<Self> {
        if !(inner >= 0.0 && inner < outer && outer.is_finite()) {
            return Err(CoreError::Geometry(format!(
                "annulus radii must satisfy 0 <= r < R < inf, got r={inner}, R={outer}"
            )));
        }
        Ok(Annulus {
            center,
            inner,
            outer,
        })
    }

    /// 2A(a, r, R) = A(a, r/2, 2R).
    pub fn doubled(&self) -> Annulus {
        Annulus {
            center: self.center.clone(),
            inner: self.inner / 2.0,
            outer: self.outer * 2.0,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let d = dist(&self.center, x);
        d > self.inner && d < self.outer
    }

    pub fn volume(&self, dim: usize) -> f64 {
        unit_ball_volume(dim) * (self.outer.powi(dim as i32) - self.inner.powi(dim as i32))
    }
}

/// ε-tubular neighborhood of ∂Ω restricted to Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStrip {
    pub width: f64,
}

impl BoundaryStrip {
    pub fn new(width: f64, domain: &Domain) -> Result<Self> {
        if !(width > 0.0 && width < domain.min_edge() / 2.0) {
            return Err(CoreError::Geometry(format!(
                "strip width {width} must lie in (0, {})",
                domain.min_edge() / 2.0
            )));
        }
        Ok(BoundaryStrip { width })
    }

    pub fn contains(&self, x: &[f64], domain: &Domain) -> bool {
        domain.contains(x) && domain.boundary_distance(x) < self.width
    }
}

/// A region of Ω used for indicator membership tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Region {
    Ball(Ball),
    Annulus(Annulus),
    Strip(BoundaryStrip),
}

impl Region {
    /// Exact set membership. Balls and annuli are open; the strip is relative
    /// to the given domain.
    pub fn contains(&self, x: &[f64], domain: &Domain) -> bool {
        match self {
            Region::Ball(b) => b.contains(x),
            Region::Annulus(a) => a.contains(x),
            Region::Strip(s) => s.contains(x, domain),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn volumes_of_basic_boxes() {
        assert_eq!(Domain::unit_interval().volume(), 1.0);
        let rect = Domain::new(&[[0.0, 2.0], [0.0, 3.0]]).unwrap();
        assert_eq!(rect.volume(), 6.0);
        assert_eq!(Domain::unit_cube().volume(), 1.0);
    }

    #[test]
    fn boundary_measures() {
        assert_eq!(Domain::unit_interval().boundary_measure(), 2.0);
        assert_eq!(Domain::unit_square().boundary_measure(), 4.0);
        assert_eq!(Domain::unit_cube().boundary_measure(), 6.0);
    }

    #[test]
    fn strip_volume_examples() {
        let sq = Domain::unit_square();
        assert_relative_eq!(sq.strip_volume(0.1).unwrap(), 1.0 - 0.8 * 0.8, epsilon = 1e-15);
        let v = sq.strip_volume(0.01).unwrap();
        assert_relative_eq!(v, 0.0396, epsilon = 1e-15);
        assert!((v - 0.01 * sq.boundary_measure()).abs() <= 4.0 * 0.01 * 0.01 + 1e-15);
        let iv = Domain::unit_interval();
        assert_relative_eq!(iv.strip_volume(0.1).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn strip_volume_rejects_too_wide() {
        let sq = Domain::unit_square();
        assert!(sq.strip_volume(0.5).is_err());
        assert!(sq.strip_volume(-0.1).is_err());
    }

    #[test]
    fn strip_ratio_converges_to_boundary_measure() {
        // strip_volume(Ω,ε)/ε → |∂Ω| with ratio error < 10 ε.
        for dom in [
            Domain::unit_interval(),
            Domain::unit_square(),
            Domain::unit_cube(),
            Domain::new(&[[0.0, 2.0], [-1.0, 1.5]]).unwrap(),
        ] {
            for eps in [1e-2, 1e-3, 1e-4] {
                let ratio = dom.strip_volume(eps).unwrap() / eps / dom.boundary_measure();
                assert!(
                    (ratio - 1.0).abs() < 10.0 * eps,
                    "dim {} eps {eps}: ratio {ratio}",
                    dom.dim()
                );
            }
        }
    }

    #[test]
    fn membership_examples() {
        let sq = Domain::unit_square();
        let ball = Ball::new(vec![0.5, 0.5], 0.2).unwrap();
        assert!(Region::Ball(ball.clone()).contains(&[0.5, 0.5], &sq));

        // open annulus: the inner circle itself is excluded
        let ann = Annulus::new(vec![0.5, 0.5], 0.1, 0.3).unwrap();
        assert!(!Region::Annulus(ann.clone()).contains(&[0.6, 0.5], &sq));
        assert!(Region::Annulus(ann).contains(&[0.7, 0.5], &sq));

        let strip = BoundaryStrip::new(0.1, &sq).unwrap();
        assert!(Region::Strip(strip).contains(&[0.05, 0.05], &sq));
    }

    #[test]
    fn doubled_annulus_measure() {
        let ann = Annulus::new(vec![0.0, 0.0], 0.1, 0.2).unwrap();
        let d = ann.doubled();
        assert_eq!(d.inner, 0.05);
        assert_eq!(d.outer, 0.4);
        let expect = unit_ball_volume(2) * (0.4f64.powi(2) - 0.05f64.powi(2));
        assert_relative_eq!(d.volume(2), expect, epsilon = 1e-15);
    }

    #[test]
    fn membership_consistent_with_measure_monte_carlo() {
        // Fraction of uniform samples inside the ball matches its volume
        // fraction within 3σ of the binomial error.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let dom = Domain::unit_square();
        let ball = Ball::new(vec![0.4, 0.6], 0.25).unwrap();
        let n = 200_000usize;
        let mut hits = 0usize;
        for _ in 0..n {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            if ball.contains(&x) {
                hits += 1;
            }
        }
        let p = ball.volume(2) / dom.volume();
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let frac = hits as f64 / n as f64;
        assert!(
            (frac - p).abs() < 3.0 * sigma,
            "frac {frac} vs p {p} (sigma {sigma})"
        );
    }
}
