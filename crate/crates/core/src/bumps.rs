//! Radial test functions used by the upper/lower bound constructions: the
//! C^{m−1} polynomial bump equal to 1 on an annulus and supported on its
//! double, the polynomial cap for small-eigenvalue families, and the
//! logarithmic profile used in the critical dimension N = 2m.

use nalgebra::{DMatrix, DVector};

use crate::basis::gauss_on_interval;
use crate::density::Weight;
use crate::error::{CoreError, Result};
use crate::geometry::{unit_sphere_area, Annulus, Ball, Domain};

/// Falling factorial i·(i−1)···(i−l+1) with fall(i, 0) = 1.
fn falling(i: usize, l: usize) -> f64 {
    let mut v = 1.0;
    for t in 0..l {
        if t >= i {
            return 0.0;
        }
        v *= (i - t) as f64;
    }
    v
}

/// Piecewise-polynomial bump profile: 0 on [0, r/2), a polynomial ramp on
/// [r/2, r), 1 on [r, R), a polynomial ramp down on [R, 2R), 0 beyond.
///
/// The normalized coefficients depend only on m; radii enter through the
/// t/r and t/R scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    pub m: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    /// a_0..a_{2m−1}; empty when inner_radius = 0 (pure ball cap).
    pub inner_coeffs: Vec<f64>,
    /// b_0..b_{2m−1}
    pub outer_coeffs: Vec<f64>,
}

fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>> {
    let lu = a.full_piv_lu();
    match lu.solve(&b) {
        Some(x) => Ok(x.iter().copied().collect()),
        None => Err(CoreError::Solver("profile system is singular".into())),
    }
}

/// Solve the 4m conditions for the bump coefficients. With r = 0 the inner
/// ramp degenerates and only the outer cap is built.
pub fn solve_profile(m: usize, r: f64, big_r: f64) -> Result<BumpProfile> {
    if !(m >= 1 && r >= 0.0 && r < big_r && big_r.is_finite()) {
        return Err(CoreError::Geometry(format!(
            "bump radii must satisfy 0 <= r < R, got r={r}, R={big_r}"
        )));
    }
    let n = 2 * m;
    let inner_coeffs = if r > 0.0 {
        // rows: value at r/2 (=0), value at r (=1), derivatives 1..m-1 at both
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);
        for i in 0..n {
            a[(0, i)] = 0.5f64.powi(i as i32);
            a[(1, i)] = 1.0;
        }
        rhs[1] = 1.0;
        for l in 1..m {
            for i in l..n {
                a[(2 * l, i)] = falling(i, l) * 2.0f64.powi(l as i32 - i as i32);
                a[(2 * l + 1, i)] = falling(i, l);
            }
        }
        solve_dense(a, rhs)?
    } else {
        Vec::new()
    };

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        a[(0, i)] = 1.0;
        a[(1, i)] = 2.0f64.powi(i as i32);
    }
    rhs[0] = 1.0;
    for l in 1..m {
        for i in l..n {
            a[(2 * l, i)] = falling(i, l);
            a[(2 * l + 1, i)] = falling(i, l) * 2.0f64.powi(i as i32 - l as i32);
        }
    }
    let outer_coeffs = solve_dense(a, rhs)?;

    Ok(BumpProfile {
        m,
        inner_radius: r,
        outer_radius: big_r,
        inner_coeffs,
        outer_coeffs,
    })
}

impl BumpProfile {
    pub fn support_radius(&self) -> f64 {
        2.0 * self.outer_radius
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    /// l-th radial derivative of the piecewise profile.
    pub fn derivative(&self, t: f64, l: usize) -> f64 {
        let r = self.inner_radius;
        let big_r = self.outer_radius;
        if t < 0.0 || t >= 2.0 * big_r {
            return 0.0;
        }
        if r > 0.0 && t < r / 2.0 {
            return 0.0;
        }
        if r > 0.0 && t < r {
            return poly_scaled_derivative(&self.inner_coeffs, r, t, l);
        }
        if t < big_r {
            return if l == 0 { 1.0 } else { 0.0 };
        }
        poly_scaled_derivative(&self.outer_coeffs, big_r, t, l)
    }

    /// One-sided limits of the l-th derivative at each ramp endpoint,
    /// evaluated from inside the polynomial pieces; used for the residual.
    fn condition_residuals(&self) -> Vec<f64> {
        let r = self.inner_radius;
        let big_r = self.outer_radius;
        let mut errs = Vec::new();
        if r > 0.0 {
            errs.push(poly_scaled_derivative(&self.inner_coeffs, r, r / 2.0, 0));
            errs.push(poly_scaled_derivative(&self.inner_coeffs, r, r, 0) - 1.0);
            for l in 1..self.m {
                errs.push(poly_scaled_derivative(&self.inner_coeffs, r, r / 2.0, l) * (r / 2.0).powi(l as i32));
                errs.push(poly_scaled_derivative(&self.inner_coeffs, r, r, l) * r.powi(l as i32));
            }
        }
        errs.push(poly_scaled_derivative(&self.outer_coeffs, big_r, big_r, 0) - 1.0);
        errs.push(poly_scaled_derivative(&self.outer_coeffs, big_r, 2.0 * big_r, 0));
        for l in 1..self.m {
            errs.push(poly_scaled_derivative(&self.outer_coeffs, big_r, big_r, l) * big_r.powi(l as i32));
            errs.push(
                poly_scaled_derivative(&self.outer_coeffs, big_r, 2.0 * big_r, l)
                    * (2.0 * big_r).powi(l as i32),
            );
        }
        errs
    }

    /// Largest violation over all 4m conditions (derivative conditions are
    /// scaled back to the dimensionless system).
    pub fn max_condition_residual(&self) -> f64 {
        self.condition_residuals()
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    fn pieces(&self) -> Vec<(f64, f64)> {
        let r = self.inner_radius;
        let big_r = self.outer_radius;
        let mut p = Vec::new();
        if r > 0.0 {
            p.push((r / 2.0, r));
        }
        p.push((if r > 0.0 { r } else { 0.0 }, big_r));
        p.push((big_r, 2.0 * big_r));
        p
    }
}

/// Evaluate the l-th derivative of Σ c_i (t/s)^i at t.
fn poly_scaled_derivative(coeffs: &[f64], s: f64, t: f64, l: usize) -> f64 {
    let mut v = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        if i >= l {
            v += c * falling(i, l) * t.powi(i as i32 - l as i32) / s.powi(i as i32);
        }
    }
    v
}

/// Degree 2m−1 cap: 1 on [0, ε/2], ramp down on [ε/2, ε], 0 beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct CapProfile {
    pub m: usize,
    pub eps: f64,
    pub coeffs: Vec<f64>,
}

/// Cap with U(ε/2) = 1, U(ε) = 0 and derivatives 1..m−1 vanishing at both.
pub fn cap_profile(m: usize, eps: f64) -> Result<CapProfile> {
    if !(m >= 1 && eps > 0.0) {
        return Err(CoreError::Geometry("cap needs m >= 1 and eps > 0".into()));
    }
    let n = 2 * m;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for i in 0..n {
        a[(0, i)] = 0.5f64.powi(i as i32);
        a[(1, i)] = 1.0;
    }
    rhs[0] = 1.0;
    for l in 1..m {
        for i in l..n {
            a[(2 * l, i)] = falling(i, l) * 2.0f64.powi(l as i32 - i as i32);
            a[(2 * l + 1, i)] = falling(i, l);
        }
    }
    let coeffs = solve_dense(a, rhs)?;
    Ok(CapProfile { m, eps, coeffs })
}

impl CapProfile {
    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    pub fn derivative(&self, t: f64, l: usize) -> f64 {
        if t < 0.0 || t > self.eps {
            return 0.0;
        }
        if t < self.eps / 2.0 {
            return if l == 0 { 1.0 } else { 0.0 };
        }
        poly_scaled_derivative(&self.coeffs, self.eps, t, l)
    }

    pub fn max_condition_residual(&self) -> f64 {
        let e = self.eps;
        let mut worst: f64 = (self.derivative(e / 2.0, 0) - 1.0).abs();
        worst = worst.max(poly_scaled_derivative(&self.coeffs, e, e, 0).abs());
        for l in 1..self.m {
            worst = worst
                .max((self.derivative(e / 2.0, l) * (e / 2.0).powi(l as i32)).abs())
                .max((poly_scaled_derivative(&self.coeffs, e, e, l) * e.powi(l as i32)).abs());
        }
        worst
    }

    fn pieces(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.eps / 2.0), (self.eps / 2.0, self.eps)]
    }
}

/// Logarithmic profile for N = 2m: U₁(t) = −log t + log ε₀ − Σ (ε₀−t)^k/(k ε₀^k)
/// on [ε, ε₀], matched C^{m−1} at ε by U₂(t) = α + Σ α_k t^{m+k}.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProfile {
    pub m: usize,
    pub eps: f64,
    pub eps0: f64,
    pub alpha: f64,
    pub alpha_k: Vec<f64>,
}

pub fn log_profile(m: usize, eps: f64, eps0: f64) -> Result<LogProfile> {
    if !(m >= 1 && eps > 0.0 && eps < eps0 && eps0 < 1.0) {
        return Err(CoreError::Geometry(format!(
            "log profile needs 0 < eps < eps0 < 1, got eps={eps}, eps0={eps0}"
        )));
    }
    // unknowns [α, α_0, …, α_{m−2}]; conditions U₂^{(l)}(ε) = U₁^{(l)}(ε)
    let n = m;
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for l in 0..m {
        if l == 0 {
            a[(0, 0)] = 1.0;
        }
        for k in 0..m.saturating_sub(1) {
            a[(l, k + 1)] = falling(m + k, l) * eps.powi((m + k - l) as i32);
        }
        rhs[l] = u1_derivative(m, eps0, eps, l);
    }
    let sol = solve_dense(a, rhs)?;
    Ok(LogProfile {
        m,
        eps,
        eps0,
        alpha: sol[0],
        alpha_k: sol[1..].to_vec(),
    })
}

/// l-th derivative of U₁ at t.
fn u1_derivative(m: usize, eps0: f64, t: f64, l: usize) -> f64 {
    let mut v = if l == 0 {
        -t.ln() + eps0.ln()
    } else {
        // d^l (−log t) = (−1)^l (l−1)! / t^l
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let mut fact = 1.0;
        for i in 1..l {
            fact *= i as f64;
        }
        sign * fact / t.powi(l as i32)
    };
    for k in 1..m {
        // term −(ε₀−t)^k/(k ε₀^k); l-th derivative
        if l <= k {
            let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
            v += sign * falling(k, l) / (k as f64 * eps0.powi(k as i32))
                * (eps0 - t).powi((k - l) as i32);
        }
    }
    v
}

impl LogProfile {
    pub fn support_radius(&self) -> f64 {
        self.eps0
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    pub fn derivative(&self, t: f64, l: usize) -> f64 {
        if t < 0.0 || t >= self.eps0 {
            return 0.0;
        }
        if t < self.eps {
            let mut v = if l == 0 { self.alpha } else { 0.0 };
            for (k, ak) in self.alpha_k.iter().enumerate() {
                let e = self.m + k;
                if e >= l {
                    v += ak * falling(e, l) * t.powi((e - l) as i32);
                }
            }
            v
        } else {
            u1_derivative(self.m, self.eps0, t, l)
        }
    }

    /// Residual of the C^{m−1} matching at t = ε.
    pub fn matching_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for l in 0..self.m {
            let inner = {
                let mut v = if l == 0 { self.alpha } else { 0.0 };
                for (k, ak) in self.alpha_k.iter().enumerate() {
                    let e = self.m + k;
                    if e >= l {
                        v += ak * falling(e, l) * self.eps.powi((e - l) as i32);
                    }
                }
                v
            };
            let outer = u1_derivative(self.m, self.eps0, self.eps, l);
            // normalize by the magnitude of the matched quantity
            let scale = outer.abs().max(1.0);
            worst = worst.max((inner - outer).abs() / scale);
        }
        worst
    }

    /// |α(ε)| / |log ε|, the recorded growth ratio.
    pub fn growth_ratio(&self) -> f64 {
        self.alpha.abs() / self.eps.ln().abs()
    }

    fn pieces(&self) -> Vec<(f64, f64)> {
        vec![(0.0, self.eps), (self.eps, self.eps0)]
    }
}

/// Any of the radial profiles.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Bump(BumpProfile),
    Cap(CapProfile),
    Log(LogProfile),
}

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Profile::Bump(p) => p.value(t),
            Profile::Cap(p) => p.value(t),
            Profile::Log(p) => p.value(t),
        }
    }

    pub fn support_radius(&self) -> f64 {
        match self {
            Profile::Bump(p) => p.support_radius(),
            Profile::Cap(p) => p.eps,
            Profile::Log(p) => p.support_radius(),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Profile::Bump(p) => p.m,
            Profile::Cap(p) => p.m,
            Profile::Log(p) => p.m,
        }
    }

    fn derivative_unchecked(&self, t: f64, l: usize) -> f64 {
        match self {
            Profile::Bump(p) => p.derivative(t, l),
            Profile::Cap(p) => p.derivative(t, l),
            Profile::Log(p) => p.derivative(t, l),
        }
    }

    fn pieces(&self) -> Vec<(f64, f64)> {
        match self {
            Profile::Bump(p) => p.pieces(),
            Profile::Cap(p) => p.pieces(),
            Profile::Log(p) => p.pieces(),
        }
    }

    /// Radii where the profile changes analytic form.
    pub fn kink_radii(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pieces().iter().flat_map(|&(a, b)| [a, b]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v.dedup();
        v.retain(|&r| r > 0.0);
        v
    }
}

/// l-th radial derivative of a profile; l must not exceed the order m.
pub fn profile_derivative(p: &Profile, t: f64, l: usize) -> Result<f64> {
    if l > p.order() {
        return Err(CoreError::Geometry(format!(
            "derivative order {l} exceeds the profile order m = {}",
            p.order()
        )));
    }
    Ok(p.derivative_unchecked(t, l))
}

/// Radial function x ↦ U(|x − a|) with support compactly inside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialTestFunction {
    pub center: Vec<f64>,
    pub profile: Profile,
}

impl RadialTestFunction {
    pub fn new(center: Vec<f64>, profile: Profile, domain: &Domain) -> Result<Self> {
        let support = profile.support_radius();
        if center.len() != domain.dim() || domain.boundary_distance(&center) <= support {
            return Err(CoreError::Geometry(format!(
                "support radius {support} around {center:?} is not contained in the domain"
            )));
        }
        Ok(RadialTestFunction { center, profile })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let d: f64 = self
            .center
            .iter()
            .zip(x)
            .map(|(c, v)| (c - v) * (c - v))
            .sum::<f64>()
            .sqrt();
        self.profile.value(d)
    }

    pub fn support_radius(&self) -> f64 {
        self.profile.support_radius()
    }
}

impl Weight for RadialTestFunction {
    fn value(&self, x: &[f64]) -> f64 {
        RadialTestFunction::value(self, x)
    }

    fn needs_subdivision(&self, lo: &[f64], hi: &[f64]) -> bool {
        // subdivide cells crossed by any kink sphere
        let mut dmin2 = 0.0;
        let mut dmax2 = 0.0;
        for k in 0..self.center.len() {
            let c = self.center[k];
            let near = c.clamp(lo[k], hi[k]);
            dmin2 += (c - near) * (c - near);
            let far = if c - lo[k] > hi[k] - c { lo[k] } else { hi[k] };
            dmax2 += (c - far) * (c - far);
        }
        let (dmin, dmax) = (dmin2.sqrt(), dmax2.sqrt());
        self.profile
            .kink_radii()
            .iter()
            .any(|&r| dmin < r && dmax > r)
    }
}

/// Energy of a radial function: the upper-estimate surrogate
/// C_{N,m} |S^{N−1}| Σ_k ∫ (U^{(k)})² t^{N−1−2(m−k)} dt, plus the exact
/// value for m = 1 where |∇u|² = (U′)² holds pointwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialEnergy {
    pub surrogate: f64,
    pub exact_m1: Option<f64>,
    /// The combinatorial constant used for the surrogate.
    pub constant: f64,
}

/// Combinatorial bound constant: (# multi-indices |α| = m in R^N) times the
/// squared sum of partition weights for derivatives of t ↦ |x|.
fn surrogate_constant(n_dim: usize, m: usize) -> f64 {
    // partition weight sums for m = 1, 2, 3 with |∂^β |x|| ≤ D_{|β|} |x|^{1−|β|},
    // D = [1, 1, 2]
    let c_sum = match m {
        1 => 1.0,
        2 => 2.0,
        3 => 6.0,
        _ => panic!("unsupported order m = {m}"),
    };
    let mut count = 1.0; // binom(n_dim + m − 1, m)
    for i in 0..m {
        count = count * (n_dim + i) as f64 / (i + 1) as f64;
    }
    count * c_sum * c_sum
}

pub fn radial_energy(f: &RadialTestFunction, n_dim: usize, m: usize) -> Result<RadialEnergy> {
    if m > 3 {
        return Err(CoreError::Geometry("radial energy supports m <= 3".into()));
    }
    let sphere = unit_sphere_area(n_dim);
    let constant = surrogate_constant(n_dim, m);
    let mut sum = 0.0;
    for k in 1..=m {
        let power = n_dim as i32 - 1 - 2 * (m - k) as i32;
        for (a, b) in f.profile.pieces() {
            let (xs, ws) = gauss_on_interval(48, a, b);
            let mut piece = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                let d = f.profile.derivative_unchecked(*x, k);
                piece += w * d * d * x.powi(power);
            }
            sum += piece;
        }
    }
    let surrogate = constant * sphere * sum;
    let exact_m1 = if m == 1 {
        let mut e = 0.0;
        for (a, b) in f.profile.pieces() {
            let (xs, ws) = gauss_on_interval(48, a, b);
            for (x, w) in xs.iter().zip(&ws) {
                let d = f.profile.derivative_unchecked(*x, 1);
                e += w * d * d * x.powi(n_dim as i32 - 1);
            }
        }
        Some(sphere * e)
    } else {
        None
    };
    Ok(RadialEnergy {
        surrogate,
        exact_m1,
        constant,
    })
}

/// Ball or annulus region used to seed a disjoint bump family.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnularRegion {
    Ball(Ball),
    Annulus(Annulus),
}

impl AnnularRegion {
    pub fn center(&self) -> &[f64] {
        match self {
            AnnularRegion::Ball(b) => &b.center,
            AnnularRegion::Annulus(a) => &a.center,
        }
    }

    pub fn radii(&self) -> (f64, f64) {
        match self {
            AnnularRegion::Ball(b) => (0.0, b.radius),
            AnnularRegion::Annulus(a) => (a.inner, a.outer),
        }
    }

    /// Doubled support interval [r/2, 2R] in the radial coordinate.
    fn doubled(&self) -> (f64, f64) {
        let (r, big_r) = self.radii();
        (r / 2.0, 2.0 * big_r)
    }

    fn doubled_disjoint(&self, other: &AnnularRegion) -> bool {
        let (r1, o1) = self.doubled();
        let (r2, o2) = other.doubled();
        let d: f64 = self
            .center()
            .iter()
            .zip(other.center())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        // outer separation, or one double nested inside the other's hole
        d >= o1 + o2 || d + o1 <= r2 || d + o2 <= r1
    }
}

/// One bump per region; the doubled regions must be pairwise disjoint and
/// inside the domain. Disjointness is also verified by sampling the built
/// functions on a 16^N grid.
pub fn build_disjoint_family(
    regions: &[AnnularRegion],
    m: usize,
    domain: &Domain,
) -> Result<Vec<RadialTestFunction>> {
    for i in 0..regions.len() {
        for j in i + 1..regions.len() {
            if !regions[i].doubled_disjoint(&regions[j]) {
                return Err(CoreError::Geometry(format!(
                    "doubled regions {i} and {j} overlap"
                )));
            }
        }
    }
    let mut fns = Vec::with_capacity(regions.len());
    for reg in regions {
        let (r, big_r) = reg.radii();
        let profile = solve_profile(m, r, big_r)?;
        fns.push(RadialTestFunction::new(
            reg.center().to_vec(),
            Profile::Bump(profile),
            domain,
        )?);
    }
    // sampling certificate
    let n = domain.dim();
    let res = 16usize;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0; n];
    loop {
        for k in 0..n {
            let b = domain.bounds()[k];
            x[k] = b[0] + (idx[k] as f64 + 0.5) / res as f64 * (b[1] - b[0]);
        }
        let mut nonzero = 0;
        for f in &fns {
            if RadialTestFunction::value(f, &x).abs() > 0.0 {
                nonzero += 1;
            }
        }
        if nonzero > 1 {
            return Err(CoreError::Geometry(format!(
                "sampled overlap of supports at {x:?}"
            )));
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < res {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                return Ok(fns);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn first_order_profile_coefficients() {
        let p = solve_profile(1, 0.1, 0.2).unwrap();
        assert_relative_eq!(p.inner_coeffs[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(p.inner_coeffs[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.outer_coeffs[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.outer_coeffs[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn profile_plateau_and_derivatives() {
        let p = solve_profile(2, 0.1, 0.3).unwrap();
        assert!(p.max_condition_residual() < 1e-12);
        for t in [0.1, 0.15, 0.2, 0.299] {
            assert_relative_eq!(p.value(t), 1.0, epsilon = 1e-12);
        }
        // m=1 ramp slope is 2/r on (r/2, r)
        let p1 = solve_profile(1, 0.1, 0.2).unwrap();
        assert_relative_eq!(p1.derivative(0.07, 1), 2.0 / 0.1, epsilon = 1e-10);
        assert_relative_eq!(p1.derivative(0.2, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn profile_stays_in_unit_range() {
        for m in 1..=3 {
            let p = solve_profile(m, 0.05, 0.11).unwrap();
            for i in 0..=400 {
                let t = 0.25 * i as f64 / 400.0;
                let v = p.value(t);
                assert!(
                    (-1e-9..=1.0 + 1e-9).contains(&v),
                    "m={m} t={t}: U={v}"
                );
            }
        }
    }

    #[test]
    fn derivative_order_capped_at_m() {
        let p = Profile::Bump(solve_profile(2, 0.1, 0.2).unwrap());
        assert!(profile_derivative(&p, 0.15, 2).is_ok());
        assert!(profile_derivative(&p, 0.15, 3).is_err());
    }

    #[test]
    fn cap_profile_first_order() {
        let c = cap_profile(1, 0.2).unwrap();
        // linear ramp 2 − 2t/ε
        assert_relative_eq!(c.value(0.1), 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.value(0.15), 2.0 - 2.0 * 0.15 / 0.2, epsilon = 1e-12);
        assert_relative_eq!(c.value(0.1999999), 0.0, epsilon = 1e-5);
        assert!(c.max_condition_residual() < 1e-10);
        let c3 = cap_profile(3, 0.05).unwrap();
        assert!(c3.max_condition_residual() < 1e-10);
    }

    #[test]
    fn log_profile_first_order_alpha() {
        let lp = log_profile(1, 1e-3, 0.1).unwrap();
        assert_relative_eq!(lp.alpha, -(1e-3f64).ln() + 0.1f64.ln(), epsilon = 1e-12);
        // U₁' = −1/t for m = 1
        assert_relative_eq!(lp.derivative(0.05, 1), -1.0 / 0.05, epsilon = 1e-12);
    }

    #[test]
    fn log_profile_matching_and_growth() {
        let lp = log_profile(2, 1e-3, 0.1).unwrap();
        assert!(lp.matching_residual() < 1e-8, "{}", lp.matching_residual());
        let mut ratios = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let lp = log_profile(2, eps, 0.1).unwrap();
            ratios.push(lp.growth_ratio());
        }
        let c1 = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let c2 = ratios.iter().cloned().fold(0.0f64, f64::max);
        assert!(c1 > 0.0 && c2.is_finite() && c2 / c1 < 5.0, "c1={c1} c2={c2}");
    }

    #[test]
    fn radial_energy_m1_conformal_invariance_2d() {
        // scaling both radii leaves the 2D Dirichlet energy unchanged
        let dom = Domain::new(&[[-10.0, 10.0], [-10.0, 10.0]]).unwrap();
        let mk = |lam: f64| {
            let p = solve_profile(1, 0.1 * lam, 0.2 * lam).unwrap();
            RadialTestFunction::new(vec![0.0, 0.0], Profile::Bump(p), &dom).unwrap()
        };
        let e1 = radial_energy(&mk(1.0), 2, 1).unwrap();
        let e2 = radial_energy(&mk(3.0), 2, 1).unwrap();
        let x1 = e1.exact_m1.unwrap();
        let x2 = e2.exact_m1.unwrap();
        assert!(x1 > 0.0 && x1.is_finite());
        assert_relative_eq!(x1, x2, max_relative = 1e-10);
    }

    #[test]
    fn surrogate_bounded_by_radius_powers() {
        // surrogate ≤ C (r^{N−2m} + R^{N−2m}); record the empirical C
        let dom = Domain::new(&[[-10.0, 10.0], [-10.0, 10.0], [-10.0, 10.0]]).unwrap();
        let (n_dim, m) = (3usize, 1usize);
        let mut c_emp = 0.0f64;
        for (r, big_r) in [(0.05, 0.1), (0.1, 0.4), (0.02, 0.5), (0.3, 0.6)] {
            let p = solve_profile(m, r, big_r).unwrap();
            let f = RadialTestFunction::new(vec![0.0; 3], Profile::Bump(p), &dom).unwrap();
            let e = radial_energy(&f, n_dim, m).unwrap();
            let pw = r.powi(n_dim as i32 - 2 * m as i32) + big_r.powi(n_dim as i32 - 2 * m as i32);
            c_emp = c_emp.max(e.surrogate / pw);
        }
        assert!(c_emp.is_finite() && c_emp > 0.0);
        // scale invariance of the ratio: λ scaling changes nothing
        let p = solve_profile(m, 0.1, 0.2).unwrap();
        let pl = solve_profile(m, 0.05, 0.1).unwrap();
        let f = RadialTestFunction::new(vec![0.0; 3], Profile::Bump(p), &dom).unwrap();
        let fl = RadialTestFunction::new(vec![0.0; 3], Profile::Bump(pl), &dom).unwrap();
        let r1 = radial_energy(&f, n_dim, m).unwrap().surrogate / (0.1f64 + 0.2);
        let r2 = radial_energy(&fl, n_dim, m).unwrap().surrogate / (0.05f64 + 0.1);
        assert_relative_eq!(r1, r2, max_relative = 1e-9);
    }

    #[test]
    fn disjoint_family_of_two_balls() {
        let dom = Domain::unit_square();
        let regions = vec![
            AnnularRegion::Ball(Ball::new(vec![0.25, 0.25], 0.08).unwrap()),
            AnnularRegion::Ball(Ball::new(vec![0.75, 0.75], 0.08).unwrap()),
        ];
        let fam = build_disjoint_family(&regions, 1, &dom).unwrap();
        assert_eq!(fam.len(), 2);
        let single = build_disjoint_family(&regions[..1], 2, &dom).unwrap();
        assert_eq!(single.len(), 1);
        let overlapping = vec![
            AnnularRegion::Ball(Ball::new(vec![0.4, 0.4], 0.2).unwrap()),
            AnnularRegion::Ball(Ball::new(vec![0.6, 0.6], 0.2).unwrap()),
        ];
        assert!(build_disjoint_family(&overlapping, 1, &dom).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn profile_conditions_hold_for_random_radii(
            m in 1usize..=3,
            r in 1e-3f64..0.4,
            gap in 1e-3f64..0.4,
        ) {
            let big_r = r + gap;
            let p = solve_profile(m, r, big_r).unwrap();
            prop_assert!(p.max_condition_residual() < 1e-10);
            // normalized coefficients are radius-independent
            let q = solve_profile(m, 2.0 * r, 3.0 * big_r).unwrap();
            for (a, b) in p.inner_coeffs.iter().zip(&q.inner_coeffs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in p.outer_coeffs.iter().zip(&q.outer_coeffs) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
