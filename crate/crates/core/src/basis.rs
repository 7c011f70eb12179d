//! Univariate B-spline bases on uniform open knot vectors, plus the small
//! amount of quadrature machinery the assemblers need.
//!
//! A basis of degree p on n elements has n + p functions with C^{p-1}
//! smoothness across the interior knots; tensor products of these bases are
//! the conforming spaces used everywhere else in the crate.

use nalgebra::DMatrix;

/// Gauss–Legendre rule on [-1, 1] with `n` points (exact to degree 2n−1).
/// Computed by Newton iteration on the Legendre recurrence; deterministic.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // P_n(x) and P'_n(x) by three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    // ascending order, symmetrized pairing left to the caller
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Gauss rule mapped onto [a, b].
pub fn gauss_on_interval(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (xs, ws) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| half * w).collect(),
    )
}

/// Degree-p B-spline basis on a uniform open knot vector over [lo, hi].
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis1d {
    lo: f64,
    hi: f64,
    elements: usize,
    degree: usize,
    knots: Vec<f64>,
}

impl SplineBasis1d {
    pub fn new(lo: f64, hi: f64, elements: usize, degree: usize) -> Self {
        assert!(elements >= 1 && degree >= 1 && lo < hi);
        let p = degree;
        let h = (hi - lo) / elements as f64;
        let mut knots = Vec::with_capacity(elements + 2 * p + 1);
        for _ in 0..p {
            knots.push(lo);
        }
        for i in 0..=elements {
            knots.push(lo + i as f64 * h);
        }
        for _ in 0..p {
            knots.push(hi);
        }
        SplineBasis1d {
            lo,
            hi,
            elements,
            degree,
            knots,
        }
    }

    pub fn dim(&self) -> usize {
        self.elements + self.degree
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.elements as f64
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn element_bounds(&self, e: usize) -> (f64, f64) {
        (
            self.lo + e as f64 * self.h(),
            self.lo + (e + 1) as f64 * self.h(),
        )
    }

    /// Element containing x, clamped to [0, elements).
    pub fn element_of(&self, x: f64) -> usize {
        let e = ((x - self.lo) / self.h()).floor() as isize;
        e.clamp(0, self.elements as isize - 1) as usize
    }

    /// Index of the first basis function active on element e; functions
    /// e..=e+p are active there.
    pub fn first_active(&self, e: usize) -> usize {
        e
    }

    /// Values and derivatives of the p+1 basis functions active on element
    /// `e`, evaluated at x (which must lie in that element's closure).
    /// Returns `ders[d][local]` for d = 0..=max_der.
    pub fn eval_element(&self, e: usize, x: f64, max_der: usize) -> Vec<Vec<f64>> {
        let p = self.degree;
        let span = e + p; // knot span index: knots[span] <= x <= knots[span+1]
        let nd = max_der.min(p);
        let u = &self.knots;

        // Piegl–Tiller basis function derivative algorithm.
        let mut ndu = vec![vec![0.0f64; p + 1]; p + 1];
        ndu[0][0] = 1.0;
        let mut left = vec![0.0f64; p + 1];
        let mut right = vec![0.0f64; p + 1];
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0f64; p + 1]; max_der + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }

        let mut a = [vec![0.0f64; p + 1], vec![0.0f64; p + 1]];
        for r in 0..=p {
            let mut s1 = 0usize;
            let mut s2 = 1usize;
            a[0].iter_mut().for_each(|v| *v = 0.0);
            a[1].iter_mut().for_each(|v| *v = 0.0);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p as isize - k as isize;
                if r >= k {
                    let v = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    a[s2][0] = v;
                    d = v * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let v =
                        (a[s1][j] - a[s1][j - 1]) / ndu[(pk + 1) as usize][(rk + j as isize) as usize];
                    a[s2][j] = v;
                    d += v * ndu[(rk + j as isize) as usize][pk as usize];
                }
                if r as isize <= pk {
                    let v = -a[s1][k - 1] / ndu[(pk + 1) as usize][r];
                    a[s2][k] = v;
                    d += v * ndu[r][pk as usize];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }

        let mut factor = p as f64;
        for k in 1..=nd {
            for j in 0..=p {
                ders[k][j] *= factor;
            }
            factor *= (p - k) as f64;
        }
        // derivatives above the polynomial degree are identically zero and
        // stay zero-filled
        ders
    }

    /// Coefficients expressing the monomial x^k (k <= p) in this basis, via
    /// Marsden's identity: c_i = e_k(t_{i+1},…,t_{i+p}) / C(p,k).
    pub fn monomial_coefficients(&self, k: usize) -> Vec<f64> {
        assert!(k <= self.degree, "monomial degree exceeds basis degree");
        let p = self.degree;
        let n = self.dim();
        let mut coeffs = vec![0.0f64; n];
        for (i, c) in coeffs.iter_mut().enumerate() {
            let interior = &self.knots[i + 1..i + 1 + p];
            *c = elementary_symmetric(interior, k) / binomial(p, k);
        }
        coeffs
    }

    /// The dyadically refined basis (each element split in half).
    pub fn refine_dyadic(&self) -> SplineBasis1d {
        SplineBasis1d::new(self.lo, self.hi, self.elements * 2, self.degree)
    }

    /// Dense prolongation matrix onto the dyadic refinement, built by knot
    /// insertion of the element midpoints. Test-grade sizes only.
    pub fn prolongation_to_refined(&self) -> DMatrix<f64> {
        let p = self.degree;
        let mut knots = self.knots.clone();
        let mut total = DMatrix::<f64>::identity(self.dim(), self.dim());
        let mids: Vec<f64> = (0..self.elements)
            .map(|e| {
                let (a, b) = self.element_bounds(e);
                0.5 * (a + b)
            })
            .collect();
        for u in mids {
            let n_old = knots.len() - p - 1;
            // span: last index with knots[span] <= u
            let mut span = 0;
            for (idx, t) in knots.iter().enumerate() {
                if *t <= u {
                    span = idx;
                }
            }
            let mut step = DMatrix::<f64>::zeros(n_old + 1, n_old);
            for i in 0..=n_old {
                if i + p <= span {
                    step[(i, i)] = 1.0;
                } else if i > span {
                    step[(i, i - 1)] = 1.0;
                } else {
                    let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
                    step[(i, i)] = alpha;
                    step[(i, i - 1)] = 1.0 - alpha;
                }
            }
            total = &step * total;
            knots.insert(span + 1, u);
        }
        total
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

fn elementary_symmetric(values: &[f64], k: usize) -> f64 {
    // e_k via the Newton triangle: dp[j] accumulates e_j
    let mut dp = vec![0.0f64; k + 1];
    dp[0] = 1.0;
    for &v in values {
        for j in (1..=k).rev() {
            dp[j] += dp[j - 1] * v;
        }
    }
    dp[k]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        let (xs, ws) = gauss_on_interval(3, 0.0, 2.0);
        // degree 5 is exact for a 3-point rule
        let val: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| w * x.powi(5))
            .sum();
        assert_relative_eq!(val, 64.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn partition_of_unity_and_derivative_sums() {
        for p in 1..=4 {
            let basis = SplineBasis1d::new(0.0, 1.0, 7, p);
            for &x in &[0.0, 0.013, 0.371, 0.5, 0.864, 1.0] {
                let e = basis.element_of(x);
                let ders = basis.eval_element(e, x, p.min(3));
                let sum0: f64 = ders[0].iter().sum();
                assert_relative_eq!(sum0, 1.0, epsilon = 1e-12);
                for d in 1..ders.len() {
                    let s: f64 = ders[d].iter().sum();
                    assert!(s.abs() < 1e-8, "p={p} d={d} x={x}: {s}");
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let basis = SplineBasis1d::new(0.0, 1.0, 5, 3);
        let x = 0.437;
        let e = basis.element_of(x);
        let h = 1e-6;
        let d0 = basis.eval_element(e, x, 2);
        let dp = basis.eval_element(e, x + h, 2);
        let dm = basis.eval_element(e, x - h, 2);
        for l in 0..basis.degree() + 1 {
            let fd1 = (dp[0][l] - dm[0][l]) / (2.0 * h);
            assert_relative_eq!(d0[1][l], fd1, epsilon = 1e-5, max_relative = 1e-5);
            let fd2 = (dp[1][l] - dm[1][l]) / (2.0 * h);
            assert_relative_eq!(d0[2][l], fd2, epsilon = 1e-4, max_relative = 1e-4);
        }
    }

    #[test]
    fn marsden_monomials_reproduce() {
        for p in 1..=3 {
            let basis = SplineBasis1d::new(0.0, 1.0, 6, p);
            for k in 0..=p {
                let coeffs = basis.monomial_coefficients(k);
                for &x in &[0.1, 0.25, 0.77, 0.95] {
                    let e = basis.element_of(x);
                    let ders = basis.eval_element(e, x, 0);
                    let first = basis.first_active(e);
                    let val: f64 = (0..=p).map(|l| coeffs[first + l] * ders[0][l]).sum();
                    assert_relative_eq!(val, x.powi(k as i32), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn prolongation_reproduces_coarse_splines() {
        let coarse = SplineBasis1d::new(0.0, 1.0, 4, 3);
        let fine = coarse.refine_dyadic();
        let prol = coarse.prolongation_to_refined();
        assert_eq!(prol.nrows(), fine.dim());
        assert_eq!(prol.ncols(), coarse.dim());
        // x^2 expressed on the coarse basis must map onto the fine expression
        let cc = coarse.monomial_coefficients(2);
        let cf_expected = fine.monomial_coefficients(2);
        let cf = &prol * nalgebra::DVector::from_vec(cc);
        for i in 0..fine.dim() {
            assert_relative_eq!(cf[i], cf_expected[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn dimension_counts() {
        assert_eq!(SplineBasis1d::new(0.0, 1.0, 4, 1).dim(), 5);
        assert_eq!(SplineBasis1d::new(0.0, 1.0, 8, 3).dim(), 11);
        assert_eq!(SplineBasis1d::new(0.0, 1.0, 8, 2).dim(), 10);
    }
}
