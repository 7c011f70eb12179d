//! Generalized symmetric eigensolves K v = μ M v for the smallest eigenvalues.
//!
//! The solver runs block subspace iteration on the shift-inverted operator
//! (K + σM)⁻¹M with a banded Cholesky factorization, M-orthonormal blocks and
//! a Rayleigh–Ritz projection every sweep. The kernel eigenvalues (μ = 0 with
//! multiplicity d_{N,m}) are reported as computed near-zeros, never deflated;
//! [`kernel_dimension`] turns the multiplicity statement into a check.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{DofVector, SymmetricSparseMatrix};
use crate::error::{CoreError, Result};
use crate::geometry::Domain;
use crate::linalg::{dense_generalized_eigen, BandedCholesky};

/// Dimension of the space of polynomials of degree ≤ m−1 in R^n:
/// binom(n+m−1, n), the multiplicity of the zero eigenvalue.
pub fn polynomial_kernel_dim(n: usize, m: usize) -> usize {
    let mut v = 1usize;
    for i in 0..n {
        v = v * (m + i) / (i + 1);
    }
    v
}

/// Shift-invert solver parameters; deterministic for a fixed seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// σ > 0: makes K + σM positive definite despite K's kernel.
    pub shift: f64,
    /// Relative residual tolerance for accepting an eigenpair.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(shift: f64) -> Self {
        assert!(shift > 0.0);
        SolverConfig {
            shift,
            tolerance: 1e-9,
            max_iterations: 400,
            seed: 7,
        }
    }

    /// Default shift 1/|Ω|; behaves well across the density catalog.
    pub fn for_domain(domain: &Domain) -> Self {
        Self::new(1.0 / domain.volume())
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_iterations(mut self, it: usize) -> Self {
        self.max_iterations = it;
        self
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig::new(1.0)
    }
}

/// Ascending eigenvalues with eigenvectors, residuals and kernel count.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DofVector>,
    /// ‖K v − μ M v‖₂ per pair.
    pub residual_norms: Vec<f64>,
    /// Leading eigenvalues below the relative-zero threshold.
    pub kernel_count: usize,
    /// False when max_iterations was reached before the residual criterion.
    pub converged: bool,
}

/// JSON shape for serialized spectra.
#[derive(Serialize)]
pub struct SpectrumRecord<'a> {
    pub eigenvalues: &'a [f64],
    pub residuals: &'a [f64],
    pub kernel_count: usize,
}

impl Spectrum {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "eigenvalues": self.eigenvalues,
            "residuals": self.residual_norms,
            "kernel_count": self.kernel_count,
        })
    }

    fn compute_kernel_count(values: &[f64]) -> usize {
        let mut count = 0;
        for c in 0..values.len().saturating_sub(1) {
            if values[c] < 1e-7 * values[c + 1] {
                count = c + 1;
            }
        }
        count
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// In-place B-orthonormalization (modified Gram–Schmidt, two passes).
/// Collapsing columns are replaced with fresh random vectors.
fn b_orthonormalize(
    b: &SymmetricSparseMatrix,
    block: &mut [Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let n = b.dim();
    let mut bv: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for j in 0..block.len() {
        let mut attempts = 0;
        loop {
            for _pass in 0..2 {
                for i in 0..j {
                    let h = dot(&bv[i], &block[j]);
                    let (head, tail) = block.split_at_mut(j);
                    axpy(-h, &head[i], &mut tail[0]);
                }
            }
            let w = b.apply(&block[j]);
            let nrm = dot(&block[j], &w).max(0.0).sqrt();
            if nrm > 1e-14 * (1.0 + norm2(&block[j])) {
                let inv = 1.0 / nrm;
                for v in block[j].iter_mut() {
                    *v *= inv;
                }
                bv.push(w.iter().map(|x| x * inv).collect());
                break;
            }
            attempts += 1;
            assert!(attempts < 50, "B-orthonormalization failed to recover rank");
            block[j] = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
        }
    }
    bv
}

struct IterationResult {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    converged: bool,
}

/// Shift-invert subspace iteration for the pencil (A, B) with B positive
/// definite and S = A + shift·B factorized; returns the `count` smallest
/// eigenvalues of A v = λ B v with B-orthonormal vectors.
fn shift_invert_iteration(
    a: &SymmetricSparseMatrix,
    b: &SymmetricSparseMatrix,
    s_chol: &BandedCholesky,
    count: usize,
    cfg: &SolverConfig,
) -> Result<IterationResult> {
    let n = a.dim();
    let block = (count + (count / 2).max(8)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();

    // scale floor for residual acceptance near machine precision
    let a_scale = a.norm_inf().max(1e-300);
    let mut values = vec![f64::INFINITY; block];
    let mut residuals = vec![f64::INFINITY; block];
    let mut converged = false;

    for _iter in 0..cfg.max_iterations {
        // y_j = S^{-1} B v_j
        let mut y: Vec<Vec<f64>> = Vec::with_capacity(block);
        for vj in &v {
            let mut w = b.apply(vj);
            s_chol.solve_in_place(&mut w);
            y.push(w);
        }
        let _bv = b_orthonormalize(b, &mut y, &mut rng);
        // Rayleigh–Ritz on A
        let ay: Vec<Vec<f64>> = y.iter().map(|c| a.apply(c)).collect();
        let mut proj = DMatrix::<f64>::zeros(block, block);
        for i in 0..block {
            for j in i..block {
                let p = dot(&y[i], &ay[j]);
                proj[(i, j)] = p;
                proj[(j, i)] = p;
            }
        }
        let eig = proj.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

        // rotate the block onto the Ritz basis
        let mut new_v: Vec<Vec<f64>> = vec![vec![0.0; n]; block];
        for (c, &oc) in order.iter().enumerate() {
            for r in 0..block {
                let w = eig.eigenvectors[(r, oc)];
                if w != 0.0 {
                    axpy(w, &y[r], &mut new_v[c]);
                }
            }
        }
        v = new_v;
        values = order.iter().map(|&i| eig.eigenvalues[i]).collect();

        // residual check on the wanted pairs
        let mut all_ok = true;
        for (i, res) in residuals.iter_mut().enumerate().take(count) {
            let av = a.apply(&v[i]);
            let bv = b.apply(&v[i]);
            let mu = values[i];
            let mut r2 = 0.0;
            for t in 0..n {
                let d = av[t] - mu * bv[t];
                r2 += d * d;
            }
            let r = r2.sqrt();
            *res = r;
            let scale = norm2(&av) + mu.abs() * norm2(&bv);
            let floor = 1e3 * f64::EPSILON * a_scale * norm2(&v[i]);
            if r > cfg.tolerance * scale + floor {
                all_ok = false;
            }
        }
        if all_ok {
            converged = true;
            break;
        }
    }

    Ok(IterationResult {
        values: values[..count].to_vec(),
        vectors: v[..count].to_vec(),
        residuals: residuals[..count].to_vec(),
        converged,
    })
}

/// Subspace iteration for the semidefinite trace pencil K v = σ B v. The
/// block is orthonormalized in the S = K + cB inner product (S is positive
/// definite); Ritz values θ of the projected trace form give σ = 1/θ − c,
/// with θ ≈ 0 marking directions where B vanishes (σ = ∞).
fn steklov_iteration(
    k_mat: &SymmetricSparseMatrix,
    b_mat: &SymmetricSparseMatrix,
    s_mat: &SymmetricSparseMatrix,
    s_chol: &BandedCholesky,
    shift: f64,
    count: usize,
    cfg: &SolverConfig,
) -> Result<IterationResult> {
    let n = k_mat.dim();
    let block = (count + (count / 2).max(8)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut v: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen::<f64>() - 0.5).collect())
        .collect();
    let k_scale = k_mat.norm_inf().max(1e-300);
    let mut sigmas = vec![f64::INFINITY; block];
    let mut residuals = vec![f64::INFINITY; block];
    let mut converged = false;

    for iter in 0..cfg.max_iterations {
        let mut y: Vec<Vec<f64>> = Vec::with_capacity(block);
        for vj in &v {
            let mut w = b_mat.apply(vj);
            s_chol.solve_in_place(&mut w);
            y.push(w);
        }
        let _sv = b_orthonormalize(s_mat, &mut y, &mut rng);
        // project the trace form: with YᵀSY = I the Ritz values are θ
        let by: Vec<Vec<f64>> = y.iter().map(|c| b_mat.apply(c)).collect();
        let mut proj = DMatrix::<f64>::zeros(block, block);
        for i in 0..block {
            for j in i..block {
                let p = dot(&y[i], &by[j]);
                proj[(i, j)] = p;
                proj[(j, i)] = p;
            }
        }
        let eig = proj.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        // θ descending ⇔ σ ascending
        order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
        let thetas: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut new_v: Vec<Vec<f64>> = vec![vec![0.0; n]; block];
        for (c, &oc) in order.iter().enumerate() {
            for r in 0..block {
                let w = eig.eigenvectors[(r, oc)];
                if w != 0.0 {
                    axpy(w, &y[r], &mut new_v[c]);
                }
            }
        }
        v = new_v;
        let theta_floor = 1e-9 * thetas[0].max(f64::MIN_POSITIVE);
        if thetas[count - 1] <= theta_floor {
            if iter >= 5 {
                let rank = thetas.iter().filter(|&&t| t > theta_floor).count();
                return Err(CoreError::Solver(format!(
                    "requested {count} eigenvalues but the trace form supports only {rank} finite ones"
                )));
            }
            continue;
        }
        for (i, s) in sigmas.iter_mut().enumerate() {
            *s = if thetas[i] > theta_floor {
                1.0 / thetas[i] - shift
            } else {
                f64::INFINITY
            };
        }
        let mut all_ok = true;
        for (i, res) in residuals.iter_mut().enumerate().take(count) {
            let kv = k_mat.apply(&v[i]);
            let bv = b_mat.apply(&v[i]);
            let sg = sigmas[i];
            let mut r2 = 0.0;
            for t in 0..n {
                let d = kv[t] - sg * bv[t];
                r2 += d * d;
            }
            let r = r2.sqrt();
            *res = r;
            let scale = norm2(&kv) + sg.abs() * norm2(&bv);
            let floor = 1e3 * f64::EPSILON * k_scale * norm2(&v[i]);
            if r > cfg.tolerance * scale + floor {
                all_ok = false;
            }
        }
        if all_ok {
            converged = true;
            break;
        }
    }

    Ok(IterationResult {
        values: sigmas[..count].to_vec(),
        vectors: v[..count].to_vec(),
        residuals: residuals[..count].to_vec(),
        converged,
    })
}

/// Solve K v = μ M v for the k smallest eigenpairs (M positive definite).
///
/// The shift is doubled automatically on factorization failure, up to 8
/// retries; results are deterministic for a fixed seed.
pub fn solve_generalized(
    k_mat: &SymmetricSparseMatrix,
    m_mat: &SymmetricSparseMatrix,
    k: usize,
    cfg: &SolverConfig,
) -> Result<Spectrum> {
    if k_mat.dim() != m_mat.dim() {
        return Err(CoreError::Solver(format!(
            "dimension mismatch: K is {}, M is {}",
            k_mat.dim(),
            m_mat.dim()
        )));
    }
    if k == 0 || k > k_mat.dim() {
        return Err(CoreError::Solver(format!(
            "requested {k} eigenvalues from a space of dimension {}",
            k_mat.dim()
        )));
    }
    // keep the kernel pivots of K + σM above the roundoff of eliminating
    // K-scale entries; the floor scales like 1/c under M → cM, so matched
    // shifts keep the exact discrete scaling law intact
    let m_norm = m_mat.norm_inf();
    let cond_floor = if m_norm > 0.0 {
        1e5 * f64::EPSILON * k_mat.norm_inf() / m_norm
    } else {
        0.0
    };
    let mut shift = cfg.shift.max(cond_floor);
    let mut chol = None;
    let mut last_err = None;
    for _ in 0..8 {
        match k_mat
            .add_scaled(m_mat, shift)
            .and_then(|s| BandedCholesky::factor(&s))
        {
            Ok(c) => {
                chol = Some(c);
                break;
            }
            Err(e) => {
                last_err = Some(e);
                shift *= 2.0;
            }
        }
    }
    let chol = chol.ok_or_else(|| {
        CoreError::Factorization(format!(
            "K + σM factorization failed up to σ = {shift} (initial σ too small): {}",
            last_err.map(|e| e.to_string()).unwrap_or_default()
        ))
    })?;

    let out = shift_invert_iteration(k_mat, m_mat, &chol, k, cfg)?;
    let kernel_count = Spectrum::compute_kernel_count(&out.values);
    Ok(Spectrum {
        eigenvalues: out.values,
        eigenvectors: out.vectors.into_iter().map(DofVector).collect(),
        residual_norms: out.residuals,
        kernel_count,
        converged: out.converged,
    })
}

/// Solve the boundary pencil K v = σ B v for the k smallest finite
/// eigenvalues (B positive semidefinite of low rank).
pub fn solve_steklov(
    k_mat: &SymmetricSparseMatrix,
    b_mat: &SymmetricSparseMatrix,
    k: usize,
    cfg: &SolverConfig,
) -> Result<Spectrum> {
    if k_mat.dim() != b_mat.dim() {
        return Err(CoreError::Solver("dimension mismatch".into()));
    }
    let mut shift = cfg.shift;
    let mut factored = None;
    for _ in 0..8 {
        let s_mat = k_mat.add_scaled(b_mat, shift)?;
        match BandedCholesky::factor(&s_mat) {
            Ok(c) => {
                factored = Some((s_mat, c));
                break;
            }
            Err(_) => shift *= 2.0,
        }
    }
    let (s_mat, chol) = factored.ok_or_else(|| {
        CoreError::Factorization(
            "K + cB is singular: the kernel of K meets the kernel of the trace form".into(),
        )
    })?;
    let out = steklov_iteration(k_mat, b_mat, &s_mat, &chol, shift, k, cfg)?;
    let kernel_count = Spectrum::compute_kernel_count(&out.values);
    Ok(Spectrum {
        eigenvalues: out.values,
        eigenvectors: out.vectors.into_iter().map(DofVector).collect(),
        residual_norms: out.residuals,
        kernel_count,
        converged: out.converged,
    })
}

/// Check that the computed kernel has dimension binom(N+m−1, N): the count of
/// eigenvalues below 1e−7·μ_{d+1}.
pub fn kernel_dimension(s: &Spectrum, n_dim: usize, m: usize) -> Result<usize> {
    let d = polynomial_kernel_dim(n_dim, m);
    if s.eigenvalues.len() <= d {
        return Err(CoreError::Structural(format!(
            "need more than d = {d} eigenvalues to certify the kernel"
        )));
    }
    let next = s.eigenvalues[d];
    if !(next > 0.0) {
        return Err(CoreError::Structural(format!(
            "μ_(d+1) = {next} is not positive (d = {d})"
        )));
    }
    let threshold = 1e-7 * next;
    let count = s.eigenvalues.iter().filter(|&&v| v < threshold).count();
    if count != d {
        return Err(CoreError::Structural(format!(
            "kernel dimension {count} does not match binom(N+m-1,N) = {d}; eigenvalues {:?}",
            &s.eigenvalues[..(d + 2).min(s.eigenvalues.len())]
        )));
    }
    Ok(d)
}

/// vᵀKv / vᵀMv.
pub fn rayleigh_quotient(
    k_mat: &SymmetricSparseMatrix,
    m_mat: &SymmetricSparseMatrix,
    v: &DofVector,
) -> Result<f64> {
    let den = m_mat.quadratic_form(&v.0, &v.0);
    if !(den > 0.0) {
        return Err(CoreError::Solver(format!("vector has non-positive M-norm {den}")));
    }
    Ok(k_mat.quadratic_form(&v.0, &v.0) / den)
}

/// Largest eigenvalue of the j×j pencil reduced to span(vectors): an upper
/// bound for the discrete μ_j, exact when the vectors are eigenvectors.
pub fn minmax_upper_bound(
    k_mat: &SymmetricSparseMatrix,
    m_mat: &SymmetricSparseMatrix,
    vectors: &[DofVector],
) -> Result<f64> {
    let j = vectors.len();
    if j == 0 {
        return Err(CoreError::Solver("empty trial family".into()));
    }
    let mut kp = DMatrix::<f64>::zeros(j, j);
    let mut mp = DMatrix::<f64>::zeros(j, j);
    for a in 0..j {
        for b in a..j {
            let kv = k_mat.quadratic_form(&vectors[a].0, &vectors[b].0);
            let mv = m_mat.quadratic_form(&vectors[a].0, &vectors[b].0);
            kp[(a, b)] = kv;
            kp[(b, a)] = kv;
            mp[(a, b)] = mv;
            mp[(b, a)] = mv;
        }
    }
    let (vals, _) = dense_generalized_eigen(&kp, &mp).map_err(|_| {
        CoreError::Solver("trial family is rank-deficient in the M-inner product".into())
    })?;
    Ok(*vals.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Density, UnitWeight};
    use crate::discretization::{BoundaryCondition, DiscreteSpace};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn string_setup(m: usize, elements: usize, degree: usize) -> (DiscreteSpace, SymmetricSparseMatrix, SymmetricSparseMatrix) {
        let dom = Domain::unit_interval();
        let s = DiscreteSpace::build(&dom, m, elements, BoundaryCondition::Natural, degree).unwrap();
        let k = s.assemble_stiffness();
        let mm = s.assemble_mass(&UnitWeight).matrix;
        (s, k, mm)
    }

    #[test]
    fn polynomial_kernel_dims() {
        assert_eq!(polynomial_kernel_dim(2, 2), 3);
        assert_eq!(polynomial_kernel_dim(1, 3), 3);
        assert_eq!(polynomial_kernel_dim(3, 1), 1);
        assert_eq!(polynomial_kernel_dim(1, 1), 1);
        assert_eq!(polynomial_kernel_dim(3, 2), 4);
    }

    #[test]
    fn neumann_string_oracle() {
        // separation of variables: μ_j = π²(j−1)²
        let (_s, k, m) = string_setup(1, 256, 2);
        let cfg = SolverConfig::for_domain(&Domain::unit_interval()).with_seed(3);
        let spec = solve_generalized(&k, &m, 6, &cfg).unwrap();
        assert!(spec.converged);
        for j in 2..=6 {
            let exact = PI * PI * ((j - 1) as f64).powi(2);
            assert_relative_eq!(spec.eigenvalues[j - 1], exact, max_relative = 5e-3);
        }
        assert_eq!(spec.kernel_count, 1);
        assert_eq!(kernel_dimension(&spec, 1, 1).unwrap(), 1);
    }

    #[test]
    fn square_laplacian_has_double_second_eigenvalue() {
        let dom = Domain::unit_square();
        let s = DiscreteSpace::build(&dom, 1, 24, BoundaryCondition::Natural, 2).unwrap();
        let k = s.assemble_stiffness();
        let m = s.assemble_mass(&UnitWeight).matrix;
        let cfg = SolverConfig::for_domain(&dom);
        let spec = solve_generalized(&k, &m, 5, &cfg).unwrap();
        let exact = PI * PI;
        assert_relative_eq!(spec.eigenvalues[1], exact, max_relative = 1e-2);
        assert_relative_eq!(spec.eigenvalues[2], exact, max_relative = 1e-2);
        assert_relative_eq!(spec.eigenvalues[3], 2.0 * exact, max_relative = 1e-2);
    }

    #[test]
    fn biharmonic_string_kernel_is_two_dimensional() {
        let (_s, k, m) = string_setup(2, 64, 3);
        let cfg = SolverConfig::for_domain(&Domain::unit_interval());
        let spec = solve_generalized(&k, &m, 5, &cfg).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-7 * spec.eigenvalues[2]);
        assert!(spec.eigenvalues[1].abs() < 1e-7 * spec.eigenvalues[2]);
        assert!(spec.eigenvalues[2] > 0.0);
        assert_eq!(kernel_dimension(&spec, 1, 2).unwrap(), 2);
    }

    #[test]
    fn eigenvalue_scaling_in_density() {
        // μ_j[cρ] = μ_j[ρ]/c at the discrete level (same K, scaled M)
        let (_s, k, m) = string_setup(1, 64, 2);
        let cfg = SolverConfig::new(1.0).with_tolerance(1e-12);
        let spec = solve_generalized(&k, &m, 5, &cfg).unwrap();
        for c in [0.5, 3.0] {
            let mc = m.scaled(c);
            let cfg_c = SolverConfig::new(1.0 / c).with_tolerance(1e-12);
            let spec_c = solve_generalized(&k, &mc, 5, &cfg_c).unwrap();
            for j in 1..5 {
                // skip kernel noise
                let a = spec.eigenvalues[j] / c;
                let b = spec_c.eigenvalues[j];
                assert_relative_eq!(a, b, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn domain_scaling_in_two_m() {
        // on tΩ with the same ρ pattern, μ scales by t^{-2m}
        for m in [1usize, 2] {
            let d1 = Domain::unit_interval();
            let d2 = Domain::interval(0.0, 2.0).unwrap();
            let cfg = SolverConfig::new(1.0).with_tolerance(1e-12);
            let mk = |d: &Domain| {
                let s = DiscreteSpace::build(d, m, 64, BoundaryCondition::Natural, m.max(2)).unwrap();
                (s.assemble_stiffness(), s.assemble_mass(&UnitWeight).matrix)
            };
            let (k1, m1) = mk(&d1);
            let (k2, m2) = mk(&d2);
            let s1 = solve_generalized(&k1, &m1, 4, &cfg).unwrap();
            let s2 = solve_generalized(&k2, &m2, 4, &cfg).unwrap();
            let t: f64 = 2.0;
            for j in m..4 {
                assert_relative_eq!(
                    s2.eigenvalues[j],
                    s1.eigenvalues[j] * t.powi(-2 * m as i32),
                    max_relative = 1e-8
                );
            }
        }
    }

    #[test]
    fn rayleigh_quotient_examples() {
        let (s, k, m) = string_setup(1, 64, 2);
        let cfg = SolverConfig::new(1.0);
        let spec = solve_generalized(&k, &m, 4, &cfg).unwrap();
        let rq = rayleigh_quotient(&k, &m, &spec.eigenvectors[2]).unwrap();
        assert_relative_eq!(rq, spec.eigenvalues[2], max_relative = 1e-8);
        let ones = DofVector(s.monomial_coefficients(&[0]).0);
        let rq0 = rayleigh_quotient(&k, &m, &ones).unwrap();
        assert!(rq0.abs() < 1e-12);
        assert!(rayleigh_quotient(&k, &m, &spec.eigenvectors[1]).unwrap() >= 0.0);
    }

    #[test]
    fn minmax_attained_by_eigenvectors() {
        let (_s, k, m) = string_setup(1, 64, 2);
        let cfg = SolverConfig::new(1.0).with_tolerance(1e-12);
        let spec = solve_generalized(&k, &m, 5, &cfg).unwrap();
        for j in [1usize, 3, 5] {
            let fam: Vec<DofVector> = spec.eigenvectors[..j].to_vec();
            let bound = minmax_upper_bound(&k, &m, &fam).unwrap();
            let mu = spec.eigenvalues[j - 1];
            if mu.abs() < 1e-10 {
                assert!(bound.abs() < 1e-9);
            } else {
                assert_relative_eq!(bound, mu, max_relative = 1e-9);
            }
            assert!(bound >= mu - 1e-9 * mu.abs() - 1e-12);
        }
    }

    #[test]
    fn minmax_rejects_rank_deficient_family() {
        let (_s, k, m) = string_setup(1, 32, 2);
        let cfg = SolverConfig::new(1.0);
        let spec = solve_generalized(&k, &m, 3, &cfg).unwrap();
        let v = spec.eigenvectors[1].clone();
        assert!(minmax_upper_bound(&k, &m, &[v.clone(), v]).is_err());
    }

    #[test]
    fn refinement_never_increases_eigenvalues() {
        // interfaces aligned with both grids keep the quadrature exact, so
        // min-max over nested spaces applies without interface noise
        let dom = Domain::unit_interval();
        let rho = Density::piecewise_constant(
            &dom,
            1.0,
            vec![(crate::density::PieceRegion::Boxed(vec![[0.25, 0.75]]), 2.5)],
        )
        .unwrap();
        let cfg = SolverConfig::new(1.0).with_tolerance(1e-12);
        let coarse = DiscreteSpace::build(&dom, 1, 32, BoundaryCondition::Natural, 2).unwrap();
        let fine = coarse.refine_dyadic();
        let solve = |s: &DiscreteSpace| {
            let k = s.assemble_stiffness();
            let m = s.assemble_mass(&rho).matrix;
            solve_generalized(&k, &m, 8, &cfg).unwrap()
        };
        let sc = solve(&coarse);
        let sf = solve(&fine);
        for j in 1..8 {
            assert!(
                sc.eigenvalues[j] >= sf.eigenvalues[j] - 1e-9 * sf.eigenvalues[j].abs() - 1e-12,
                "j={j}: coarse {} fine {}",
                sc.eigenvalues[j],
                sf.eigenvalues[j]
            );
        }
    }

    #[test]
    fn steklov_string_spectrum() {
        // 1D m=1 Steklov eigenvalues are exactly {0, 2}
        let dom = Domain::unit_interval();
        let s = DiscreteSpace::build(&dom, 1, 32, BoundaryCondition::Natural, 2).unwrap();
        let k = s.assemble_stiffness();
        let b = s.assemble_boundary_mass().unwrap();
        let cfg = SolverConfig::new(1.0);
        let spec = solve_steklov(&k, &b, 2, &cfg).unwrap();
        assert!(spec.eigenvalues[0].abs() < 1e-9);
        assert_relative_eq!(spec.eigenvalues[1], 2.0, max_relative = 1e-8);
        // requesting beyond the trace rank fails
        assert!(solve_steklov(&k, &b, 3, &cfg).is_err());
    }

    #[test]
    fn determinism_given_seed() {
        let (_s, k, m) = string_setup(1, 48, 2);
        let cfg = SolverConfig::new(1.0).with_seed(99);
        let a = solve_generalized(&k, &m, 4, &cfg).unwrap();
        let b = solve_generalized(&k, &m, 4, &cfg).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.residual_norms, b.residual_norms);
    }
}
