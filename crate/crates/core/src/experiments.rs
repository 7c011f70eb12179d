//! Orchestration: ε sweeps over the density families, log-log rate fits,
//! the Neumann→Steklov comparison, Taylor remainder quadrature checks, and
//! schema-stable CSV/JSON output.

use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::basis::gauss_on_interval;
use crate::bounds::{BoundKind, BoundReport, DensityFunctionals};
use crate::density::{Density, PieceRegion};
use crate::discretization::{BoundaryCondition, DiscreteSpace};
use crate::error::{CoreError, Result};
use crate::geometry::Domain;
use crate::spectrum::{kernel_dimension, solve_generalized, solve_steklov, SolverConfig, Spectrum};

/// A one-parameter density family evaluated along an ε ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityFamily {
    Constant { value: f64 },
    PointConcentration { delta: f64, center: Vec<f64> },
    TildeConcentration { delta: f64, center: Vec<f64> },
    BoundaryStripWeyl,
    SteklovFamily,
    MultiPoint { centers: Vec<Vec<f64>> },
}

impl DensityFamily {
    pub fn build(&self, domain: &Domain, m: usize, eps: f64) -> Result<Density> {
        match self {
            DensityFamily::Constant { value } => Density::constant(*value),
            DensityFamily::PointConcentration { delta, center } => {
                Density::point_concentration(domain, m, eps, *delta, center.clone())
            }
            DensityFamily::TildeConcentration { delta, center } => {
                Density::tilde_concentration(domain, m, eps, *delta, center.clone())
            }
            DensityFamily::BoundaryStripWeyl => Density::boundary_strip_weyl(domain, m, eps),
            DensityFamily::SteklovFamily => Density::steklov_family(domain, eps),
            DensityFamily::MultiPoint { centers } => {
                Density::multi_point(domain, eps, centers.clone())
            }
        }
    }

    /// Smallest geometric feature introduced at parameter ε: ball diameter
    /// for concentrations, strip width for boundary families.
    pub fn feature_size(&self, eps: f64) -> Option<f64> {
        match self {
            DensityFamily::Constant { .. } => None,
            DensityFamily::PointConcentration { .. }
            | DensityFamily::TildeConcentration { .. }
            | DensityFamily::MultiPoint { .. } => Some(2.0 * eps),
            DensityFamily::BoundaryStripWeyl | DensityFamily::SteklovFamily => Some(eps),
        }
    }
}

/// A single density given explicitly (the `solve` entry point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensitySpec {
    Constant {
        value: f64,
    },
    PointConcentration {
        eps: f64,
        delta: f64,
        center: Vec<f64>,
    },
    TildeConcentration {
        eps: f64,
        delta: f64,
        center: Vec<f64>,
    },
    BoundaryStripWeyl {
        eps: f64,
    },
    SteklovFamily {
        eps: f64,
    },
    MultiPoint {
        eps: f64,
        centers: Vec<Vec<f64>>,
    },
    PiecewiseConstant {
        default: f64,
        pieces: Vec<PieceSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub region: PieceRegion,
    pub value: f64,
}

impl DensitySpec {
    pub fn build(&self, domain: &Domain, m: usize) -> Result<Density> {
        match self {
            DensitySpec::Constant { value } => Density::constant(*value),
            DensitySpec::PointConcentration { eps, delta, center } => {
                Density::point_concentration(domain, m, *eps, *delta, center.clone())
            }
            DensitySpec::TildeConcentration { eps, delta, center } => {
                Density::tilde_concentration(domain, m, *eps, *delta, center.clone())
            }
            DensitySpec::BoundaryStripWeyl { eps } => {
                Density::boundary_strip_weyl(domain, m, *eps)
            }
            DensitySpec::SteklovFamily { eps } => Density::steklov_family(domain, *eps),
            DensitySpec::MultiPoint { eps, centers } => {
                Density::multi_point(domain, *eps, centers.clone())
            }
            DensitySpec::PiecewiseConstant { default, pieces } => Density::piecewise_constant(
                domain,
                *default,
                pieces.iter().map(|p| (p.region.clone(), p.value)).collect(),
            ),
        }
    }
}

/// Sweep configuration; see the per-field invariants in `validate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub m: usize,
    pub family: DensityFamily,
    /// Strictly decreasing ε ladder.
    pub eps_ladder: Vec<f64>,
    /// Elements per axis; must resolve the smallest ε with ≥ 4 cells.
    pub elements: usize,
    #[serde(default)]
    pub degree: Option<usize>,
    pub eigen_count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub bound_kinds: Vec<BoundKind>,
    #[serde(default)]
    pub rate_targets: Vec<RateTarget>,
}

fn default_seed() -> u64 {
    7
}

/// Per-experiment rate assertion, stated in the config and recorded in the
/// output, never widened at runtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTarget {
    pub j: usize,
    pub expected_slope: f64,
    pub tolerance: f64,
    #[serde(default)]
    pub min_r_squared: Option<f64>,
}

impl ExperimentConfig {
    pub fn degree_or_default(&self) -> usize {
        self.degree.unwrap_or(self.m.max(2))
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_ladder.is_empty() {
            return Err(CoreError::Config("empty eps ladder".into()));
        }
        if self.eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CoreError::Config("eps ladder must be strictly decreasing".into()));
        }
        if self.eigen_count < 1 {
            return Err(CoreError::Config("eigen_count must be >= 1".into()));
        }
        if self.elements < 4 || self.elements % 2 != 0 {
            return Err(CoreError::Config(
                "elements must be even and >= 4 (the refinement check solves at half resolution)"
                    .into(),
            ));
        }
        let h_max = (0..self.domain.dim())
            .map(|k| self.domain.edge(k) / self.elements as f64)
            .fold(0.0f64, f64::max);
        let eps_min = *self.eps_ladder.last().unwrap();
        if let Some(feature) = self.family.feature_size(eps_min) {
            if feature / h_max < 4.0 - 1e-9 {
                return Err(CoreError::Config(format!(
                    "elements {} leave {:.2} cells across the smallest feature {:.4}; need >= 4",
                    self.elements,
                    feature / h_max,
                    feature
                )));
            }
        }
        Ok(())
    }
}

/// One solved ladder point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub eps: f64,
    pub spectrum: Spectrum,
    /// Same problem at half resolution, for the discretization-error flag.
    pub coarse_spectrum: Spectrum,
    pub functionals: DensityFunctionals,
}

/// Full sweep output.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub n_dim: usize,
    pub m: usize,
    pub eigen_count: usize,
    pub points: Vec<SweepPoint>,
    /// Relative change between the two finest grids that flags a point.
    pub refine_flag_rel: f64,
}

impl SweepResult {
    /// True when refinement moved μ_j at this point by more than the flag
    /// threshold (such points are excluded from fits).
    pub fn flagged(&self, point: usize, j: usize) -> bool {
        let p = &self.points[point];
        let fine = p.spectrum.eigenvalues[j - 1];
        let coarse = p.coarse_spectrum.eigenvalues[j - 1];
        if fine <= 0.0 {
            return true;
        }
        ((fine - coarse) / fine).abs() > self.refine_flag_rel
    }

    pub fn mu(&self, point: usize, j: usize) -> f64 {
        self.points[point].spectrum.eigenvalues[j - 1]
    }
}

/// Assemble and solve one density problem; the shared path under all
/// experiments.
pub fn solve_density_problem(
    domain: &Domain,
    m: usize,
    elements: usize,
    degree: usize,
    rho: &Density,
    k: usize,
    seed: u64,
) -> Result<Spectrum> {
    let space = DiscreteSpace::build(domain, m, elements, BoundaryCondition::Natural, degree)?;
    let stiff = space.assemble_stiffness();
    let mass = space.assemble_mass(rho);
    let cfg = SolverConfig::for_domain(domain).with_seed(seed);
    let spec = solve_generalized(&stiff, &mass.matrix, k, &cfg)?;
    if !spec.converged {
        return Err(CoreError::Solver(format!(
            "eigensolve did not converge (residuals {:?})",
            spec.residual_norms
        )));
    }
    Ok(spec)
}

/// Run one solve per ladder point plus the half-resolution comparison;
/// every spectrum re-validates the kernel dimension before acceptance.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let n_dim = cfg.domain.dim();
    let degree = cfg.degree_or_default();
    let lp_exponent = n_dim as f64 / (2.0 * cfg.m as f64);
    let mut points = Vec::with_capacity(cfg.eps_ladder.len());
    for &eps in &cfg.eps_ladder {
        let rho = cfg.family.build(&cfg.domain, cfg.m, eps)?;
        let spectrum = solve_density_problem(
            &cfg.domain,
            cfg.m,
            cfg.elements,
            degree,
            &rho,
            cfg.eigen_count,
            cfg.seed,
        )?;
        kernel_dimension(&spectrum, n_dim, cfg.m)?;
        let coarse_spectrum = solve_density_problem(
            &cfg.domain,
            cfg.m,
            cfg.elements / 2,
            degree,
            &rho,
            cfg.eigen_count,
            cfg.seed,
        )?;
        let functionals = DensityFunctionals {
            mass: rho.mass(&cfg.domain),
            lp_integral: rho.lp_norm(&cfg.domain, lp_exponent).integral,
            sup: rho.sup_norm(&cfg.domain),
            volume: cfg.domain.volume(),
        };
        points.push(SweepPoint {
            eps,
            spectrum,
            coarse_spectrum,
            functionals,
        });
    }
    Ok(SweepResult {
        n_dim,
        m: cfg.m,
        eigen_count: cfg.eigen_count,
        points,
        refine_flag_rel: 0.02,
    })
}

/// Least-squares slope of log μ_j against log ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub j: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub used_points: usize,
    /// Ladder indices excluded by the refinement flag.
    pub excluded: Vec<usize>,
}

pub fn fit_rate(sweep: &SweepResult, j: usize) -> Result<RateFit> {
    if j < 1 || j > sweep.eigen_count {
        return Err(CoreError::Config(format!("no eigenvalue index {j} in the sweep")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = Vec::new();
    for (i, p) in sweep.points.iter().enumerate() {
        let mu = p.spectrum.eigenvalues[j - 1];
        if !(mu > 0.0) {
            return Err(CoreError::Config(format!(
                "non-positive eigenvalue μ_{j} = {mu} at eps = {}",
                p.eps
            )));
        }
        if sweep.flagged(i, j) {
            excluded.push(i);
        } else {
            xs.push(p.eps.ln());
            ys.push(mu.ln());
        }
    }
    if xs.len() < 5 {
        return Err(CoreError::Config(format!(
            "rate fit needs >= 5 usable points, have {} ({} excluded)",
            xs.len(),
            excluded.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        j,
        slope,
        intercept,
        r_squared,
        used_points: xs.len(),
        excluded,
    })
}

/// Bound reports for every ladder point and j in range, one kind at a time.
pub fn sweep_bound_reports(
    sweep: &SweepResult,
    kind: BoundKind,
    j_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<BoundReport>> {
    let mut out = Vec::new();
    for p in &sweep.points {
        for j in j_range.clone() {
            out.push(BoundReport::new(
                kind,
                sweep.n_dim,
                sweep.m,
                j,
                Some(p.eps),
                p.spectrum.eigenvalues[j - 1],
                &p.functionals,
            )?);
        }
    }
    Ok(out)
}

/// One row of the Neumann→Steklov comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteklovRow {
    pub eps: f64,
    pub j: usize,
    pub mu: f64,
    pub limit: f64,
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SteklovComparison {
    pub sigma: Vec<f64>,
    pub rows: Vec<SteklovRow>,
}

/// μ_j[ξ_ε] against the boundary-pencil eigenvalues σ_j for each ladder
/// point.
///
/// The strips of ξ_ε = ε + ε^{−1}χ_{ω_ε} deposit unit mass per unit
/// boundary area, so the concentration limit of the weighted form is the
/// plain trace form ∫_∂Ω uφ and μ_j[ξ_ε] → σ_j; the 1D string checks this
/// analytically (σ = {0, 2} and the two-point-mass limit gives exactly 2).
pub fn steklov_compare(
    domain: &Domain,
    m: usize,
    eps_ladder: &[f64],
    j_max: usize,
    elements: usize,
    degree: usize,
    seed: u64,
) -> Result<SteklovComparison> {
    if eps_ladder.is_empty() || eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CoreError::Config("eps ladder must be strictly decreasing".into()));
    }
    let h_max = (0..domain.dim())
        .map(|k| domain.edge(k) / elements as f64)
        .fold(0.0f64, f64::max);
    if eps_ladder.last().unwrap() / h_max < 4.0 - 1e-9 {
        return Err(CoreError::Config(
            "elements do not resolve the smallest strip with >= 4 cells".into(),
        ));
    }
    let space = DiscreteSpace::build(domain, m, elements, BoundaryCondition::Natural, degree)?;
    let stiff = space.assemble_stiffness();
    let trace = space.assemble_boundary_mass()?;
    let cfg = SolverConfig::for_domain(domain).with_seed(seed);
    let steklov = solve_steklov(&stiff, &trace, j_max, &cfg)?;
    let sigma = steklov.eigenvalues.clone();
    let mut rows = Vec::new();
    for &eps in eps_ladder {
        let rho = Density::steklov_family(domain, eps)?;
        let mass = space.assemble_mass(&rho);
        let spec = solve_generalized(&stiff, &mass.matrix, j_max, &cfg)?;
        for j in 1..=j_max {
            let mu = spec.eigenvalues[j - 1];
            let limit = sigma[j - 1];
            rows.push(SteklovRow {
                eps,
                j,
                mu,
                limit,
                gap: (mu - limit).abs(),
            });
        }
    }
    Ok(SteklovComparison { sigma, rows })
}

// ---------------------------------------------------------------------------
// Taylor remainder checks
// ---------------------------------------------------------------------------

/// Sample function with analytic derivatives, for the remainder quadrature.
pub struct SampleFunction {
    pub name: String,
    derivative: Box<dyn Fn(&[f64], &[usize]) -> f64 + Sync>,
    /// degree ≤ k polynomials have identically zero remainder
    pub poly_within_k: bool,
}

impl SampleFunction {
    fn value(&self, x: &[f64]) -> f64 {
        let zero = vec![0usize; x.len()];
        (self.derivative)(x, &zero)
    }

    fn deriv(&self, x: &[f64], alpha: &[usize]) -> f64 {
        (self.derivative)(x, alpha)
    }
}

fn monomial_sample(n: usize, power: usize, name: &str) -> SampleFunction {
    SampleFunction {
        name: name.to_string(),
        derivative: Box::new(move |x: &[f64], alpha: &[usize]| {
            if alpha[1..].iter().any(|&a| a > 0) || alpha[0] > power {
                return 0.0;
            }
            let mut v = 1.0;
            for t in 0..alpha[0] {
                v *= (power - t) as f64;
            }
            v * x[0].powi((power - alpha[0]) as i32)
        }),
        poly_within_k: false,
    }
    .with_dim(n)
}

impl SampleFunction {
    fn with_dim(self, _n: usize) -> Self {
        self
    }
}

fn sinusoid_sample(n: usize) -> SampleFunction {
    let q = [2.0f64, 1.7, 1.3];
    let phase = 0.3f64;
    SampleFunction {
        name: "sinusoid".to_string(),
        derivative: Box::new(move |x: &[f64], alpha: &[usize]| {
            let mut amp = 1.0;
            let mut order = 0usize;
            for k in 0..x.len() {
                amp *= q[k].powi(alpha[k] as i32);
                order += alpha[k];
            }
            let arg: f64 =
                x.iter().enumerate().map(|(k, v)| q[k] * v).sum::<f64>() + phase
                    + order as f64 * std::f64::consts::FRAC_PI_2;
            amp * arg.sin()
        }),
        poly_within_k: false,
    }
    .with_dim(n)
}

fn low_poly_sample(n: usize, k: usize) -> SampleFunction {
    SampleFunction {
        name: format!("poly_deg_{k}"),
        derivative: Box::new(move |x: &[f64], alpha: &[usize]| {
            // Σ_{t ≤ k} (1 + t) x_0^t
            if alpha[1..].iter().any(|&a| a > 0) {
                return 0.0;
            }
            let mut v = 0.0;
            for t in alpha[0]..=k {
                let mut c = 1.0 + t as f64;
                for s in 0..alpha[0] {
                    c *= (t - s) as f64;
                }
                v += c * x[0].powi((t - alpha[0]) as i32);
            }
            v
        }),
        poly_within_k: true,
    }
    .with_dim(n)
}

fn multi_indices_up_to(dim: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    loop {
        if cur.iter().sum::<usize>() <= k {
            out.push(cur.clone());
        }
        let mut i = 0;
        loop {
            cur[i] += 1;
            if cur[i] <= k {
                break;
            }
            cur[i] = 0;
            i += 1;
            if i == dim {
                return out;
            }
        }
    }
}

fn multi_indices_exact(dim: usize, m: usize) -> Vec<Vec<usize>> {
    multi_indices_up_to(dim, m)
        .into_iter()
        .filter(|a| a.iter().sum::<usize>() == m)
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// ∫_{B(0,ε)} |u − T_k u|² dx by radial×angular quadrature.
fn remainder_integral(f: &SampleFunction, n: usize, k: usize, eps: f64) -> f64 {
    let alphas = multi_indices_up_to(n, k);
    let zero = vec![0.0f64; n];
    let taylor_coeffs: Vec<(Vec<usize>, f64)> = alphas
        .iter()
        .map(|a| {
            let fact: f64 = a.iter().map(|&ai| factorial(ai)).product();
            (a.clone(), f.deriv(&zero, a) / fact)
        })
        .collect();
    let remainder = |x: &[f64]| -> f64 {
        let mut t = 0.0;
        for (a, c) in &taylor_coeffs {
            let mut mono = *c;
            for (kk, &ak) in a.iter().enumerate() {
                mono *= x[kk].powi(ak as i32);
            }
            t += mono;
        }
        let d = f.value(x) - t;
        d * d
    };
    let (rs, rw) = gauss_on_interval(32, 0.0, eps);
    match n {
        1 => {
            // both half-lines
            let mut v = 0.0;
            for (r, w) in rs.iter().zip(&rw) {
                v += w * (remainder(&[*r]) + remainder(&[-*r]));
            }
            v
        }
        2 => {
            let nt = 64usize;
            let dt = 2.0 * std::f64::consts::PI / nt as f64;
            let mut v = 0.0;
            for (r, w) in rs.iter().zip(&rw) {
                let mut ang = 0.0;
                for t in 0..nt {
                    let th = dt * t as f64;
                    ang += remainder(&[r * th.cos(), r * th.sin()]);
                }
                v += w * r * ang * dt;
            }
            v
        }
        3 => {
            let (cs, cw) = gauss_on_interval(16, -1.0, 1.0);
            let nt = 32usize;
            let dt = 2.0 * std::f64::consts::PI / nt as f64;
            let mut v = 0.0;
            for (r, w) in rs.iter().zip(&rw) {
                let mut shell = 0.0;
                for (c, wc) in cs.iter().zip(&cw) {
                    let s = (1.0 - c * c).max(0.0).sqrt();
                    for t in 0..nt {
                        let th = dt * t as f64;
                        shell +=
                            wc * remainder(&[r * s * th.cos(), r * s * th.sin(), r * c]) * dt;
                    }
                }
                v += w * r * r * shell;
            }
            v
        }
        _ => unreachable!(),
    }
}

/// ‖u‖²_{H^m(Ω)} = ∫_Ω |D^m u|² + u² over the centered unit box.
fn hm_norm_sq(f: &SampleFunction, domain: &Domain, m: usize) -> f64 {
    let n = domain.dim();
    let alphas = multi_indices_exact(n, m);
    let q = 16usize;
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|k| {
            let b = domain.bounds()[k];
            gauss_on_interval(q, b[0], b[1])
        })
        .collect();
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    let mut x = vec![0.0f64; n];
    loop {
        let mut w = 1.0;
        for k in 0..n {
            w *= rules[k].1[idx[k]];
            x[k] = rules[k].0[idx[k]];
        }
        let u = f.value(&x);
        let mut dsq = 0.0;
        for a in &alphas {
            let d = f.deriv(&x, a);
            dsq += d * d;
        }
        total += w * (dsq + u * u);
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < q {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == n {
                return total;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorRow {
    pub function: String,
    pub eps: f64,
    pub remainder: f64,
    pub bound_value: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct TaylorReport {
    pub n_dim: usize,
    pub m: usize,
    pub k: usize,
    pub odd_case: bool,
    pub rows: Vec<TaylorRow>,
    /// Largest remainder seen for the degree ≤ k polynomial (exactness).
    pub poly_exactness: f64,
}

impl TaylorReport {
    /// max/min of the ratio across the ladder, per non-polynomial function.
    pub fn ratio_spreads(&self) -> Vec<(String, f64)> {
        let mut names: Vec<String> = self.rows.iter().map(|r| r.function.clone()).collect();
        names.sort();
        names.dedup();
        let mut out = Vec::new();
        for name in names {
            let ratios: Vec<f64> = self
                .rows
                .iter()
                .filter(|r| r.function == name && r.ratio > 0.0)
                .map(|r| r.ratio)
                .collect();
            if ratios.is_empty() {
                continue;
            }
            let maxr = ratios.iter().cloned().fold(0.0f64, f64::max);
            let minr = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            out.push((name, maxr / minr));
        }
        out
    }
}

/// Remainder-vs-bound ratios for the Taylor lemma: the odd case requires
/// N = 2m−2k−1, the even case N = 2m−2k−2; ratios should stay bounded
/// across the ladder.
pub fn taylor_remainder_check(m: usize, n: usize, k: usize, eps_ladder: &[f64]) -> Result<TaylorReport> {
    let odd_case = n + 2 * k + 1 == 2 * m;
    let even_case = n + 2 * k + 2 == 2 * m;
    if !(odd_case || even_case) {
        return Err(CoreError::Config(format!(
            "(N, m, k) = ({n}, {m}, {k}) matches neither N = 2m−2k−1 nor N = 2m−2k−2"
        )));
    }
    if eps_ladder.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
        return Err(CoreError::Config(
            "ladder must keep B(0, ε) inside the centered unit box".into(),
        ));
    }
    let bounds = vec![[-0.5, 0.5]; n];
    let domain = Domain::new(&bounds)?;
    let panel = vec![
        monomial_sample(n, k + 1, &format!("monomial_x1^{}", k + 1)),
        sinusoid_sample(n),
        low_poly_sample(n, k),
    ];
    let mut rows = Vec::new();
    let mut poly_exactness = 0.0f64;
    for f in &panel {
        let norm = hm_norm_sq(f, &domain, m);
        for &eps in eps_ladder {
            let rem = remainder_integral(f, n, k, eps);
            if f.poly_within_k {
                poly_exactness = poly_exactness.max(rem);
                continue;
            }
            let bound_value = if odd_case {
                eps.powi(2 * m as i32) * norm
            } else {
                eps.powi(2 * m as i32) * (1.0 + eps.ln().abs()) * norm
            };
            rows.push(TaylorRow {
                function: f.name.clone(),
                eps,
                remainder: rem,
                bound_value,
                ratio: rem / bound_value,
            });
        }
    }
    Ok(TaylorReport {
        n_dim: n,
        m,
        k,
        odd_case,
        rows,
        poly_exactness,
    })
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

fn sig(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

/// Sweep rows: eps, j, mu_j, mass, lp, sup.
pub fn emit_sweep(sweep: &SweepResult, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let mut s = String::from("eps,j,mu_j,mass,lp,sup\n");
            for p in &sweep.points {
                for j in 1..=sweep.eigen_count {
                    s.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        sig(p.eps),
                        j,
                        sig(p.spectrum.eigenvalues[j - 1]),
                        sig(p.functionals.mass),
                        sig(p.functionals.lp_integral),
                        sig(p.functionals.sup)
                    ));
                }
            }
            let path = dir.join("sweep.csv");
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = sweep
                .points
                .iter()
                .map(|p| {
                    json!({
                        "eps": p.eps,
                        "spectrum": p.spectrum.to_json(),
                        "mass": p.functionals.mass,
                        "lp": p.functionals.lp_integral,
                        "sup": p.functionals.sup,
                    })
                })
                .collect();
            let path = dir.join("sweep.json");
            write_file(&path, &serde_json::to_string_pretty(&rows)?)?;
            Ok(path)
        }
    }
}

/// Rate-fit rows: j, slope, intercept, r2.
pub fn emit_rate_fits(fits: &[RateFit], dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let mut s = String::from("j,slope,intercept,r2\n");
            for f in fits {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    f.j,
                    sig(f.slope),
                    sig(f.intercept),
                    sig(f.r_squared)
                ));
            }
            let path = dir.join("fits.csv");
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("fits.json");
            write_file(&path, &serde_json::to_string_pretty(fits)?)?;
            Ok(path)
        }
    }
}

/// Bound rows: kind, N, m, j, eps, mu_j, factor, ratio.
pub fn emit_bound_reports(
    reports: &[BoundReport],
    dir: &Path,
    format: OutputFormat,
) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let mut s = String::from("kind,N,m,j,eps,mu_j,factor,ratio\n");
            for r in reports {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    r.kind.label(),
                    r.n,
                    r.m,
                    r.j,
                    r.eps.map(sig).unwrap_or_default(),
                    sig(r.mu_j),
                    sig(r.factor),
                    sig(r.ratio)
                ));
            }
            let path = dir.join("bounds.csv");
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("bounds.json");
            write_file(&path, &serde_json::to_string_pretty(reports)?)?;
            Ok(path)
        }
    }
}

pub fn emit_spectrum(spec: &Spectrum, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let mut s = String::from("j,mu_j,residual\n");
            for (i, v) in spec.eigenvalues.iter().enumerate() {
                s.push_str(&format!("{},{},{}\n", i + 1, sig(*v), sig(spec.residual_norms[i])));
            }
            let path = dir.join("spectrum.csv");
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("spectrum.json");
            write_file(&path, &serde_json::to_string_pretty(&spec.to_json())?)?;
            Ok(path)
        }
    }
}

pub fn emit_decomposition(
    d: &crate::gny::Decomposition,
    dir: &Path,
) -> Result<PathBuf> {
    let path = dir.join("decomposition.json");
    write_file(&path, &serde_json::to_string_pretty(&d.to_json())?)?;
    Ok(path)
}

pub fn emit_steklov(table: &SteklovComparison, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let mut s = String::from("eps,j,mu,limit,gap\n");
            for r in &table.rows {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    sig(r.eps),
                    r.j,
                    sig(r.mu),
                    sig(r.limit),
                    sig(r.gap)
                ));
            }
            let path = dir.join("steklov.csv");
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("steklov.json");
            let v = json!({"sigma": table.sigma, "rows": table.rows});
            write_file(&path, &serde_json::to_string_pretty(&v)?)?;
            Ok(path)
        }
    }
}

pub fn emit_taylor(report: &TaylorReport, dir: &Path, format: OutputFormat) -> Result<PathBuf> {
    match format {
        OutputFormat::Csv => {
            let mut s = String::from("function,eps,remainder,bound,ratio\n");
            for r in &report.rows {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.function,
                    sig(r.eps),
                    sig(r.remainder),
                    sig(r.bound_value),
                    sig(r.ratio)
                ));
            }
            let path = dir.join("taylor.csv");
            write_file(&path, &s)?;
            Ok(path)
        }
        OutputFormat::Json => {
            let path = dir.join("taylor.json");
            let v = json!({
                "n": report.n_dim, "m": report.m, "k": report.k,
                "odd_case": report.odd_case,
                "poly_exactness": report.poly_exactness,
                "rows": report.rows,
            });
            write_file(&path, &serde_json::to_string_pretty(&v)?)?;
            Ok(path)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny_sweep_config() -> ExperimentConfig {
        ExperimentConfig {
            domain: Domain::unit_interval(),
            m: 1,
            family: DensityFamily::Constant { value: 1.0 },
            eps_ladder: vec![0.1, 0.05, 0.03, 0.02, 0.015, 0.0125],
            elements: 32,
            degree: None,
            eigen_count: 3,
            seed: 7,
            bound_kinds: vec![],
            rate_targets: vec![],
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_sweep_config();
        cfg.validate().unwrap();
        cfg.eps_ladder = vec![0.1, 0.1];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_sweep_config();
        cfg.family = DensityFamily::PointConcentration {
            delta: 0.1,
            center: vec![0.5],
        };
        cfg.eps_ladder = vec![0.1, 0.001];
        assert!(cfg.validate().is_err(), "ball must span >= 4 cells");
    }

    #[test]
    fn constant_sweep_has_flat_rate() {
        let cfg = tiny_sweep_config();
        let sweep = run_sweep(&cfg).unwrap();
        // identical spectra at every eps
        let first = &sweep.points[0].spectrum.eigenvalues;
        for p in &sweep.points[1..] {
            for j in 1..=3 {
                assert_relative_eq!(
                    p.spectrum.eigenvalues[j - 1],
                    first[j - 1],
                    max_relative = 1e-9,
                    epsilon = 1e-12
                );
            }
        }
        let fit = fit_rate(&sweep, 2).unwrap();
        assert!(fit.slope.abs() < 1e-6, "slope {}", fit.slope);
        assert_eq!(fit.used_points, 6);
    }

    #[test]
    fn rate_fit_recovers_synthetic_power_law() {
        // hand-build a sweep whose μ_2 follows ε^{-0.9} exactly
        let cfg = tiny_sweep_config();
        let mut sweep = run_sweep(&cfg).unwrap();
        for p in &mut sweep.points {
            let mu = p.eps.powf(-0.9) * 3.0;
            p.spectrum.eigenvalues[1] = mu;
            p.coarse_spectrum.eigenvalues[1] = mu * 1.001;
        }
        let fit = fit_rate(&sweep, 2).unwrap();
        assert_relative_eq!(fit.slope, -0.9, epsilon = 1e-10);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn flagged_points_are_excluded() {
        let cfg = tiny_sweep_config();
        let mut sweep = run_sweep(&cfg).unwrap();
        for (i, p) in sweep.points.iter_mut().enumerate() {
            let mu = p.eps.powf(-1.0);
            p.spectrum.eigenvalues[1] = mu;
            p.coarse_spectrum.eigenvalues[1] = if i == 2 { mu * 1.5 } else { mu };
        }
        let fit = fit_rate(&sweep, 2).unwrap();
        assert_eq!(fit.excluded, vec![2]);
        assert_eq!(fit.used_points, 5);
        assert_relative_eq!(fit.slope, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn taylor_hypothesis_enforced_and_poly_exact() {
        assert!(taylor_remainder_check(1, 2, 0, &[0.1]).is_err());
        let rep = taylor_remainder_check(1, 1, 0, &[0.1, 0.05, 0.01]).unwrap();
        assert!(rep.odd_case);
        assert!(rep.poly_exactness < 1e-20, "{}", rep.poly_exactness);
        for (name, spread) in rep.ratio_spreads() {
            assert!(spread < 10.0, "{name}: spread {spread}");
        }
    }

    #[test]
    fn deterministic_csv_output() {
        let cfg = tiny_sweep_config();
        let dir1 = std::env::temp_dir().join("polyharm_det_a");
        let dir2 = std::env::temp_dir().join("polyharm_det_b");
        let s1 = run_sweep(&cfg).unwrap();
        let s2 = run_sweep(&cfg).unwrap();
        let p1 = emit_sweep(&s1, &dir1, OutputFormat::Csv).unwrap();
        let p2 = emit_sweep(&s2, &dir2, OutputFormat::Csv).unwrap();
        let a = std::fs::read(&p1).unwrap();
        let b = std::fs::read(&p2).unwrap();
        assert_eq!(a, b, "identical configs must emit byte-identical CSV");
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("eps,j,mu_j,mass,lp,sup\n"));
    }

    #[test]
    fn density_spec_roundtrip() {
        let spec = DensitySpec::PointConcentration {
            eps: 0.05,
            delta: 0.1,
            center: vec![0.5, 0.5],
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"kind\":\"point_concentration\""));
        let back: DensitySpec = serde_json::from_str(&s).unwrap();
        assert_eq!(spec, back);
        let dom = Domain::unit_square();
        let rho = back.build(&dom, 1).unwrap();
        assert!(rho.mass(&dom) > 0.0);
    }

    #[test]
    fn steklov_compare_string() {
        let dom = Domain::unit_interval();
        let table = steklov_compare(&dom, 1, &[0.05, 0.025], 2, 256, 2, 7).unwrap();
        assert!(table.sigma[0].abs() < 1e-9);
        assert_relative_eq!(table.sigma[1], 2.0, max_relative = 1e-6);
        // gaps shrink as eps halves
        let gaps: Vec<f64> = table.rows.iter().filter(|r| r.j == 2).map(|r| r.gap).collect();
        let mus: Vec<f64> = table.rows.iter().filter(|r| r.j == 2).map(|r| r.mu).collect();
        assert!(gaps[1] < gaps[0], "gaps {gaps:?} mus {mus:?}");
    }
}
