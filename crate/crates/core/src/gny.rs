//! Decomposition of the weighted measure space (Ω, |·|, ρ dx) into j regions
//! with comparable measure and pairwise disjoint doubles.
//!
//! The existence theorem this mirrors is non-constructive; what downstream
//! estimates consume is only the conclusion (measure lower bound, disjoint
//! doubles, radius estimate), so the decomposition here is a deterministic
//! greedy search over a sample grid, and [`verify`] re-checks every clause of
//! the conclusion on the result.

use serde_json::json;

use crate::bumps::AnnularRegion;
use crate::density::{Density, Weight};
use crate::error::{CoreError, Result};
use crate::geometry::{unit_ball_volume, Annulus, Ball, Domain};

/// Discrete measure: grid midpoints weighted by cell volume × ρ.
#[derive(Debug, Clone)]
pub struct MeasureSpace {
    dim: usize,
    domain: Domain,
    points: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
    max_density: f64,
    min_cell_edge: f64,
}

impl MeasureSpace {
    pub fn from_density(domain: &Domain, rho: &Density, resolution: usize) -> Self {
        let dim = domain.dim();
        let counts = vec![resolution; dim];
        let cell_vol: f64 = (0..dim)
            .map(|k| domain.edge(k) / resolution as f64)
            .product();
        let min_cell_edge = (0..dim)
            .map(|k| domain.edge(k) / resolution as f64)
            .fold(f64::INFINITY, f64::min);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut max_density = 0.0f64;
        let mut idx = vec![0usize; dim];
        loop {
            let mut x = vec![0.0; dim];
            for k in 0..dim {
                let h = domain.edge(k) / resolution as f64;
                x[k] = domain.bounds()[k][0] + (idx[k] as f64 + 0.5) * h;
            }
            let v = rho.value(&x);
            max_density = max_density.max(v);
            points.extend_from_slice(&x);
            weights.push(cell_vol * v);
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == dim {
                    let total = weights.iter().sum();
                    return MeasureSpace {
                        dim,
                        domain: domain.clone(),
                        points,
                        weights,
                        total,
                        max_density,
                        min_cell_edge,
                    };
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Max sampled density; a lower approximation of the true sup.
    pub fn max_density(&self) -> f64 {
        self.max_density
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn distance(&self, i: usize, center: &[f64]) -> f64 {
        self.point(i)
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Original measure of a region.
    pub fn measure_of(&self, region: &AnnularRegion) -> f64 {
        let (ri, ro) = region.radii();
        let c = region.center();
        (0..self.len())
            .map(|i| {
                let d = self.distance(i, c);
                if d > ri && d < ro {
                    self.weights[i]
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Grid measure of the doubled region intersected with Ω.
    pub fn doubled_volume(&self, region: &AnnularRegion) -> f64 {
        let (ri, ro) = region.radii();
        let c = region.center();
        let cell_vol = self.total_cell_volume();
        (0..self.len())
            .filter(|&i| {
                let d = self.distance(i, c);
                d > ri / 2.0 && d < 2.0 * ro
            })
            .count() as f64
            * cell_vol
    }

    fn total_cell_volume(&self) -> f64 {
        self.domain.volume() / self.len() as f64
    }
}

/// Result of the greedy decomposition.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub regions: Vec<AnnularRegion>,
    pub measures: Vec<f64>,
    /// min_i ν(A_i) · j / ν(X); empirical, not a theorem constant.
    pub c_emp: f64,
    pub disjointness_certified: bool,
    /// θ the greedy finally ran with.
    pub theta_used: f64,
}

impl Decomposition {
    pub fn to_json(&self) -> serde_json::Value {
        let regions: Vec<serde_json::Value> = self
            .regions
            .iter()
            .map(|r| {
                let (ri, ro) = r.radii();
                json!({"center": r.center(), "inner_radius": ri, "outer_radius": ro})
            })
            .collect();
        json!({
            "regions": regions,
            "measures": self.measures,
            "c_emp": self.c_emp,
            "theta": self.theta_used,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DecomposeOptions {
    /// Target fraction θ: each region must capture ≥ θ·ν(X)/j.
    pub theta0: f64,
    /// Give up when θ halves below this.
    pub theta_floor: f64,
    /// Build 2j regions and keep the j whose doubles have the smallest
    /// volume (the |2A| ≤ |Ω|/j selection).
    pub volume_filter: bool,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            theta0: 0.5,
            theta_floor: 0.004,
            volume_filter: false,
        }
    }
}

struct Candidate {
    inner: f64,
    outer: f64,
    point: usize,
}

/// Greedy annuli decomposition: repeatedly pick the center whose smallest
/// admissible ball (or blocker-swallowing annulus) captures the target
/// fraction of the remaining measure, claim its double, repeat; on failure
/// restart with θ halved.
pub fn decompose(ms: &MeasureSpace, j: usize, opts: DecomposeOptions) -> Result<Decomposition> {
    if j < 1 {
        return Err(CoreError::Decomposition("j must be >= 1".into()));
    }
    let count = if opts.volume_filter { 2 * j } else { j };
    let mut theta = opts.theta0;
    let mut best_partial: Option<(usize, f64)> = None;
    while theta >= opts.theta_floor {
        match try_decompose(ms, count, theta) {
            Ok(mut regions) => {
                if opts.volume_filter {
                    let mut vols: Vec<(f64, usize)> = regions
                        .iter()
                        .enumerate()
                        .map(|(i, r)| (ms.doubled_volume(r), i))
                        .collect();
                    vols.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let keep: Vec<usize> = vols.iter().take(j).map(|&(_, i)| i).collect();
                    regions = keep.iter().map(|&i| regions[i].clone()).collect();
                }
                let measures: Vec<f64> = regions.iter().map(|r| ms.measure_of(r)).collect();
                let c_emp = measures
                    .iter()
                    .map(|&nu| nu * j as f64 / ms.total())
                    .fold(f64::INFINITY, f64::min);
                return Ok(Decomposition {
                    regions,
                    measures,
                    c_emp,
                    disjointness_certified: true,
                    theta_used: theta,
                });
            }
            Err(placed) => {
                let frac = placed as f64 * theta / count as f64;
                if best_partial.map(|(p, _)| placed > p).unwrap_or(true) {
                    best_partial = Some((placed, frac));
                }
                theta /= 2.0;
            }
        }
    }
    let (placed, frac) = best_partial.unwrap_or((0, 0.0));
    Err(CoreError::Decomposition(format!(
        "could not place {count} regions; best attempt placed {placed} (c_emp ≈ {frac:.3e})"
    )))
}

/// One greedy pass at a fixed θ; Err carries the number of regions placed.
fn try_decompose(
    ms: &MeasureSpace,
    count: usize,
    theta: f64,
) -> std::result::Result<Vec<AnnularRegion>, usize> {
    let target = theta * ms.total() / count as f64;
    let mut remaining = ms.weights.clone();
    let mut claimed: Vec<AnnularRegion> = Vec::new();
    let bin = ms.min_cell_edge / 2.0;
    for placed in 0..count {
        let mut best: Option<Candidate> = None;
        for pi in 0..ms.len() {
            if let Some(c) = best_region_at(ms, pi, &remaining, &claimed, target, bin) {
                let better = match &best {
                    None => true,
                    Some(b) => c.outer < b.outer - 1e-15,
                };
                if better {
                    best = Some(c);
                }
            }
        }
        let Some(win) = best else {
            return Err(placed);
        };
        let center = ms.point(win.point).to_vec();
        let region = if win.inner > 0.0 {
            AnnularRegion::Annulus(
                Annulus::new(center.clone(), win.inner, win.outer).expect("validated radii"),
            )
        } else {
            AnnularRegion::Ball(Ball::new(center.clone(), win.outer).expect("positive radius"))
        };
        // claim the doubled region's measure
        let (ri, ro) = region.radii();
        for i in 0..ms.len() {
            let d = ms.distance(i, &center);
            if d > ri / 2.0 && d < 2.0 * ro {
                remaining[i] = 0.0;
            }
        }
        claimed.push(region);
    }
    Ok(claimed)
}

/// The smallest admissible region centred at grid point `pi` capturing
/// `target` remaining measure, subject to its double avoiding all claimed
/// doubles (either by staying clear of them or by swallowing a nested prefix
/// into the hole).
fn best_region_at(
    ms: &MeasureSpace,
    pi: usize,
    remaining: &[f64],
    claimed: &[AnnularRegion],
    target: f64,
    bin: f64,
) -> Option<Candidate> {
    let center = ms.point(pi);
    // blocker shells as distance intervals from this center
    let mut shells: Vec<(f64, f64)> = Vec::with_capacity(claimed.len());
    for reg in claimed {
        let (ri, ro) = reg.radii();
        let (hole, outer) = (ri / 2.0, 2.0 * ro);
        let dc = ms.distance(pi, reg.center());
        let (dmin, dmax) = if dc < hole {
            (hole - dc, dc + outer)
        } else if dc > outer {
            (dc - outer, dc + outer)
        } else {
            return None; // center sits inside a claimed double
        };
        shells.push((dmin, dmax));
    }
    shells.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());

    // radial histogram of the remaining measure
    let diameter: f64 = (0..ms.domain.dim())
        .map(|k| ms.domain.edge(k).powi(2))
        .sum::<f64>()
        .sqrt();
    let nbins = (diameter / bin).ceil() as usize + 2;
    let mut hist = vec![0.0f64; nbins];
    for i in 0..ms.len() {
        if remaining[i] > 0.0 {
            let d = ms.distance(i, center);
            let b = ((d / bin) as usize).min(nbins - 1);
            hist[b] += remaining[i];
        }
    }
    let mut cum = vec![0.0f64; nbins + 1];
    for b in 0..nbins {
        cum[b + 1] = cum[b] + hist[b];
    }
    // cum_at(r): all measure with distance < r, up to bin resolution
    let cum_at = |r: f64| -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let b = ((r / bin) as usize).min(nbins);
        cum[b]
    };

    let mut best: Option<Candidate> = None;
    for swallowed in 0..=shells.len() {
        let inner = if swallowed == 0 {
            0.0
        } else {
            2.0 * shells[swallowed - 1].1
        };
        let outer_cap = shells[swallowed..]
            .iter()
            .map(|s| s.0)
            .fold(f64::INFINITY, f64::min)
            / 2.0;
        if inner >= outer_cap {
            continue;
        }
        let base = cum_at(inner);
        // smallest bin edge where the annulus {inner < d < r} reaches target
        let start = (inner / bin).ceil() as usize + 1;
        let mut found = None;
        for b in start..=nbins {
            let r = b as f64 * bin;
            if r > outer_cap {
                break;
            }
            if cum[b.min(nbins)] - base >= target {
                found = Some(r);
                break;
            }
        }
        if let Some(r) = found {
            let better = match &best {
                None => true,
                Some(bst) => r < bst.outer - 1e-15,
            };
            if better {
                best = Some(Candidate {
                    inner,
                    outer: r,
                    point: pi,
                });
            }
        }
    }
    best
}

/// Lower bound on admissible inner radii: ½·inf{r : V(r) ≥ c·ν(X)/j}, where
/// V(r) = sup over grid points of ν(B(x, r)).
pub fn inner_radius_bound(ms: &MeasureSpace, j: usize, c: f64) -> f64 {
    let v_target = c * ms.total() / j as f64;
    let bin = ms.min_cell_edge / 2.0;
    let diameter: f64 = (0..ms.domain.dim())
        .map(|k| ms.domain.edge(k).powi(2))
        .sum::<f64>()
        .sqrt();
    let nbins = (diameter / bin).ceil() as usize + 2;
    let mut best = f64::INFINITY;
    for pi in 0..ms.len() {
        let center = ms.point(pi);
        let mut hist = vec![0.0f64; nbins];
        for i in 0..ms.len() {
            let d = ms.distance(i, center);
            let b = ((d / bin) as usize).min(nbins - 1);
            hist[b] += ms.weights[i];
        }
        let mut acc = 0.0;
        for (b, h) in hist.iter().enumerate() {
            acc += h;
            if acc >= v_target {
                best = best.min((b + 1) as f64 * bin);
                break;
            }
        }
    }
    best / 2.0
}

/// Per-clause verification report for a decomposition.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub doubles_disjoint: bool,
    pub measures_ok: bool,
    pub radius_estimate_ok: bool,
    pub recomputed_measures: Vec<f64>,
    pub recomputed_c_emp: f64,
    /// r_i^N · (2^{N+1} j ω_N ‖ρ‖∞) / (c_emp ∫ρ) per region; ≥ 1 passes.
    pub radius_margins: Vec<f64>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.doubles_disjoint && self.measures_ok && self.radius_estimate_ok
    }
}

/// Recompute disjointness, measures, c_emp and the radius estimate.
pub fn verify(d: &Decomposition, ms: &MeasureSpace, j: usize) -> VerifyReport {
    let mut disjoint = true;
    for a in 0..d.regions.len() {
        for b in a + 1..d.regions.len() {
            if !doubled_disjoint(&d.regions[a], &d.regions[b]) {
                disjoint = false;
            }
        }
    }
    let recomputed: Vec<f64> = d.regions.iter().map(|r| ms.measure_of(r)).collect();
    let floor = d.c_emp * ms.total() / j as f64;
    let measures_ok = !recomputed.is_empty()
        && recomputed.iter().all(|&nu| nu >= floor * (1.0 - 1e-9) && nu > 0.0);
    let n = ms.domain().dim();
    let rhs = d.c_emp * ms.total()
        / (2.0f64.powi(n as i32 + 1) * j as f64 * unit_ball_volume(n) * ms.max_density());
    let mut radius_margins = Vec::new();
    let mut radius_ok = true;
    for reg in &d.regions {
        let r = match reg {
            AnnularRegion::Ball(b) => b.radius,
            AnnularRegion::Annulus(a) => a.inner,
        };
        let margin = r.powi(n as i32) / rhs;
        radius_margins.push(margin);
        if margin < 1.0 {
            radius_ok = false;
        }
    }
    let c_emp = recomputed
        .iter()
        .map(|&nu| nu * j as f64 / ms.total())
        .fold(f64::INFINITY, f64::min);
    VerifyReport {
        doubles_disjoint: disjoint,
        measures_ok,
        radius_estimate_ok: radius_ok,
        recomputed_measures: recomputed,
        recomputed_c_emp: c_emp,
        radius_margins,
    }
}

fn doubled_disjoint(a: &AnnularRegion, b: &AnnularRegion) -> bool {
    let (r1, o1) = a.radii();
    let (r2, o2) = b.radii();
    let (h1, d1) = (r1 / 2.0, 2.0 * o1);
    let (h2, d2) = (r2 / 2.0, 2.0 * o2);
    let dist: f64 = a
        .center()
        .iter()
        .zip(b.center())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    dist >= d1 + d2 || dist + d1 <= h2 || dist + d2 <= h1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_square(res: usize) -> MeasureSpace {
        let dom = Domain::unit_square();
        let rho = Density::constant(1.0).unwrap();
        MeasureSpace::from_density(&dom, &rho, res)
    }

    #[test]
    fn measure_space_total() {
        let ms = uniform_square(32);
        assert!((ms.total() - 1.0).abs() < 1e-12);
        assert_eq!(ms.len(), 32 * 32);
    }

    #[test]
    fn single_region_captures_everything_uniform() {
        let ms = uniform_square(24);
        let d = decompose(&ms, 1, DecomposeOptions::default()).unwrap();
        assert_eq!(d.regions.len(), 1);
        // j=1: one ball holding at least θ of the mass; c_emp = ν(A)·1/ν(X)
        assert!(d.c_emp >= d.theta_used * (1.0 - 1e-9));
        let rep = verify(&d, &ms, 1);
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn four_regions_on_uniform_square() {
        let ms = uniform_square(32);
        let d = decompose(&ms, 4, DecomposeOptions::default()).unwrap();
        assert_eq!(d.regions.len(), 4);
        assert!(d.c_emp > 0.0);
        let rep = verify(&d, &ms, 4);
        assert!(rep.all_pass(), "{rep:?}");
    }

    #[test]
    fn point_concentration_two_regions() {
        let dom = Domain::unit_square();
        let rho = Density::point_concentration(&dom, 1, 0.08, 0.1, vec![0.5, 0.5]).unwrap();
        let ms = MeasureSpace::from_density(&dom, &rho, 48);
        let d = decompose(&ms, 2, DecomposeOptions::default()).unwrap();
        let rep = verify(&d, &ms, 2);
        assert!(rep.all_pass(), "{rep:?}");
        // the greedy grabs the concentration first: smallest capturing ball
        // sits at the spike
        let first = &d.regions[0];
        let off: f64 = first
            .center()
            .iter()
            .zip(&[0.5, 0.5])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(off < 0.1, "first center {:?}", first.center());
        for (i, nu) in d.measures.iter().enumerate() {
            assert!(
                *nu >= d.c_emp * ms.total() / 2.0 * (1.0 - 1e-9),
                "region {i}: ν = {nu}"
            );
        }
    }

    #[test]
    fn volume_filter_keeps_small_doubles() {
        let ms = uniform_square(32);
        let opts = DecomposeOptions {
            volume_filter: true,
            ..Default::default()
        };
        let d = decompose(&ms, 2, opts).unwrap();
        assert_eq!(d.regions.len(), 2);
        for reg in &d.regions {
            assert!(ms.doubled_volume(reg) <= ms.domain().volume() / 2.0 + 1e-9);
        }
        assert!(verify(&d, &ms, 2).all_pass());
    }

    #[test]
    fn verify_flags_bad_inputs() {
        let ms = uniform_square(16);
        let overlapping = Decomposition {
            regions: vec![
                AnnularRegion::Ball(Ball::new(vec![0.45, 0.5], 0.2).unwrap()),
                AnnularRegion::Ball(Ball::new(vec![0.55, 0.5], 0.2).unwrap()),
            ],
            measures: vec![0.1, 0.1],
            c_emp: 0.1,
            disjointness_certified: false,
            theta_used: 0.5,
        };
        let rep = verify(&overlapping, &ms, 2);
        assert!(!rep.doubles_disjoint);

        let empty_measure = Decomposition {
            regions: vec![AnnularRegion::Annulus(
                Annulus::new(vec![0.5, 0.5], 0.0001, 0.0002).unwrap(),
            )],
            measures: vec![0.0],
            c_emp: 0.5,
            disjointness_certified: true,
            theta_used: 0.5,
        };
        let rep = verify(&empty_measure, &ms, 1);
        assert!(!rep.measures_ok);
    }

    #[test]
    fn inner_radius_bound_matches_uniform_closed_form() {
        // uniform density H on a big domain: V(r) = ω_N r² H away from ∂Ω,
        // so the bound is ½ (v_j / (ω_N H))^{1/N}
        let dom = Domain::new(&[[0.0, 4.0], [0.0, 4.0]]).unwrap();
        let rho = Density::constant(1.0).unwrap();
        let ms = MeasureSpace::from_density(&dom, &rho, 96);
        let j = 8;
        let c = 0.5;
        let bound = inner_radius_bound(&ms, j, c);
        let v_j = c * ms.total() / j as f64;
        let expect = 0.5 * (v_j / unit_ball_volume(2)).sqrt();
        assert!(
            (bound - expect).abs() < 0.1 * expect,
            "bound {bound} vs closed form {expect}"
        );
    }

    #[test]
    fn decompose_is_deterministic() {
        let dom = Domain::unit_square();
        let rho = Density::boundary_strip_weyl(&dom, 1, 0.1).unwrap();
        let ms = MeasureSpace::from_density(&dom, &rho, 40);
        let a = decompose(&ms, 3, DecomposeOptions::default()).unwrap();
        let b = decompose(&ms, 3, DecomposeOptions::default()).unwrap();
        assert_eq!(a.measures, b.measures);
        assert_eq!(a.c_emp, b.c_emp);
        for (x, y) in a.regions.iter().zip(&b.regions) {
            assert_eq!(x.radii(), y.radii());
            assert_eq!(x.center(), y.center());
        }
    }
}
