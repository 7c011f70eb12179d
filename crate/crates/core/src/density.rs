//! Catalog of mass densities: the concentration families driving the
//! blow-up/decay experiments, plus constants and piecewise-constant weights.
//!
//! Every catalog variant is piecewise constant, so total mass, L^p integrals
//! and sup norms all have closed forms. Quadrature is only needed when a
//! density is fed to the assemblers, which subdivide cells crossed by an
//! interface.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::geometry::{unit_ball_volume, Ball, Domain};

/// A pointwise-evaluable weight for assembly and projection. `value` must be
/// callable at any point of the domain; `needs_subdivision` reports whether
/// the weight is non-smooth somewhere strictly inside the given cell.
pub trait Weight {
    fn value(&self, x: &[f64]) -> f64;

    fn needs_subdivision(&self, _cell_lo: &[f64], _cell_hi: &[f64]) -> bool {
        false
    }

    /// When every interface crossing the cell is an axis-aligned plane,
    /// returns the per-axis split positions strictly inside the cell; the
    /// weight is then constant on each sub-box and the assemblers integrate
    /// it exactly. `None` falls back to recursive subdivision.
    fn axis_interfaces(&self, _cell_lo: &[f64], _cell_hi: &[f64]) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Constant-one weight.
pub struct UnitWeight;

impl Weight for UnitWeight {
    fn value(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

impl<F: Fn(&[f64]) -> f64> Weight for F {
    fn value(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// Region kind admitted in piecewise-constant densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PieceRegion {
    /// Axis-aligned sub-box given by per-axis bounds.
    Boxed(Vec<[f64; 2]>),
    Ball(Ball),
}

impl PieceRegion {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            PieceRegion::Boxed(b) => (0..x.len()).all(|k| x[k] >= b[k][0] && x[k] < b[k][1]),
            PieceRegion::Ball(b) => b.contains(x),
        }
    }

    fn volume(&self, dim: usize) -> f64 {
        match self {
            PieceRegion::Boxed(b) => b.iter().map(|r| r[1] - r[0]).product(),
            PieceRegion::Ball(b) => b.volume(dim),
        }
    }

    fn disjoint_from(&self, other: &PieceRegion) -> bool {
        match (self, other) {
            (PieceRegion::Boxed(a), PieceRegion::Boxed(b)) => (0..a.len())
                .any(|k| a[k][1] <= b[k][0] || b[k][1] <= a[k][0]),
            (PieceRegion::Ball(a), PieceRegion::Ball(b)) => {
                let d: f64 = a
                    .center
                    .iter()
                    .zip(&b.center)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                d >= a.radius + b.radius
            }
            (PieceRegion::Boxed(bx), PieceRegion::Ball(bl))
            | (PieceRegion::Ball(bl), PieceRegion::Boxed(bx)) => {
                // distance from the ball center to the box
                let mut d2 = 0.0;
                for k in 0..bl.center.len() {
                    let c = bl.center[k];
                    let lo = bx[k][0];
                    let hi = bx[k][1];
                    let d = if c < lo {
                        lo - c
                    } else if c > hi {
                        c - hi
                    } else {
                        0.0
                    };
                    d2 += d * d;
                }
                d2.sqrt() >= bl.radius
            }
        }
    }

    /// min/max distance evaluation used by the cell-crossing test.
    fn crosses_cell(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            PieceRegion::Boxed(b) => {
                // crossed unless the cell is entirely inside or outside
                let inside = (0..lo.len()).all(|k| lo[k] >= b[k][0] && hi[k] <= b[k][1]);
                let outside =
                    (0..lo.len()).any(|k| hi[k] <= b[k][0] + 1e-14 || lo[k] >= b[k][1] - 1e-14);
                !(inside || outside)
            }
            PieceRegion::Ball(b) => ball_crosses_cell(b, lo, hi),
        }
    }
}

fn ball_crosses_cell(b: &Ball, lo: &[f64], hi: &[f64]) -> bool {
    let mut dmin2 = 0.0;
    let mut dmax2 = 0.0;
    for k in 0..b.center.len() {
        let c = b.center[k];
        let near = c.clamp(lo[k], hi[k]);
        dmin2 += (c - near) * (c - near);
        let far = if c - lo[k] > hi[k] - c { lo[k] } else { hi[k] };
        dmax2 += (c - far) * (c - far);
    }
    let r2 = b.radius * b.radius;
    dmin2 < r2 && dmax2 > r2
}

/// The L^p functional pair returned by [`Density::lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpNorm {
    /// (∫ ρ^p dx)^{1/p}
    pub norm: f64,
    /// ∫ ρ^p dx
    pub integral: f64,
}

/// Mass densities ρ ∈ R (bounded, ess-inf > 0) from the catalog.
///
/// The concentration variants depend on the operator order m because their
/// exponents do; strip-based variants carry the domain that defines the
/// boundary strip.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Constant {
        value: f64,
    },
    /// ρ_ε = ε^{2m−N−δ} + ε^{−N} χ_{B(center,ε)}
    PointConcentration {
        m: usize,
        eps: f64,
        delta: f64,
        center: Vec<f64>,
    },
    /// ρ̃_ε = 1 + ε^{−2m+δ} χ_{B(center,ε)} (the rescaled companion family)
    TildeConcentration {
        m: usize,
        eps: f64,
        delta: f64,
        center: Vec<f64>,
    },
    /// ε^{−2m/N} on the boundary strip ω_ε, ε^{2−2m/N} on the rest
    BoundaryStripWeyl {
        m: usize,
        eps: f64,
        domain: Domain,
    },
    /// ξ_ε = ε + ε^{−1} χ_{ω_ε}
    SteklovFamily {
        eps: f64,
        domain: Domain,
    },
    /// ε + Σ_i ε^{−N} χ_{B(center_i, ε)}
    MultiPoint {
        eps: f64,
        centers: Vec<Vec<f64>>,
    },
    /// First-match piecewise constant over disjoint regions with a default.
    PiecewiseConstant {
        default: f64,
        pieces: Vec<(PieceRegion, f64)>,
    },
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CoreError::Density(format!("eps must lie in (0,1), got {eps}")));
    }
    Ok(())
}

fn check_interior_ball(domain: &Domain, center: &[f64], eps: f64) -> Result<()> {
    let ball = Ball::new(center.to_vec(), eps)?;
    if !domain.contains_ball(&ball) {
        return Err(CoreError::Density(format!(
            "ball B({center:?}, {eps}) is not compactly contained in the domain"
        )));
    }
    Ok(())
}

impl Density {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(CoreError::Density(format!(
                "constant density must be positive, got {value}"
            )));
        }
        Ok(Density::Constant { value })
    }

    pub fn point_concentration(
        domain: &Domain,
        m: usize,
        eps: f64,
        delta: f64,
        center: Vec<f64>,
    ) -> Result<Self> {
        check_eps(eps)?;
        if !(delta > 0.0 && delta < 0.5) {
            return Err(CoreError::Density(format!(
                "delta must lie in (0, 1/2), got {delta}"
            )));
        }
        check_interior_ball(domain, &center, eps)?;
        Ok(Density::PointConcentration {
            m,
            eps,
            delta,
            center,
        })
    }

    pub fn tilde_concentration(
        domain: &Domain,
        m: usize,
        eps: f64,
        delta: f64,
        center: Vec<f64>,
    ) -> Result<Self> {
        check_eps(eps)?;
        if !(delta > 0.0 && delta < 0.5) {
            return Err(CoreError::Density(format!(
                "delta must lie in (0, 1/2), got {delta}"
            )));
        }
        check_interior_ball(domain, &center, eps)?;
        Ok(Density::TildeConcentration {
            m,
            eps,
            delta,
            center,
        })
    }

    pub fn boundary_strip_weyl(domain: &Domain, m: usize, eps: f64) -> Result<Self> {
        crate::geometry::BoundaryStrip::new(eps, domain)?;
        Ok(Density::BoundaryStripWeyl {
            m,
            eps,
            domain: domain.clone(),
        })
    }

    pub fn steklov_family(domain: &Domain, eps: f64) -> Result<Self> {
        crate::geometry::BoundaryStrip::new(eps, domain)?;
        Ok(Density::SteklovFamily {
            eps,
            domain: domain.clone(),
        })
    }

    pub fn multi_point(domain: &Domain, eps: f64, centers: Vec<Vec<f64>>) -> Result<Self> {
        check_eps(eps)?;
        if centers.is_empty() {
            return Err(CoreError::Density("multi-point needs >= 1 center".into()));
        }
        for c in &centers {
            check_interior_ball(domain, c, eps)?;
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let d: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if d < 2.0 * eps {
                    return Err(CoreError::Density(format!(
                        "multi-point balls {i} and {j} overlap (centers {d} apart, eps {eps})"
                    )));
                }
            }
        }
        Ok(Density::MultiPoint { eps, centers })
    }

    pub fn piecewise_constant(
        domain: &Domain,
        default: f64,
        pieces: Vec<(PieceRegion, f64)>,
    ) -> Result<Self> {
        if !(default > 0.0) || pieces.iter().any(|(_, v)| !(*v > 0.0)) {
            return Err(CoreError::Density(
                "piecewise-constant values must be positive".into(),
            ));
        }
        for (r, _) in &pieces {
            if let PieceRegion::Ball(b) = r {
                if !domain.contains_ball(b) {
                    return Err(CoreError::Density(
                        "piecewise-constant ball region truncated by the boundary".into(),
                    ));
                }
            }
        }
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                if !pieces[i].0.disjoint_from(&pieces[j].0) {
                    return Err(CoreError::Density(format!(
                        "piecewise-constant regions {i} and {j} overlap"
                    )));
                }
            }
        }
        Ok(Density::PiecewiseConstant { default, pieces })
    }

    fn dim_of_center(c: &[f64]) -> usize {
        c.len()
    }

    /// Exact pointwise value. Errors when x lies outside the domain.
    pub fn evaluate(&self, x: &[f64], domain: &Domain) -> Result<f64> {
        if !domain.contains(x) {
            return Err(CoreError::Density(format!("point {x:?} outside the domain")));
        }
        Ok(self.value_unchecked(x))
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Density::Constant { value } => *value,
            Density::PointConcentration {
                m,
                eps,
                delta,
                center,
            } => {
                let n = Self::dim_of_center(center) as f64;
                let bg = eps.powf(2.0 * *m as f64 - n - delta);
                if in_ball(center, *eps, x) {
                    bg + eps.powf(-n)
                } else {
                    bg
                }
            }
            Density::TildeConcentration {
                m,
                eps,
                delta,
                center,
            } => {
                if in_ball(center, *eps, x) {
                    1.0 + eps.powf(-2.0 * *m as f64 + delta)
                } else {
                    1.0
                }
            }
            Density::BoundaryStripWeyl { m, eps, domain } => {
                let n = domain.dim() as f64;
                if domain.boundary_distance(x) < *eps {
                    eps.powf(-2.0 * *m as f64 / n)
                } else {
                    eps.powf(2.0 - 2.0 * *m as f64 / n)
                }
            }
            Density::SteklovFamily { eps, domain } => {
                if domain.boundary_distance(x) < *eps {
                    eps + 1.0 / eps
                } else {
                    *eps
                }
            }
            Density::MultiPoint { eps, centers } => {
                let n = Self::dim_of_center(&centers[0]) as f64;
                let mut v = *eps;
                for c in centers {
                    if in_ball(c, *eps, x) {
                        v += eps.powf(-n);
                        break; // balls are disjoint
                    }
                }
                v
            }
            Density::PiecewiseConstant { default, pieces } => pieces
                .iter()
                .find(|(r, _)| r.contains(x))
                .map(|(_, v)| *v)
                .unwrap_or(*default),
        }
    }

    /// The piecewise values as (value, measure-of-piece) pairs; the closed
    /// forms for mass, L^p integrals and sup are all derived from this.
    fn value_layers(&self, domain: &Domain) -> Vec<(f64, f64)> {
        let n = domain.dim();
        let vol = domain.volume();
        match self {
            Density::Constant { value } => vec![(*value, vol)],
            Density::PointConcentration {
                m,
                eps,
                delta,
                center,
            } => {
                let nf = n as f64;
                let bg = eps.powf(2.0 * *m as f64 - nf - delta);
                let bv = unit_ball_volume(n) * eps.powi(n as i32);
                let _ = center;
                vec![(bg, vol - bv), (bg + eps.powf(-nf), bv)]
            }
            Density::TildeConcentration { m, eps, delta, .. } => {
                let bv = unit_ball_volume(n) * eps.powi(n as i32);
                vec![(1.0, vol - bv), (1.0 + eps.powf(-2.0 * *m as f64 + delta), bv)]
            }
            Density::BoundaryStripWeyl { m, eps, domain } => {
                let nf = n as f64;
                let sv = domain.strip_volume(*eps).expect("validated at construction");
                vec![
                    (eps.powf(-2.0 * *m as f64 / nf), sv),
                    (eps.powf(2.0 - 2.0 * *m as f64 / nf), vol - sv),
                ]
            }
            Density::SteklovFamily { eps, domain } => {
                let sv = domain.strip_volume(*eps).expect("validated at construction");
                vec![(eps + 1.0 / eps, sv), (*eps, vol - sv)]
            }
            Density::MultiPoint { eps, centers } => {
                let nf = n as f64;
                let bv = unit_ball_volume(n) * eps.powi(n as i32);
                let j = centers.len() as f64;
                vec![(*eps, vol - j * bv), (eps + eps.powf(-nf), j * bv)]
            }
            Density::PiecewiseConstant { default, pieces } => {
                let mut layers: Vec<(f64, f64)> = pieces
                    .iter()
                    .map(|(r, v)| (*v, r.volume(n)))
                    .collect();
                let covered: f64 = layers.iter().map(|(_, a)| a).sum();
                layers.push((*default, vol - covered));
                layers
            }
        }
    }

    /// Total mass ∫_Ω ρ dx, in closed form.
    pub fn mass(&self, domain: &Domain) -> f64 {
        self.value_layers(domain)
            .iter()
            .map(|(v, a)| v * a)
            .sum()
    }

    /// ∫_Ω ρ^p dx and its p-th root.
    pub fn lp_norm(&self, domain: &Domain, p: f64) -> LpNorm {
        assert!(p > 0.0);
        let integral: f64 = self
            .value_layers(domain)
            .iter()
            .map(|(v, a)| v.powf(p) * a)
            .sum();
        LpNorm {
            norm: integral.powf(1.0 / p),
            integral,
        }
    }

    /// ‖ρ‖_{L^∞(Ω)}: exact max of the piecewise values.
    pub fn sup_norm(&self, domain: &Domain) -> f64 {
        self.value_layers(domain)
            .iter()
            .filter(|(_, a)| *a > 0.0)
            .map(|(v, _)| *v)
            .fold(0.0, f64::max)
    }

    /// ess-inf: exact min of the piecewise values.
    pub fn min_value(&self, domain: &Domain) -> f64 {
        self.value_layers(domain)
            .iter()
            .filter(|(_, a)| *a > 0.0)
            .map(|(v, _)| *v)
            .fold(f64::INFINITY, f64::min)
    }

    /// Reference quadrature of the mass on a subdivided midpoint grid; used
    /// to cross-check the closed forms.
    pub fn mass_quadrature(&self, domain: &Domain, resolution: usize) -> f64 {
        let n = domain.dim();
        let counts = vec![resolution; n];
        let mut total = 0.0;
        let cell_vol: f64 = (0..n)
            .map(|k| domain.edge(k) / resolution as f64)
            .product();
        let mut idx = vec![0usize; n];
        loop {
            let mut lo = vec![0.0; n];
            let mut hi = vec![0.0; n];
            for k in 0..n {
                let h = domain.edge(k) / resolution as f64;
                lo[k] = domain.bounds()[k][0] + idx[k] as f64 * h;
                hi[k] = lo[k] + h;
            }
            // only interface-crossed cells recurse, so the deep limit is cheap
            total += self.cell_mass_recursive(&lo, &hi, cell_vol, 14);
            // advance
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < counts[k] {
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

    /// Exact cell mass for variants whose interfaces are axis-aligned.
    fn cell_mass_exact(&self, lo: &[f64], hi: &[f64], vol: f64) -> Option<f64> {
        fn box_overlap(lo: &[f64], hi: &[f64], b: &[[f64; 2]]) -> f64 {
            let mut v = 1.0;
            for k in 0..lo.len() {
                let w = (hi[k].min(b[k][1]) - lo[k].max(b[k][0])).max(0.0);
                v *= w;
            }
            v
        }
        match self {
            Density::Constant { value } => Some(value * vol),
            Density::BoundaryStripWeyl { eps, domain, .. }
            | Density::SteklovFamily { eps, domain } => {
                let inner: Vec<[f64; 2]> = domain
                    .bounds()
                    .iter()
                    .map(|b| [b[0] + eps, b[1] - eps])
                    .collect();
                let vol_inner = box_overlap(lo, hi, &inner);
                let (v_strip, v_core) = match self {
                    Density::BoundaryStripWeyl { m, eps, domain } => {
                        let n = domain.dim() as f64;
                        (
                            eps.powf(-2.0 * *m as f64 / n),
                            eps.powf(2.0 - 2.0 * *m as f64 / n),
                        )
                    }
                    Density::SteklovFamily { eps, .. } => (eps + 1.0 / eps, *eps),
                    _ => unreachable!(),
                };
                Some(v_strip * (vol - vol_inner) + v_core * vol_inner)
            }
            Density::PiecewiseConstant { default, pieces }
                if pieces
                    .iter()
                    .all(|(r, _)| matches!(r, PieceRegion::Boxed(_))) =>
            {
                let mut total = default * vol;
                for (r, v) in pieces {
                    if let PieceRegion::Boxed(b) = r {
                        total += (v - default) * box_overlap(lo, hi, b);
                    }
                }
                Some(total)
            }
            _ => None,
        }
    }

    fn cell_mass_recursive(&self, lo: &[f64], hi: &[f64], vol: f64, depth: usize) -> f64 {
        if let Some(exact) = self.cell_mass_exact(lo, hi, vol) {
            return exact;
        }
        if depth == 0 || !self.needs_subdivision(lo, hi) {
            let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
            return vol * self.value_unchecked(&mid);
        }
        let n = lo.len();
        let mut total = 0.0;
        for corner in 0..(1usize << n) {
            let mut clo = vec![0.0; n];
            let mut chi = vec![0.0; n];
            for k in 0..n {
                let mid = 0.5 * (lo[k] + hi[k]);
                if corner >> k & 1 == 0 {
                    clo[k] = lo[k];
                    chi[k] = mid;
                } else {
                    clo[k] = mid;
                    chi[k] = hi[k];
                }
            }
            total += self.cell_mass_recursive(&clo, &chi, vol / (1 << n) as f64, depth - 1);
        }
        total
    }
}

fn in_ball(center: &[f64], radius: f64, x: &[f64]) -> bool {
    let d2: f64 = center
        .iter()
        .zip(x)
        .map(|(c, v)| (c - v) * (c - v))
        .sum();
    d2 < radius * radius
}

impl Weight for Density {
    fn value(&self, x: &[f64]) -> f64 {
        self.value_unchecked(x)
    }

    fn needs_subdivision(&self, lo: &[f64], hi: &[f64]) -> bool {
        match self {
            Density::Constant { .. } => false,
            Density::PointConcentration { eps, center, .. }
            | Density::TildeConcentration { eps, center, .. } => ball_crosses_cell(
                &Ball {
                    center: center.clone(),
                    radius: *eps,
                },
                lo,
                hi,
            ),
            Density::BoundaryStripWeyl { eps, domain, .. }
            | Density::SteklovFamily { eps, domain } => strip_crosses_cell(domain, *eps, lo, hi),
            Density::MultiPoint { eps, centers } => centers.iter().any(|c| {
                ball_crosses_cell(
                    &Ball {
                        center: c.clone(),
                        radius: *eps,
                    },
                    lo,
                    hi,
                )
            }),
            Density::PiecewiseConstant { pieces, .. } => {
                pieces.iter().any(|(r, _)| r.crosses_cell(lo, hi))
            }
        }
    }

    fn axis_interfaces(&self, lo: &[f64], hi: &[f64]) -> Option<Vec<Vec<f64>>> {
        let keep_inside = |positions: Vec<Vec<f64>>| {
            let mut out: Vec<Vec<f64>> = Vec::with_capacity(lo.len());
            for (k, mut axis) in positions.into_iter().enumerate() {
                axis.retain(|&p| p > lo[k] + 1e-14 && p < hi[k] - 1e-14);
                axis.sort_by(|a, b| a.partial_cmp(b).unwrap());
                axis.dedup();
                out.push(axis);
            }
            out
        };
        match self {
            Density::Constant { .. } => Some(vec![Vec::new(); lo.len()]),
            Density::BoundaryStripWeyl { eps, domain, .. }
            | Density::SteklovFamily { eps, domain } => {
                let planes: Vec<Vec<f64>> = domain
                    .bounds()
                    .iter()
                    .map(|b| vec![b[0] + eps, b[1] - eps])
                    .collect();
                Some(keep_inside(planes))
            }
            Density::PiecewiseConstant { pieces, .. } => {
                if pieces
                    .iter()
                    .any(|(r, _)| matches!(r, PieceRegion::Ball(_)))
                {
                    return None;
                }
                let mut planes = vec![Vec::new(); lo.len()];
                for (r, _) in pieces {
                    if let PieceRegion::Boxed(b) = r {
                        for k in 0..lo.len() {
                            planes[k].push(b[k][0]);
                            planes[k].push(b[k][1]);
                        }
                    }
                }
                Some(keep_inside(planes))
            }
            _ => None,
        }
    }
}

fn strip_crosses_cell(domain: &Domain, eps: f64, lo: &[f64], hi: &[f64]) -> bool {
    // conservative interval bounds on dist(x, ∂Ω) over the cell
    let mut dlo = f64::INFINITY;
    let mut dhi = f64::INFINITY;
    for k in 0..domain.dim() {
        let b = domain.bounds()[k];
        let dk = |x: f64| (x - b[0]).min(b[1] - x);
        let lo_k = dk(lo[k]).min(dk(hi[k]));
        let mid_domain = 0.5 * (b[0] + b[1]);
        let hi_k = dk(mid_domain.clamp(lo[k], hi[k]));
        dlo = dlo.min(lo_k);
        dhi = dhi.min(hi_k);
    }
    // grid-aligned interfaces touch cell boundaries only; tolerate roundoff
    dlo < eps - 1e-13 && dhi > eps + 1e-13
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Domain {
        Domain::unit_interval()
    }

    #[test]
    fn point_concentration_values() {
        let dom = unit();
        let rho = Density::point_concentration(&dom, 1, 0.1, 0.1, vec![0.5]).unwrap();
        // inside the ball: ε^{2m−N−δ} + ε^{−N}
        let inside = rho.evaluate(&[0.52], &dom).unwrap();
        assert_relative_eq!(inside, 0.1f64.powf(0.9) + 10.0, epsilon = 1e-12);
        let outside = rho.evaluate(&[0.9], &dom).unwrap();
        assert_relative_eq!(outside, 0.1f64.powf(0.9), epsilon = 1e-12);
    }

    #[test]
    fn constant_everywhere() {
        let dom = unit();
        let rho = Density::constant(3.5).unwrap();
        assert_eq!(rho.evaluate(&[0.3], &dom).unwrap(), 3.5);
        assert!(rho.evaluate(&[1.5], &dom).is_err());
        assert_relative_eq!(rho.mass(&dom), 3.5, epsilon = 1e-15);
    }

    #[test]
    fn point_concentration_mass_tends_to_unit_ball_volume() {
        let dom = unit();
        for eps in [1e-2, 1e-3, 1e-4] {
            let rho = Density::point_concentration(&dom, 1, eps, 0.1, vec![0.5]).unwrap();
            let mass = rho.mass(&dom);
            // ω_1 = 2 plus the vanishing background
            assert_relative_eq!(mass, 2.0 + eps.powf(0.9), epsilon = 1e-12);
        }
    }

    #[test]
    fn multi_point_mass() {
        let dom = Domain::unit_cube();
        let eps = 0.05;
        let centers = vec![vec![0.3, 0.5, 0.5], vec![0.7, 0.5, 0.5]];
        let rho = Density::multi_point(&dom, eps, centers).unwrap();
        let expect = eps * 1.0 + 2.0 * unit_ball_volume(3);
        assert_relative_eq!(rho.mass(&dom), expect, epsilon = 1e-12);
    }

    #[test]
    fn sup_norms() {
        let dom = unit();
        let pc = Density::point_concentration(&dom, 1, 0.1, 0.1, vec![0.5]).unwrap();
        assert_relative_eq!(
            pc.sup_norm(&dom),
            0.1f64.powf(-1.0) + 0.1f64.powf(0.9),
            epsilon = 1e-12
        );
        let st = Density::steklov_family(&dom, 0.1).unwrap();
        assert_relative_eq!(st.sup_norm(&dom), 0.1 + 10.0, epsilon = 1e-12);
        assert_relative_eq!(
            Density::constant(2.0).unwrap().sup_norm(&dom),
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn boundary_strip_weyl_lp_tends_to_boundary_measure() {
        let dom = Domain::unit_cube();
        let (n, m) = (3.0, 1.0);
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05, 0.02, 0.01] {
            let rho = Density::boundary_strip_weyl(&dom, 1, eps).unwrap();
            let lp = rho.lp_norm(&dom, n / (2.0 * m));
            let err = (lp.integral - dom.boundary_measure()).abs();
            assert!(err < prev + 1e-12, "eps {eps}: {err} vs {prev}");
            prev = err;
        }
        let rho = Density::boundary_strip_weyl(&dom, 1, 1e-3).unwrap();
        assert_relative_eq!(
            rho.lp_norm(&dom, 1.5).integral,
            6.0,
            max_relative = 5e-3
        );
    }

    #[test]
    fn quadrature_mass_matches_closed_form() {
        let dom = Domain::unit_square();
        let catalog: Vec<Density> = vec![
            Density::constant(1.7).unwrap(),
            Density::point_concentration(&dom, 1, 0.05, 0.1, vec![0.5, 0.5]).unwrap(),
            Density::tilde_concentration(&dom, 1, 0.05, 0.1, vec![0.4, 0.6]).unwrap(),
            Density::boundary_strip_weyl(&dom, 1, 0.05).unwrap(),
            Density::steklov_family(&dom, 0.05).unwrap(),
            Density::multi_point(&dom, 0.05, vec![vec![0.25, 0.25], vec![0.75, 0.75]]).unwrap(),
            Density::piecewise_constant(
                &dom,
                1.0,
                vec![
                    (PieceRegion::Boxed(vec![[0.0, 0.3], [0.0, 1.0]]), 2.0),
                    (
                        PieceRegion::Ball(Ball::new(vec![0.6, 0.5], 0.1).unwrap()),
                        4.0,
                    ),
                ],
            )
            .unwrap(),
        ];
        for rho in &catalog {
            let exact = rho.mass(&dom);
            let quad = rho.mass_quadrature(&dom, 64);
            assert_relative_eq!(quad, exact, max_relative = 1e-6);
        }
    }

    #[test]
    fn hoelder_consistency_on_catalog() {
        // ∫ρ^{N/2m} ≤ ‖ρ‖∞^{N/2m−1} ∫ρ for N > 2m
        let dom = Domain::unit_cube();
        let (n, m) = (3usize, 1usize);
        let p = n as f64 / (2.0 * m as f64);
        let catalog: Vec<Density> = vec![
            Density::constant(2.0).unwrap(),
            Density::point_concentration(&dom, m, 0.1, 0.1, vec![0.5, 0.5, 0.5]).unwrap(),
            Density::tilde_concentration(&dom, m, 0.1, 0.1, vec![0.5, 0.5, 0.5]).unwrap(),
            Density::boundary_strip_weyl(&dom, m, 0.1).unwrap(),
            Density::steklov_family(&dom, 0.1).unwrap(),
            Density::multi_point(&dom, 0.1, vec![vec![0.3, 0.3, 0.3], vec![0.7, 0.7, 0.7]])
                .unwrap(),
        ];
        for rho in &catalog {
            let lhs = rho.lp_norm(&dom, p).integral;
            let rhs = rho.sup_norm(&dom).powf(p - 1.0) * rho.mass(&dom);
            assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn ess_inf_positive_everywhere() {
        let dom = Domain::unit_square();
        let catalog: Vec<Density> = vec![
            Density::constant(0.5).unwrap(),
            Density::point_concentration(&dom, 2, 0.05, 0.3, vec![0.5, 0.5]).unwrap(),
            Density::boundary_strip_weyl(&dom, 1, 0.02).unwrap(),
            Density::steklov_family(&dom, 0.02).unwrap(),
        ];
        for rho in &catalog {
            assert!(rho.min_value(&dom) > 0.0);
        }
    }

    #[test]
    fn truncated_ball_rejected() {
        let dom = unit();
        assert!(Density::point_concentration(&dom, 1, 0.2, 0.1, vec![0.9]).is_err());
        assert!(Density::multi_point(&dom, 0.3, vec![vec![0.4], vec![0.6]]).is_err());
    }

    #[test]
    fn scaling_density_scales_functionals() {
        let dom = Domain::unit_square();
        let rho = Density::constant(1.0).unwrap();
        let rho3 = Density::constant(3.0).unwrap();
        assert_relative_eq!(rho3.mass(&dom), 3.0 * rho.mass(&dom), epsilon = 1e-15);
        let p = 0.5;
        assert_relative_eq!(
            rho3.lp_norm(&dom, p).integral,
            3f64.powf(p) * rho.lp_norm(&dom, p).integral,
            epsilon = 1e-12
        );
    }
}
