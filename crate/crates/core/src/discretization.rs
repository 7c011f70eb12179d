//! H^m-conforming discretization on tensor-product grids: smooth piecewise
//! polynomials of degree p ≥ m with C^{p−1} inter-element smoothness, and
//! assembly of the order-m stiffness form Σ_{|α|=m} ∫ ∂^α u ∂^α φ, the
//! ρ-weighted mass form ∫ ρ u φ, and the boundary mass form ∫_∂Ω u φ.
//!
//! Quadrature is a per-axis Gauss rule with p+1 points, exact for all
//! piecewise-polynomial integrands here. Cells crossed by a density
//! interface are integrated by recursive subdivision with midpoint
//! classification on the finest level; the affected cell count and an error
//! bound are recorded on the assembly result rather than silently dropped.

use std::io::Write as IoWrite;

use nalgebra::DMatrix;

use crate::basis::{gauss_on_interval, SplineBasis1d};
use crate::density::Weight;
use crate::error::{CoreError, Result};
use crate::geometry::Domain;
use crate::linalg::BandedCholesky;

/// Coefficient vector over a discrete space basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DofVector(pub Vec<f64>);

impl DofVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-element quadrature parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRule {
    /// Gauss points per axis per (sub)cell; defaults to degree + 1.
    pub points_per_axis: usize,
    /// Recursion depth for cells crossed by a density interface.
    pub max_subdivision_depth: usize,
}

impl QuadratureRule {
    pub fn for_degree(degree: usize) -> Self {
        QuadratureRule {
            points_per_axis: degree + 1,
            max_subdivision_depth: 4,
        }
    }
}

/// Essential constraints imposed on the spline space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// No constraints; Neumann conditions are natural.
    Natural,
    /// Remove the m leading/trailing basis functions per side (1D only);
    /// used for the Dirichlet string comparisons.
    Clamped,
}

/// Symmetric sparse matrix in CSR storage with the full (two-sided) pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SymmetricSparseMatrix {
    /// Build from (row, col, value) triplets, summing duplicates.
    pub fn from_coo(dim: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols: Vec<u32> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j as u32);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SymmetricSparseMatrix {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.cols[lo..hi].binary_search(&(j as u32)) {
            Ok(pos) => self.vals[lo + pos],
            Err(_) => 0.0,
        }
    }

    pub fn bandwidth(&self) -> usize {
        let mut band = 0usize;
        for i in 0..self.dim {
            if self.row_ptr[i + 1] > self.row_ptr[i] {
                let first = self.cols[self.row_ptr[i]] as usize;
                if first < i {
                    band = band.max(i - first);
                }
            }
        }
        band
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.dim {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut s = 0.0;
            for t in lo..hi {
                s += self.vals[t] * x[self.cols[t] as usize];
            }
            y[i] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec(x, &mut y);
        y
    }

    /// uᵀ A v.
    pub fn quadratic_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            let mut row = 0.0;
            for t in lo..hi {
                row += self.vals[t] * v[self.cols[t] as usize];
            }
            s += u[i] * row;
        }
        s
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.row_entries(i)
                    .map(|(_, v)| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.vals {
            *v *= s;
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.scale(s);
        out
    }

    /// self + s·other; the two matrices must share a sparsity pattern
    /// (assembly on the same space guarantees this).
    pub fn add_scaled(&self, other: &SymmetricSparseMatrix, s: f64) -> Result<Self> {
        if self.row_ptr != other.row_ptr || self.cols != other.cols {
            return Err(CoreError::Discretization(
                "matrix patterns differ; cannot combine".into(),
            ));
        }
        let mut out = self.clone();
        for (v, w) in out.vals.iter_mut().zip(&other.vals) {
            *v += s * w;
        }
        Ok(out)
    }

    /// Largest |A - Aᵀ| entry; zero by construction of the assemblers.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row_entries(i) {
                worst = worst.max((v - self.entry(j, i)).abs());
            }
        }
        worst
    }

    /// Coordinate text export: `row col value` per line, 17 significant
    /// digits.
    pub fn write_coordinate_text<W: IoWrite>(&self, mut w: W) -> Result<()> {
        for i in 0..self.dim {
            for (j, v) in self.row_entries(i) {
                writeln!(w, "{} {} {:.16e}", i, j, v)?;
            }
        }
        Ok(())
    }
}

/// Result of a ρ-weighted mass assembly, with the interface bookkeeping.
#[derive(Debug, Clone)]
pub struct MassAssembly {
    pub matrix: SymmetricSparseMatrix,
    /// Elements whose cell is crossed by a density interface.
    pub interface_cells: usize,
    /// Leaf cells still crossed at the maximum subdivision depth.
    pub unresolved_leaves: usize,
    /// Bound on the total quadrature error from unresolved leaves:
    /// Σ leaf volume × local value spread.
    pub quadrature_error_bound: f64,
}

/// Per-axis table of basis values/derivatives at the Gauss points of every
/// element.
struct AxisTable {
    pts: Vec<f64>,  // [element * q + i]
    wts: Vec<f64>,
    ders: Vec<f64>, // [((element * q + i) * (max_der+1) + d) * (p+1) + local]
    q: usize,
    p1: usize,
    max_der: usize,
}

impl AxisTable {
    fn build(basis: &SplineBasis1d, q: usize, max_der: usize) -> Self {
        let p1 = basis.degree() + 1;
        let ne = basis.elements();
        let mut pts = Vec::with_capacity(ne * q);
        let mut wts = Vec::with_capacity(ne * q);
        let mut ders = vec![0.0; ne * q * (max_der + 1) * p1];
        for e in 0..ne {
            let (a, b) = basis.element_bounds(e);
            let (xs, ws) = gauss_on_interval(q, a, b);
            for i in 0..q {
                let dd = basis.eval_element(e, xs[i], max_der);
                let base = ((e * q + i) * (max_der + 1)) * p1;
                for d in 0..=max_der {
                    for l in 0..p1 {
                        ders[base + d * p1 + l] = dd[d][l];
                    }
                }
                pts.push(xs[i]);
                wts.push(ws[i]);
            }
        }
        AxisTable {
            pts,
            wts,
            ders,
            q,
            p1,
            max_der,
        }
    }

    #[inline]
    fn der_slice(&self, e: usize, i: usize, d: usize) -> &[f64] {
        let base = ((e * self.q + i) * (self.max_der + 1) + d) * self.p1;
        &self.ders[base..base + self.p1]
    }
}

/// Tensor-product spline space on a box.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    domain: Domain,
    order: usize,
    degree: usize,
    elements: Vec<usize>,
    bc: BoundaryCondition,
    axes: Vec<AxisSpaceData>,
    quadrature: QuadratureRule,
}

#[derive(Debug, Clone, PartialEq)]
struct AxisSpaceData {
    basis: SplineBasis1d,
    start: usize,
    end: usize,
}

impl DiscreteSpace {
    /// Build a space with `elements` cells per axis (uniform across axes).
    pub fn build(
        domain: &Domain,
        m: usize,
        elements: usize,
        bc: BoundaryCondition,
        degree: usize,
    ) -> Result<Self> {
        Self::build_anisotropic(domain, m, &vec![elements; domain.dim()], bc, degree)
    }

    /// Build with a per-axis element count.
    pub fn build_anisotropic(
        domain: &Domain,
        m: usize,
        elements: &[usize],
        bc: BoundaryCondition,
        degree: usize,
    ) -> Result<Self> {
        if m < 1 {
            return Err(CoreError::Discretization("order m must be >= 1".into()));
        }
        if degree < m {
            return Err(CoreError::Discretization(format!(
                "degree {degree} must be >= order m = {m} for conformity"
            )));
        }
        if elements.len() != domain.dim() {
            return Err(CoreError::Discretization(
                "element counts must match the domain dimension".into(),
            ));
        }
        if elements.iter().any(|&n| n < 2) {
            return Err(CoreError::Discretization("need at least 2 elements per axis".into()));
        }
        if bc == BoundaryCondition::Clamped && domain.dim() != 1 {
            return Err(CoreError::Discretization(
                "clamped constraints are only supported in 1D".into(),
            ));
        }
        let mut axes = Vec::new();
        for (k, &n) in elements.iter().enumerate() {
            let b = domain.bounds()[k];
            let basis = SplineBasis1d::new(b[0], b[1], n, degree);
            let (start, end) = match bc {
                BoundaryCondition::Natural => (0, basis.dim()),
                BoundaryCondition::Clamped => {
                    if basis.dim() < 2 * m + 1 {
                        return Err(CoreError::Discretization(
                            "clamped space would be empty".into(),
                        ));
                    }
                    (m, basis.dim() - m)
                }
            };
            axes.push(AxisSpaceData { basis, start, end });
        }
        Ok(DiscreteSpace {
            domain: domain.clone(),
            order: m,
            degree,
            elements: elements.to_vec(),
            bc,
            axes,
            quadrature: QuadratureRule::for_degree(degree),
        })
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureRule) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn dim(&self) -> usize {
        self.axes.iter().map(|a| a.end - a.start).product()
    }

    fn axis_dofs(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.end - a.start).collect()
    }

    pub fn refine_dyadic(&self) -> DiscreteSpace {
        let elements: Vec<usize> = self.elements.iter().map(|n| 2 * n).collect();
        DiscreteSpace::build_anisotropic(&self.domain, self.order, &elements, self.bc, self.degree)
            .expect("refinement of a valid space is valid")
    }

    /// Multi-indices α with |α| = m in `dim` variables.
    fn derivative_multi_indices(dim: usize, m: usize) -> Vec<Vec<usize>> {
        fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == dim - 1 {
                cur.push(left);
                out.push(cur.clone());
                cur.pop();
                return;
            }
            for a in 0..=left {
                cur.push(a);
                rec(dim, left - a, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(dim, m, &mut Vec::new(), &mut out);
        out
    }

    /// Sparsity pattern of the tensor stencil: per-axis coupling |i−j| ≤ p.
    fn pattern(&self) -> SymmetricSparseMatrix {
        let d = self.axis_dofs();
        let n: usize = d.iter().product();
        let p = self.degree;
        let dim = d.len();
        let mut strides = vec![1usize; dim];
        for k in 1..dim {
            strides[k] = strides[k - 1] * d[k - 1];
        }
        let mut row_ptr = vec![0usize; n + 1];
        let mut multi = vec![0usize; dim];
        for row in 0..n {
            let mut len = 1usize;
            for k in 0..dim {
                let lo = multi[k].saturating_sub(p);
                let hi = (multi[k] + p).min(d[k] - 1);
                len *= hi - lo + 1;
            }
            row_ptr[row + 1] = row_ptr[row] + len;
            advance(&mut multi, &d);
        }
        let nnz = row_ptr[n];
        let mut cols = vec![0u32; nnz];
        let mut multi = vec![0usize; dim];
        for row in 0..n {
            let mut lo = vec![0usize; dim];
            let mut hi = vec![0usize; dim];
            for k in 0..dim {
                lo[k] = multi[k].saturating_sub(p);
                hi[k] = (multi[k] + p).min(d[k] - 1);
            }
            let mut pos = row_ptr[row];
            let mut j = lo.clone();
            loop {
                let col: usize = (0..dim).map(|k| j[k] * strides[k]).sum();
                cols[pos] = col as u32;
                pos += 1;
                // advance j within [lo, hi]
                let mut k = 0;
                loop {
                    j[k] += 1;
                    if j[k] <= hi[k] {
                        break;
                    }
                    j[k] = lo[k];
                    k += 1;
                    if k == dim {
                        break;
                    }
                }
                if k == dim {
                    break;
                }
            }
            advance(&mut multi, &d);
        }
        SymmetricSparseMatrix {
            dim: n,
            row_ptr,
            cols,
            vals: vec![0.0; nnz],
        }
    }

    /// Scatter offset of (row multi, col multi) within the CSR row.
    #[inline]
    fn row_offset(d: &[usize], p: usize, rm: &[usize], cm: &[usize]) -> usize {
        let dim = d.len();
        let mut off = 0usize;
        let mut stride = 1usize;
        for k in 0..dim {
            let lo = rm[k].saturating_sub(p);
            let hi = (rm[k] + p).min(d[k] - 1);
            off += (cm[k] - lo) * stride;
            stride *= hi - lo + 1;
        }
        off
    }

    /// Assemble the order-m stiffness form Σ_{|α|=m} ∫ ∂^α u ∂^α φ.
    pub fn assemble_stiffness(&self) -> SymmetricSparseMatrix {
        let dim = self.domain.dim();
        let m = self.order;
        let q = self.quadrature.points_per_axis;
        let alphas = Self::derivative_multi_indices(dim, m);
        let tables: Vec<AxisTable> = self
            .axes
            .iter()
            .map(|a| AxisTable::build(&a.basis, q, m))
            .collect();
        let mut mat = self.pattern();
        let d = self.axis_dofs();
        let p = self.degree;
        let p1 = p + 1;
        let local_n = p1.pow(dim as u32);

        let mut k_loc = vec![0.0f64; local_n * local_n];
        let mut gvec = vec![0.0f64; local_n];
        let mut el = vec![0usize; dim];
        loop {
            k_loc.iter_mut().for_each(|v| *v = 0.0);
            // tensor Gauss loop
            let mut qi = vec![0usize; dim];
            loop {
                let mut w = 1.0;
                for k in 0..dim {
                    w *= tables[k].wts[el[k] * q + qi[k]];
                }
                for alpha in &alphas {
                    build_tensor_values(&tables, &el, &qi, alpha, dim, p1, &mut gvec);
                    // w·(g_a·g_b) keeps the accumulation bitwise symmetric
                    for a in 0..local_n {
                        let ga = gvec[a];
                        if ga != 0.0 {
                            let row = &mut k_loc[a * local_n..(a + 1) * local_n];
                            for (b, g) in gvec.iter().enumerate() {
                                row[b] += w * (ga * g);
                            }
                        }
                    }
                }
                if !advance_bounded(&mut qi, q, dim) {
                    break;
                }
            }
            self.scatter_local(&mut mat, &d, p, &el, &k_loc, local_n);
            if !advance(&mut el, &self.elements) {
                break;
            }
        }
        mat
    }

    /// Assemble the ρ-weighted mass form ∫ ρ u φ.
    pub fn assemble_mass(&self, rho: &dyn Weight) -> MassAssembly {
        let dim = self.domain.dim();
        let q = self.quadrature.points_per_axis;
        let tables: Vec<AxisTable> = self
            .axes
            .iter()
            .map(|a| AxisTable::build(&a.basis, q, 0))
            .collect();
        let mut mat = self.pattern();
        let d = self.axis_dofs();
        let p = self.degree;
        let p1 = p + 1;
        let local_n = p1.pow(dim as u32);

        let mut m_loc = vec![0.0f64; local_n * local_n];
        let mut vvec = vec![0.0f64; local_n];
        let mut x = vec![0.0f64; dim];
        let mut el = vec![0usize; dim];
        let mut interface_cells = 0usize;
        let mut unresolved = 0usize;
        let mut err_bound = 0.0f64;
        let zero_alpha = vec![0usize; dim];
        loop {
            m_loc.iter_mut().for_each(|v| *v = 0.0);
            let (lo, hi) = self.cell_bounds(&el);
            if rho.needs_subdivision(&lo, &hi) {
                interface_cells += 1;
                if let Some(planes) = rho.axis_interfaces(&lo, &hi) {
                    // axis-aligned interfaces: split at the planes and
                    // integrate each sub-box exactly
                    self.mass_cell_axis_split(rho, &el, &lo, &hi, &planes, &mut m_loc, local_n);
                } else {
                    self.mass_cell_subdivided(
                        rho,
                        &el,
                        &lo,
                        &hi,
                        self.quadrature.max_subdivision_depth,
                        &mut m_loc,
                        local_n,
                        &mut unresolved,
                        &mut err_bound,
                    );
                }
            } else {
                let mut qi = vec![0usize; dim];
                loop {
                    let mut w = 1.0;
                    for k in 0..dim {
                        let idx = el[k] * q + qi[k];
                        w *= tables[k].wts[idx];
                        x[k] = tables[k].pts[idx];
                    }
                    w *= rho.value(&x);
                    build_tensor_values(&tables, &el, &qi, &zero_alpha, dim, p1, &mut vvec);
                    for a in 0..local_n {
                        let ga = vvec[a];
                        if ga != 0.0 {
                            let row = &mut m_loc[a * local_n..(a + 1) * local_n];
                            for (b, g) in vvec.iter().enumerate() {
                                row[b] += w * (ga * g);
                            }
                        }
                    }
                    if !advance_bounded(&mut qi, q, dim) {
                        break;
                    }
                }
            }
            self.scatter_local(&mut mat, &d, p, &el, &m_loc, local_n);
            if !advance(&mut el, &self.elements) {
                break;
            }
        }
        MassAssembly {
            matrix: mat,
            interface_cells,
            unresolved_leaves: unresolved,
            quadrature_error_bound: err_bound,
        }
    }

    fn cell_bounds(&self, el: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let dim = self.domain.dim();
        let mut lo = vec![0.0; dim];
        let mut hi = vec![0.0; dim];
        for k in 0..dim {
            let (a, b) = self.axes[k].basis.element_bounds(el[k]);
            lo[k] = a;
            hi[k] = b;
        }
        (lo, hi)
    }

    #[allow(clippy::too_many_arguments)]
    fn mass_cell_axis_split(
        &self,
        rho: &dyn Weight,
        el: &[usize],
        lo: &[f64],
        hi: &[f64],
        planes: &[Vec<f64>],
        m_loc: &mut [f64],
        local_n: usize,
    ) {
        let dim = lo.len();
        let q = self.quadrature.points_per_axis;
        let p1 = self.degree + 1;
        // per-axis breakpoints lo, planes…, hi
        let mut breaks: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for k in 0..dim {
            let mut b = Vec::with_capacity(planes[k].len() + 2);
            b.push(lo[k]);
            b.extend_from_slice(&planes[k]);
            b.push(hi[k]);
            breaks.push(b);
        }
        let counts: Vec<usize> = breaks.iter().map(|b| b.len() - 1).collect();
        let mut idx = vec![0usize; dim];
        let mut vvec = vec![0.0f64; local_n];
        let mut x = vec![0.0f64; dim];
        loop {
            let mut empty = false;
            let mut mid = vec![0.0f64; dim];
            let mut rules: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(dim);
            for k in 0..dim {
                let (a, b) = (breaks[k][idx[k]], breaks[k][idx[k] + 1]);
                if b - a <= 0.0 {
                    empty = true;
                    break;
                }
                mid[k] = 0.5 * (a + b);
                rules.push(gauss_on_interval(q, a, b));
            }
            if !empty {
                let rho_val = rho.value(&mid);
                let mut qi = vec![0usize; dim];
                loop {
                    let mut w = rho_val;
                    for k in 0..dim {
                        w *= rules[k].1[qi[k]];
                        x[k] = rules[k].0[qi[k]];
                    }
                    let mut stride = 1usize;
                    vvec.iter_mut().for_each(|v| *v = 1.0);
                    for k in 0..dim {
                        let dd = self.axes[k].basis.eval_element(el[k], x[k], 0);
                        for a in 0..local_n {
                            let lk = a / stride % p1;
                            vvec[a] *= dd[0][lk];
                        }
                        stride *= p1;
                    }
                    for a in 0..local_n {
                        let ga = vvec[a];
                        if ga != 0.0 {
                            let row = &mut m_loc[a * local_n..(a + 1) * local_n];
                            for (b, g) in vvec.iter().enumerate() {
                                row[b] += w * (ga * g);
                            }
                        }
                    }
                    if !advance_bounded(&mut qi, q, dim) {
                        break;
                    }
                }
            }
            if !advance(&mut idx, &counts) {
                break;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn mass_cell_subdivided(
        &self,
        rho: &dyn Weight,
        el: &[usize],
        lo: &[f64],
        hi: &[f64],
        depth: usize,
        m_loc: &mut [f64],
        local_n: usize,
        unresolved: &mut usize,
        err_bound: &mut f64,
    ) {
        let dim = lo.len();
        if depth > 0 && rho.needs_subdivision(lo, hi) {
            for corner in 0..(1usize << dim) {
                let mut clo = vec![0.0; dim];
                let mut chi = vec![0.0; dim];
                for k in 0..dim {
                    let mid = 0.5 * (lo[k] + hi[k]);
                    if corner >> k & 1 == 0 {
                        clo[k] = lo[k];
                        chi[k] = mid;
                    } else {
                        clo[k] = mid;
                        chi[k] = hi[k];
                    }
                }
                self.mass_cell_subdivided(
                    rho, el, &clo, &chi, depth - 1, m_loc, local_n, unresolved, err_bound,
                );
            }
            return;
        }
        let q = self.quadrature.points_per_axis;
        let p1 = self.degree + 1;
        let straddles = rho.needs_subdivision(lo, hi);
        let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let rho_mid = rho.value(&mid);
        if straddles {
            *unresolved += 1;
            // value spread sampled at corners vs midpoint
            let mut vmin = rho_mid;
            let mut vmax = rho_mid;
            for corner in 0..(1usize << dim) {
                let x: Vec<f64> = (0..dim)
                    .map(|k| {
                        if corner >> k & 1 == 0 {
                            lo[k] + 1e-12 * (hi[k] - lo[k])
                        } else {
                            hi[k] - 1e-12 * (hi[k] - lo[k])
                        }
                    })
                    .collect();
                let v = rho.value(&x);
                vmin = vmin.min(v);
                vmax = vmax.max(v);
            }
            let vol: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
            *err_bound += vol * (vmax - vmin);
        }
        // Gauss rule on the (sub)cell; midpoint classification when the leaf
        // still straddles the interface.
        let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
            .map(|k| gauss_on_interval(q, lo[k], hi[k]))
            .collect();
        let mut vvec = vec![0.0f64; local_n];
        let mut x = vec![0.0f64; dim];
        let mut qi = vec![0usize; dim];
        loop {
            let mut w = 1.0;
            for k in 0..dim {
                w *= rules[k].1[qi[k]];
                x[k] = rules[k].0[qi[k]];
            }
            w *= if straddles { rho_mid } else { rho.value(&x) };
            // basis values at arbitrary x inside element el
            let mut stride = 1usize;
            vvec.iter_mut().for_each(|v| *v = 1.0);
            for k in 0..dim {
                let dd = self.axes[k].basis.eval_element(el[k], x[k], 0);
                for a in 0..local_n {
                    let lk = a / stride % p1;
                    vvec[a] *= dd[0][lk];
                }
                stride *= p1;
            }
            for a in 0..local_n {
                let ga = vvec[a];
                if ga != 0.0 {
                    let row = &mut m_loc[a * local_n..(a + 1) * local_n];
                    for (b, g) in vvec.iter().enumerate() {
                        row[b] += w * (ga * g);
                    }
                }
            }
            if !advance_bounded(&mut qi, q, dim) {
                break;
            }
        }
    }

    fn scatter_local(
        &self,
        mat: &mut SymmetricSparseMatrix,
        d: &[usize],
        p: usize,
        el: &[usize],
        local: &[f64],
        local_n: usize,
    ) {
        let dim = d.len();
        let p1 = p + 1;
        // map local index -> retained multi-index (or skip)
        let mut retained: Vec<Option<Vec<usize>>> = Vec::with_capacity(local_n);
        for a in 0..local_n {
            let mut multi = vec![0usize; dim];
            let mut ok = true;
            let mut rest = a;
            for k in 0..dim {
                let lk = rest % p1;
                rest /= p1;
                let f = el[k] + lk; // global basis function on this axis
                let ax = &self.axes[k];
                if f < ax.start || f >= ax.end {
                    ok = false;
                    break;
                }
                multi[k] = f - ax.start;
            }
            retained.push(if ok { Some(multi) } else { None });
        }
        let mut strides = vec![1usize; dim];
        for k in 1..dim {
            strides[k] = strides[k - 1] * d[k - 1];
        }
        for a in 0..local_n {
            let Some(rm) = &retained[a] else { continue };
            let row: usize = (0..dim).map(|k| rm[k] * strides[k]).sum();
            let base = mat.row_ptr[row];
            for b in 0..local_n {
                let Some(cm) = &retained[b] else { continue };
                let v = local[a * local_n + b];
                if v != 0.0 {
                    let off = Self::row_offset(d, p, rm, cm);
                    mat.vals[base + off] += v;
                }
            }
        }
    }

    /// Assemble the boundary mass form ∫_∂Ω u φ (natural spaces only).
    pub fn assemble_boundary_mass(&self) -> Result<SymmetricSparseMatrix> {
        if self.bc != BoundaryCondition::Natural {
            return Err(CoreError::Discretization(
                "boundary mass requires a natural (unconstrained) space".into(),
            ));
        }
        let dim = self.domain.dim();
        let q = self.quadrature.points_per_axis;
        let mut mat = self.pattern();
        let d = self.axis_dofs();
        let p = self.degree;
        let p1 = p + 1;

        for axis in 0..dim {
            for side in 0..2 {
                // the only axis-`axis` function alive on this face
                let fixed = if side == 0 { 0 } else { d[axis] - 1 };
                let others: Vec<usize> = (0..dim).filter(|&k| k != axis).collect();
                if others.is_empty() {
                    // 1D: endpoint evaluation, basis value is exactly 1
                    let row = if side == 0 { 0 } else { d[0] - 1 };
                    let rm = vec![row];
                    let base = mat.row_ptr[row];
                    let off = Self::row_offset(&d, p, &rm, &rm);
                    mat.vals[base + off] += 1.0;
                    continue;
                }
                let tables: Vec<AxisTable> = others
                    .iter()
                    .map(|&k| AxisTable::build(&self.axes[k].basis, q, 0))
                    .collect();
                let face_elements: Vec<usize> = others.iter().map(|&k| self.elements[k]).collect();
                let mut el = vec![0usize; others.len()];
                let local_face = p1.pow(others.len() as u32);
                let mut f_loc = vec![0.0f64; local_face * local_face];
                let mut vvec = vec![0.0f64; local_face];
                let zero_alpha = vec![0usize; others.len()];
                loop {
                    f_loc.iter_mut().for_each(|v| *v = 0.0);
                    let mut qi = vec![0usize; others.len()];
                    loop {
                        let mut w = 1.0;
                        for (t, _) in others.iter().enumerate() {
                            w *= tables[t].wts[el[t] * q + qi[t]];
                        }
                        build_tensor_values(&tables, &el, &qi, &zero_alpha, others.len(), p1, &mut vvec);
                        for a in 0..local_face {
                            let ga = vvec[a];
                            if ga != 0.0 {
                                let row = &mut f_loc[a * local_face..(a + 1) * local_face];
                                for (b, g) in vvec.iter().enumerate() {
                                    row[b] += w * (ga * g);
                                }
                            }
                        }
                        if !advance_bounded(&mut qi, q, others.len()) {
                            break;
                        }
                    }
                    // scatter with the fixed index on `axis`
                    let mut strides = vec![1usize; dim];
                    for k in 1..dim {
                        strides[k] = strides[k - 1] * d[k - 1];
                    }
                    for a in 0..local_face {
                        let mut rm = vec![0usize; dim];
                        rm[axis] = fixed;
                        let mut rest = a;
                        for (t, &k) in others.iter().enumerate() {
                            let lk = rest % p1;
                            rest /= p1;
                            rm[k] = el[t] + lk;
                        }
                        let row: usize = (0..dim).map(|k| rm[k] * strides[k]).sum();
                        let base = mat.row_ptr[row];
                        for b in 0..local_face {
                            let mut cm = vec![0usize; dim];
                            cm[axis] = fixed;
                            let mut rest = b;
                            for (t, &k) in others.iter().enumerate() {
                                let lk = rest % p1;
                                rest /= p1;
                                cm[k] = el[t] + lk;
                            }
                            let v = f_loc[a * local_face + b];
                            if v != 0.0 {
                                let off = Self::row_offset(&d, p, &rm, &cm);
                                mat.vals[base + off] += v;
                            }
                        }
                    }
                    if !advance(&mut el, &face_elements) {
                        break;
                    }
                }
            }
        }
        Ok(mat)
    }

    /// ρ-weighted L² projection of f onto the space; returns coefficients and
    /// the relative L²(ρ) residual.
    pub fn project(&self, f: &dyn Weight, rho: &dyn Weight) -> Result<(DofVector, f64)> {
        let mass = self.assemble_mass(rho);
        let rhs = self.weighted_load(f, rho);
        let chol = BandedCholesky::factor(&mass.matrix)?;
        let mut c = rhs;
        chol.solve_in_place(&mut c);
        // residual: ∫ρ(f−u)² / ∫ρ f² via the same quadrature path
        let (num, den) = self.projection_residual(f, rho, &c);
        let rel = if den > 0.0 { (num / den).max(0.0).sqrt() } else { 0.0 };
        Ok((DofVector(c), rel))
    }

    fn weighted_load(&self, f: &dyn Weight, rho: &dyn Weight) -> Vec<f64> {
        let dim = self.domain.dim();
        let q = self.quadrature.points_per_axis + 1;
        let d = self.axis_dofs();
        let p1 = self.degree + 1;
        let local_n = p1.pow(dim as u32);
        let mut rhs = vec![0.0f64; self.dim()];
        let mut strides = vec![1usize; dim];
        for k in 1..dim {
            strides[k] = strides[k - 1] * d[k - 1];
        }
        let mut el = vec![0usize; dim];
        loop {
            let (lo, hi) = self.cell_bounds(&el);
            let depth = if f.needs_subdivision(&lo, &hi) || rho.needs_subdivision(&lo, &hi) {
                self.quadrature.max_subdivision_depth
            } else {
                0
            };
            self.load_cell(f, rho, &el, &lo, &hi, depth, q, &mut rhs, &strides, local_n);
            if !advance(&mut el, &self.elements) {
                break;
            }
        }
        rhs
    }

    #[allow(clippy::too_many_arguments)]
    fn load_cell(
        &self,
        f: &dyn Weight,
        rho: &dyn Weight,
        el: &[usize],
        lo: &[f64],
        hi: &[f64],
        depth: usize,
        q: usize,
        rhs: &mut [f64],
        strides: &[usize],
        local_n: usize,
    ) {
        let dim = lo.len();
        if depth > 0 && (f.needs_subdivision(lo, hi) || rho.needs_subdivision(lo, hi)) {
            for corner in 0..(1usize << dim) {
                let mut clo = vec![0.0; dim];
                let mut chi = vec![0.0; dim];
                for k in 0..dim {
                    let mid = 0.5 * (lo[k] + hi[k]);
                    if corner >> k & 1 == 0 {
                        clo[k] = lo[k];
                        chi[k] = mid;
                    } else {
                        clo[k] = mid;
                        chi[k] = hi[k];
                    }
                }
                self.load_cell(f, rho, el, &clo, &chi, depth - 1, q, rhs, strides, local_n);
            }
            return;
        }
        let p1 = self.degree + 1;
        let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
            .map(|k| gauss_on_interval(q, lo[k], hi[k]))
            .collect();
        let mut vvec = vec![0.0f64; local_n];
        let mut x = vec![0.0f64; dim];
        let mut qi = vec![0usize; dim];
        loop {
            let mut w = 1.0;
            for k in 0..dim {
                w *= rules[k].1[qi[k]];
                x[k] = rules[k].0[qi[k]];
            }
            w *= rho.value(&x) * f.value(&x);
            let mut stride = 1usize;
            vvec.iter_mut().for_each(|v| *v = 1.0);
            for k in 0..dim {
                let dd = self.axes[k].basis.eval_element(el[k], x[k], 0);
                for a in 0..local_n {
                    let lk = a / stride % p1;
                    vvec[a] *= dd[0][lk];
                }
                stride *= p1;
            }
            for a in 0..local_n {
                if vvec[a] == 0.0 {
                    continue;
                }
                // map to retained dof
                let mut rest = a;
                let mut row = 0usize;
                let mut ok = true;
                for k in 0..dim {
                    let lk = rest % p1;
                    rest /= p1;
                    let fidx = el[k] + lk;
                    let ax = &self.axes[k];
                    if fidx < ax.start || fidx >= ax.end {
                        ok = false;
                        break;
                    }
                    row += (fidx - ax.start) * strides[k];
                }
                if ok {
                    rhs[row] += w * vvec[a];
                }
            }
            if !advance_bounded(&mut qi, q, dim) {
                break;
            }
        }
    }

    fn projection_residual(&self, f: &dyn Weight, rho: &dyn Weight, coeffs: &[f64]) -> (f64, f64) {
        let dim = self.domain.dim();
        let q = self.quadrature.points_per_axis + 2;
        let p1 = self.degree + 1;
        let d = self.axis_dofs();
        let mut strides = vec![1usize; dim];
        for k in 1..dim {
            strides[k] = strides[k - 1] * d[k - 1];
        }
        let mut num = 0.0;
        let mut den = 0.0;
        let mut el = vec![0usize; dim];
        let mut x = vec![0.0f64; dim];
        loop {
            let (lo, hi) = self.cell_bounds(&el);
            // residual quadrature: one fixed subdivision level on interface cells
            let sub = if f.needs_subdivision(&lo, &hi) || rho.needs_subdivision(&lo, &hi) {
                2usize
            } else {
                1
            };
            let nsub = 1usize << (sub - 1);
            for cellidx in 0..nsub.pow(dim as u32) {
                let mut clo = vec![0.0; dim];
                let mut chi = vec![0.0; dim];
                let mut rest = cellidx;
                for k in 0..dim {
                    let t = rest % nsub;
                    rest /= nsub;
                    let h = (hi[k] - lo[k]) / nsub as f64;
                    clo[k] = lo[k] + t as f64 * h;
                    chi[k] = clo[k] + h;
                }
                let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
                    .map(|k| gauss_on_interval(q, clo[k], chi[k]))
                    .collect();
                let mut qi = vec![0usize; dim];
                loop {
                    let mut w = 1.0;
                    for k in 0..dim {
                        w *= rules[k].1[qi[k]];
                        x[k] = rules[k].0[qi[k]];
                    }
                    let fx = f.value(&x);
                    let rv = rho.value(&x);
                    // evaluate the spline at x
                    let mut uh = 0.0;
                    let mut axvals: Vec<Vec<f64>> = Vec::with_capacity(dim);
                    for k in 0..dim {
                        let dd = self.axes[k].basis.eval_element(el[k], x[k], 0);
                        axvals.push(dd[0].clone());
                    }
                    for a in 0..p1.pow(dim as u32) {
                        let mut rest = a;
                        let mut row = 0usize;
                        let mut val = 1.0;
                        let mut ok = true;
                        for k in 0..dim {
                            let lk = rest % p1;
                            rest /= p1;
                            let fidx = el[k] + lk;
                            let ax = &self.axes[k];
                            if fidx < ax.start || fidx >= ax.end {
                                ok = false;
                                break;
                            }
                            row += (fidx - ax.start) * strides[k];
                            val *= axvals[k][lk];
                        }
                        if ok {
                            uh += coeffs[row] * val;
                        }
                    }
                    num += w * rv * (fx - uh) * (fx - uh);
                    den += w * rv * fx * fx;
                    if !advance_bounded(&mut qi, q, dim) {
                        break;
                    }
                }
            }
            if !advance(&mut el, &self.elements) {
                break;
            }
        }
        (num, den)
    }

    /// Coefficients of the monomial x^α on a natural space (Marsden tensor).
    pub fn monomial_coefficients(&self, alpha: &[usize]) -> DofVector {
        assert_eq!(alpha.len(), self.domain.dim());
        assert_eq!(
            self.bc,
            BoundaryCondition::Natural,
            "monomials are only represented exactly on natural spaces"
        );
        let per_axis: Vec<Vec<f64>> = (0..alpha.len())
            .map(|k| self.axes[k].basis.monomial_coefficients(alpha[k]))
            .collect();
        let d = self.axis_dofs();
        let n = self.dim();
        let mut out = vec![0.0; n];
        let mut strides = vec![1usize; d.len()];
        for k in 1..d.len() {
            strides[k] = strides[k - 1] * d[k - 1];
        }
        let mut multi = vec![0usize; d.len()];
        for item in out.iter_mut().take(n) {
            let mut v = 1.0;
            for k in 0..d.len() {
                v *= per_axis[k][multi[k]];
            }
            *item = v;
            advance(&mut multi, &d);
        }
        DofVector(out)
    }

    /// Dense prolongation onto the dyadic refinement (test-grade sizes).
    pub fn prolongation_to_refined(&self) -> DMatrix<f64> {
        assert_eq!(self.bc, BoundaryCondition::Natural);
        let mats: Vec<DMatrix<f64>> = self
            .axes
            .iter()
            .map(|a| a.basis.prolongation_to_refined())
            .collect();
        let mut out = mats[0].clone();
        for m in &mats[1..] {
            out = m.kronecker(&out);
        }
        out
    }

    /// Evaluate a coefficient vector at a point.
    pub fn evaluate(&self, coeffs: &DofVector, x: &[f64]) -> f64 {
        let dim = self.domain.dim();
        let p1 = self.degree + 1;
        let d = self.axis_dofs();
        let mut strides = vec![1usize; dim];
        for k in 1..dim {
            strides[k] = strides[k - 1] * d[k - 1];
        }
        let els: Vec<usize> = (0..dim)
            .map(|k| self.axes[k].basis.element_of(x[k]))
            .collect();
        let mut axvals: Vec<Vec<f64>> = Vec::with_capacity(dim);
        for k in 0..dim {
            let dd = self.axes[k].basis.eval_element(els[k], x[k], 0);
            axvals.push(dd[0].clone());
        }
        let mut total = 0.0;
        for a in 0..p1.pow(dim as u32) {
            let mut rest = a;
            let mut row = 0usize;
            let mut val = 1.0;
            let mut ok = true;
            for k in 0..dim {
                let lk = rest % p1;
                rest /= p1;
                let fidx = els[k] + lk;
                let ax = &self.axes[k];
                if fidx < ax.start || fidx >= ax.end {
                    ok = false;
                    break;
                }
                row += (fidx - ax.start) * strides[k];
                val *= axvals[k][lk];
            }
            if ok {
                total += coeffs.0[row] * val;
            }
        }
        total
    }
}

#[inline]
fn build_tensor_values(
    tables: &[AxisTable],
    el: &[usize],
    qi: &[usize],
    alpha: &[usize],
    dim: usize,
    p1: usize,
    out: &mut [f64],
) {
    match dim {
        1 => {
            let s = tables[0].der_slice(el[0], qi[0], alpha[0]);
            out[..p1].copy_from_slice(s);
        }
        2 => {
            let sx = tables[0].der_slice(el[0], qi[0], alpha[0]);
            let sy = tables[1].der_slice(el[1], qi[1], alpha[1]);
            let mut idx = 0;
            for vy in sy.iter().take(p1) {
                for vx in sx.iter().take(p1) {
                    out[idx] = vx * vy;
                    idx += 1;
                }
            }
        }
        3 => {
            let sx = tables[0].der_slice(el[0], qi[0], alpha[0]);
            let sy = tables[1].der_slice(el[1], qi[1], alpha[1]);
            let sz = tables[2].der_slice(el[2], qi[2], alpha[2]);
            let mut idx = 0;
            for vz in sz.iter().take(p1) {
                for vy in sy.iter().take(p1) {
                    let vyz = vy * vz;
                    for vx in sx.iter().take(p1) {
                        out[idx] = vx * vyz;
                        idx += 1;
                    }
                }
            }
        }
        _ => unreachable!(),
    }
}

/// Advance a mixed-radix counter; returns false on wrap-around.
fn advance(multi: &mut [usize], limits: &[usize]) -> bool {
    for k in 0..multi.len() {
        multi[k] += 1;
        if multi[k] < limits[k] {
            return true;
        }
        multi[k] = 0;
    }
    false
}

fn advance_bounded(multi: &mut [usize], limit: usize, dim: usize) -> bool {
    for k in 0..dim {
        multi[k] += 1;
        if multi[k] < limit {
            return true;
        }
        multi[k] = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Density, UnitWeight};
    use approx::assert_relative_eq;

    #[test]
    fn space_dimensions() {
        let iv = Domain::unit_interval();
        let s = DiscreteSpace::build(&iv, 1, 4, BoundaryCondition::Natural, 1).unwrap();
        assert_eq!(s.dim(), 5);
        let s = DiscreteSpace::build(&iv, 2, 8, BoundaryCondition::Clamped, 3).unwrap();
        assert_eq!(s.dim(), 7);
        let sq = Domain::unit_square();
        let s = DiscreteSpace::build(&sq, 1, 8, BoundaryCondition::Natural, 2).unwrap();
        assert_eq!(s.dim(), 100);
    }

    #[test]
    fn build_rejects_bad_inputs() {
        let iv = Domain::unit_interval();
        assert!(DiscreteSpace::build(&iv, 2, 4, BoundaryCondition::Natural, 1).is_err());
        assert!(DiscreteSpace::build(&iv, 1, 1, BoundaryCondition::Natural, 1).is_err());
        let sq = Domain::unit_square();
        assert!(DiscreteSpace::build(&sq, 1, 4, BoundaryCondition::Clamped, 1).is_err());
    }

    #[test]
    fn stiffness_matches_hand_assembly_p1() {
        // (0,1), m=1, degree 1, 2 elements: tridiag [2,-2;-2,4,-2;-2,2]
        let iv = Domain::unit_interval();
        let s = DiscreteSpace::build(&iv, 1, 2, BoundaryCondition::Natural, 1).unwrap();
        let k = s.assemble_stiffness();
        let expect = [[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0], [0.0, -2.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(k.entry(i, j), expect[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn mass_matches_hand_assembly_p1() {
        let iv = Domain::unit_interval();
        let s = DiscreteSpace::build(&iv, 1, 2, BoundaryCondition::Natural, 1).unwrap();
        let m = s.assemble_mass(&UnitWeight).matrix;
        let expect = [
            [1.0 / 6.0, 1.0 / 12.0, 0.0],
            [1.0 / 12.0, 1.0 / 3.0, 1.0 / 12.0],
            [0.0, 1.0 / 12.0, 1.0 / 6.0],
        ];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(m.entry(i, j), expect[i][j], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn stiffness_kernel_contains_low_monomials() {
        let sq = Domain::unit_square();
        for (m, p) in [(1usize, 2usize), (2, 2), (2, 3)] {
            let s = DiscreteSpace::build(&sq, m, 6, BoundaryCondition::Natural, p).unwrap();
            let k = s.assemble_stiffness();
            let scale = k.norm_inf();
            for ax in 0..m {
                for ay in 0..(m - ax) {
                    let c = s.monomial_coefficients(&[ax, ay]);
                    let r = k.apply(&c.0);
                    let worst = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    assert!(
                        worst < 1e-10 * scale,
                        "m={m} p={p} alpha=({ax},{ay}): residual {worst}"
                    );
                }
            }
        }
    }

    #[test]
    fn mass_partition_of_unity() {
        // 1ᵀ M 1 = ∫ρ
        let sq = Domain::unit_square();
        let s = DiscreteSpace::build(&sq, 1, 16, BoundaryCondition::Natural, 2)
            .unwrap()
            .with_quadrature(QuadratureRule {
                points_per_axis: 3,
                max_subdivision_depth: 6,
            });
        let rho = Density::point_concentration(&sq, 1, 0.12, 0.1, vec![0.43, 0.55]).unwrap();
        let asm = s.assemble_mass(&rho);
        assert!(asm.interface_cells > 0);
        let ones = vec![1.0; s.dim()];
        let total = asm.matrix.quadratic_form(&ones, &ones);
        // subdivision leaves a small interface error, bounded and recorded
        let exact = rho.mass(&sq);
        assert!(
            (total - exact).abs() <= asm.quadrature_error_bound + 1e-12,
            "total {total} exact {exact} bound {}",
            asm.quadrature_error_bound
        );
        assert_relative_eq!(total, exact, max_relative = 1e-3);
    }

    #[test]
    fn strip_mass_exact_for_partial_cells() {
        // axis-aligned interfaces are integrated exactly even when the strip
        // is thinner than a cell
        let sq = Domain::unit_square();
        let s = DiscreteSpace::build(&sq, 1, 8, BoundaryCondition::Natural, 2).unwrap();
        for eps in [0.03, 0.011, 0.004] {
            let rho = Density::steklov_family(&sq, eps).unwrap();
            let asm = s.assemble_mass(&rho);
            assert_eq!(asm.unresolved_leaves, 0);
            let ones = vec![1.0; s.dim()];
            let total = asm.matrix.quadratic_form(&ones, &ones);
            assert_relative_eq!(total, rho.mass(&sq), max_relative = 1e-12);
        }
    }

    #[test]
    fn mass_linear_in_density() {
        let iv = Domain::unit_interval();
        let s = DiscreteSpace::build(&iv, 1, 16, BoundaryCondition::Natural, 2).unwrap();
        let m1 = s.assemble_mass(&UnitWeight).matrix;
        let rho2 = Density::constant(2.0).unwrap();
        let m2 = s.assemble_mass(&rho2).matrix;
        for i in 0..s.dim() {
            for (j, v) in m1.row_entries(i) {
                assert_relative_eq!(m2.entry(i, j), 2.0 * v, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn boundary_mass_1d_endpoints() {
        let iv = Domain::unit_interval();
        let s = DiscreteSpace::build(&iv, 1, 2, BoundaryCondition::Natural, 1).unwrap();
        let b = s.assemble_boundary_mass().unwrap();
        assert_relative_eq!(b.entry(0, 0), 1.0, epsilon = 1e-14);
        assert_relative_eq!(b.entry(2, 2), 1.0, epsilon = 1e-14);
        assert_eq!(b.entry(1, 1), 0.0);
        assert_eq!(b.entry(0, 1), 0.0);
    }

    #[test]
    fn boundary_mass_partition_of_unity() {
        let sq = Domain::unit_square();
        let s = DiscreteSpace::build(&sq, 1, 6, BoundaryCondition::Natural, 2).unwrap();
        let b = s.assemble_boundary_mass().unwrap();
        let ones = vec![1.0; s.dim()];
        assert_relative_eq!(
            b.quadratic_form(&ones, &ones),
            sq.boundary_measure(),
            epsilon = 1e-10
        );
        // interior-supported rows vanish: dof (4,4) of the 8-per-axis basis
        let interior = 4 + 8 * 4;
        let row_norm: f64 = b.row_entries(interior).map(|(_, v)| v.abs()).sum();
        assert!(row_norm < 1e-14);
        let _ = DiscreteSpace::build(&Domain::unit_interval(), 1, 4, BoundaryCondition::Clamped, 1)
            .unwrap()
            .assemble_boundary_mass()
            .expect_err("clamped spaces have no boundary trace here");
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let iv = Domain::unit_interval();
        let s = DiscreteSpace::build(&iv, 1, 8, BoundaryCondition::Natural, 2).unwrap();
        let (c, res) = s.project(&|x: &[f64]| x[0], &UnitWeight).unwrap();
        assert!(res < 1e-12, "residual {res}");
        for &x in &[0.1, 0.5, 0.9] {
            assert_relative_eq!(s.evaluate(&c, &[x]), x, epsilon = 1e-12);
        }
        let (c1, res1) = s.project(&|_: &[f64]| 1.0, &UnitWeight).unwrap();
        assert!(res1 < 1e-12);
        assert_relative_eq!(s.evaluate(&c1, &[0.37]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nested_refinement_reproduces_stiffness() {
        let sq = Domain::unit_square();
        let s = DiscreteSpace::build(&sq, 1, 4, BoundaryCondition::Natural, 2).unwrap();
        let fine = s.refine_dyadic();
        let p = s.prolongation_to_refined();
        let kc = s.assemble_stiffness();
        let kf = fine.assemble_stiffness();
        // ||K_c - P^T K_f P||_inf relative to ||K_c||_inf
        let n = s.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            let pj: Vec<f64> = p.column(j).iter().copied().collect();
            let kpj = kf.apply(&pj);
            for i in 0..n {
                let pi: Vec<f64> = p.column(i).iter().copied().collect();
                let v: f64 = pi.iter().zip(&kpj).map(|(a, b)| a * b).sum();
                worst = worst.max((kc.entry(i, j) - v).abs());
            }
        }
        assert!(worst < 1e-9 * kc.norm_inf(), "mismatch {worst}");
    }

    #[test]
    fn symmetry_is_structural() {
        let sq = Domain::unit_square();
        let s = DiscreteSpace::build(&sq, 2, 5, BoundaryCondition::Natural, 3).unwrap();
        let k = s.assemble_stiffness();
        assert_eq!(k.asymmetry(), 0.0);
        let rho = Density::steklov_family(&sq, 0.11).unwrap();
        let m = s.assemble_mass(&rho).matrix;
        assert_eq!(m.asymmetry(), 0.0);
    }

    #[test]
    fn coordinate_export_format() {
        let iv = Domain::unit_interval();
        let s = DiscreteSpace::build(&iv, 1, 2, BoundaryCondition::Natural, 1).unwrap();
        let k = s.assemble_stiffness();
        let mut buf = Vec::new();
        k.write_coordinate_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("0 0 2.0000000000000"), "{first}");
    }
}
