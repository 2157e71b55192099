//! Polynomial displacement spaces built from scaled Legendre polynomials on
//! the bounding box, orthonormalized in L²(Ω).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{volume_quadrature, Domain, QuadratureRule};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::math3::{cross_matrix, Mat3, Vec3};

/// Relative eigenvalue cutoff when orthonormalizing the generators.
pub const GRAM_CUTOFF: f64 = 1e-12;
/// Relative L² defect below which an analytic rigid field counts as representable.
const RIGID_REPRESENTABLE_TOL: f64 = 1e-10;
pub(crate) const CHUNK: usize = 128;
pub(crate) const GROUPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    /// Every component a polynomial of total degree `≤ degree`.
    Full { degree: usize },
    /// `(u_y, −u_x, w(z))` with `u(x, y)` of degree `≤ degree2d` and `w` of degree `≤ degree1d`.
    AnsatzK { degree2d: usize, degree1d: usize },
    /// The planar part `(u_y, −u_x, 0)` only; divergence free.
    AnsatzKdiv { degree2d: usize },
    /// `curl A` with `A` of degree `≤ degree + 1`; divergence free, fields of degree `≤ degree`.
    CurlPotential { degree: usize },
}

impl SpaceKind {
    /// Highest polynomial degree of the displacement fields.
    pub fn field_degree(&self) -> usize {
        match *self {
            Self::Full { degree } | Self::CurlPotential { degree } => degree,
            Self::AnsatzK { degree2d, degree1d } => degree2d.saturating_sub(1).max(degree1d),
            Self::AnsatzKdiv { degree2d } => degree2d.saturating_sub(1),
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        matches!(self, Self::AnsatzKdiv { .. } | Self::CurlPotential { .. })
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Full { degree } | Self::CurlPotential { degree } => degree >= 1,
            Self::AnsatzK { degree2d, .. } | Self::AnsatzKdiv { degree2d } => degree2d >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("space degree must be at least 1: {self:?}")))
        }
    }
}

/// One unnormalized generator; `i, j, k` are Legendre indices in `x, y, z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Generator {
    Component { comp: usize, i: usize, j: usize, k: usize },
    Planar { i: usize, j: usize },
    Axial { k: usize },
    Curl { comp: usize, i: usize, j: usize, k: usize },
}

fn total_degree_triples(max: usize, skip_constant: bool) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for deg in 0..=max {
        if skip_constant && deg == 0 {
            continue;
        }
        for i in (0..=deg).rev() {
            for j in (0..=deg - i).rev() {
                out.push((i, j, deg - i - j));
            }
        }
    }
    out
}

fn generators(kind: &SpaceKind) -> (Vec<Generator>, usize) {
    let mut gens = Vec::new();
    let max_deg;
    match *kind {
        SpaceKind::Full { degree } => {
            max_deg = degree;
            for (i, j, k) in total_degree_triples(degree, false) {
                for comp in 0..3 {
                    gens.push(Generator::Component { comp, i, j, k });
                }
            }
        }
        SpaceKind::AnsatzK { degree2d, degree1d } => {
            max_deg = degree2d.max(degree1d);
            for (i, j, _) in total_degree_triples(degree2d, true).into_iter().filter(|t| t.2 == 0) {
                gens.push(Generator::Planar { i, j });
            }
            for k in 0..=degree1d {
                gens.push(Generator::Axial { k });
            }
        }
        SpaceKind::AnsatzKdiv { degree2d } => {
            max_deg = degree2d;
            for (i, j, _) in total_degree_triples(degree2d, true).into_iter().filter(|t| t.2 == 0) {
                gens.push(Generator::Planar { i, j });
            }
        }
        SpaceKind::CurlPotential { degree } => {
            max_deg = degree + 1;
            for (i, j, k) in total_degree_triples(degree + 1, true) {
                for comp in 0..3 {
                    gens.push(Generator::Curl { comp, i, j, k });
                }
            }
        }
    }
    (gens, max_deg)
}

/// Legendre values and first two derivatives in one scaled coordinate.
struct Table1d {
    p: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Table1d {
    fn new(n: usize, s: f64, inv_half: f64) -> Self {
        let mut p = vec![0.0; n + 1];
        let mut d1 = vec![0.0; n + 1];
        let mut d2 = vec![0.0; n + 1];
        p[0] = 1.0;
        if n >= 1 {
            p[1] = s;
            d1[1] = 1.0;
        }
        for m in 1..n {
            let mf = m as f64;
            p[m + 1] = ((2.0 * mf + 1.0) * s * p[m] - mf * p[m - 1]) / (mf + 1.0);
            d1[m + 1] = d1[m - 1] + (2.0 * mf + 1.0) * p[m];
            d2[m + 1] = d2[m - 1] + (2.0 * mf + 1.0) * d1[m];
        }
        for v in &mut d1 {
            *v *= inv_half;
        }
        for v in &mut d2 {
            *v *= inv_half * inv_half;
        }
        Self { p, d1, d2 }
    }
}

/// Per-node Legendre tables in the three coordinates.
pub(crate) struct NodeTables([Table1d; 3]);

impl NodeTables {
    /// Gradient and Hessian of `P_i(x) P_j(y) P_k(z)`, plus its value.
    fn scalar(&self, i: usize, j: usize, k: usize) -> (f64, Vec3, Mat3) {
        let [tx, ty, tz] = &self.0;
        let (px, py, pz) = (tx.p[i], ty.p[j], tz.p[k]);
        let (dx, dy, dz) = (tx.d1[i], ty.d1[j], tz.d1[k]);
        let grad = Vec3::new(dx * py * pz, px * dy * pz, px * py * dz);
        let hxy = dx * dy * pz;
        let hxz = dx * py * dz;
        let hyz = px * dy * dz;
        let hess = Mat3::new(tx.d2[i] * py * pz, hxy, hxz, hxy, px * ty.d2[j] * pz, hyz, hxz, hyz, px * py * tz.d2[k]);
        (px * py * pz, grad, hess)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidMode {
    /// `translation_x`, `rotation_z`, …; modes are orthonormalized in this order.
    pub label: String,
    pub coefficients: Vec<f64>,
}

/// A finite-dimensional space of displacement fields with an L²(Ω)-orthonormal basis.
#[derive(Debug, Clone)]
pub struct GalerkinSpace {
    kind: SpaceKind,
    domain: Domain,
    quadrature_order: usize,
    gens: Vec<Generator>,
    max_deg: usize,
    center: Vec3,
    inv_half: Vec3,
    /// Raw-generator coefficients of each orthonormal basis field (columns).
    transform: DMatrix<f64>,
    rigid_modes: Vec<RigidMode>,
}

/// The quadrature order actually used for a space: at least `degree + 2` so that
/// the mass matrix is integrated exactly.
pub fn effective_order(kind: &SpaceKind, requested: usize) -> usize {
    requested.max(kind.field_degree() + 2)
}

type RigidField = Box<dyn Fn(&Vec3) -> Vec3 + Sync>;

fn rigid_fields() -> Vec<(&'static str, RigidField)> {
    vec![
        ("translation_x", Box::new(|_: &Vec3| Vec3::x())),
        ("translation_y", Box::new(|_: &Vec3| Vec3::y())),
        ("translation_z", Box::new(|_: &Vec3| Vec3::z())),
        ("rotation_x", Box::new(|x: &Vec3| cross_matrix(&Vec3::x()) * x)),
        ("rotation_y", Box::new(|x: &Vec3| cross_matrix(&Vec3::y()) * x)),
        ("rotation_z", Box::new(|x: &Vec3| cross_matrix(&Vec3::z()) * x)),
    ]
}

/// Runs `f` over fixed contiguous node groups in parallel and returns the
/// per-group results in group order; the split does not depend on the thread count.
pub(crate) fn grouped<T: Send, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let size = n.div_ceil(GROUPS).max(1);
    (0..GROUPS)
        .into_par_iter()
        .filter_map(|g| {
            let start = g * size;
            (start < n).then(|| f(start..(start + size).min(n)))
        })
        .collect()
}

impl GalerkinSpace {
    pub fn build(kind: SpaceKind, domain: Domain, quadrature_order: usize) -> Result<Self> {
        kind.validate()?;
        domain.validate()?;
        let order = effective_order(&kind, quadrature_order);
        let rule = volume_quadrature(&domain, order)?;
        let (gens, max_deg) = generators(&kind);
        let (lo, hi) = domain.bounding_box();
        let center = (lo + hi) * 0.5;
        let half = (hi - lo) * 0.5;
        let mut space = Self {
            kind,
            domain,
            quadrature_order: order,
            gens,
            max_deg,
            center,
            inv_half: half.map(|h| 1.0 / h),
            transform: DMatrix::zeros(0, 0),
            rigid_modes: Vec::new(),
        };
        let n = space.gens.len();
        let rigid = rigid_fields();

        // raw Gram matrix and raw moments against the analytic rigid fields
        let parts = grouped(rule.len(), |range| {
            let mut gram = DMatrix::<f64>::zeros(n, n);
            let mut moments = DMatrix::<f64>::zeros(n, rigid.len());
            let mut rigid_norms = vec![0.0; rigid.len()];
            let mut vals = vec![Vec3::zeros(); n];
            let mut grads = vec![Mat3::zeros(); n];
            for chunk_start in range.clone().step_by(CHUNK) {
                let chunk = chunk_start..(chunk_start + CHUNK).min(range.end);
                let mut vt = DMatrix::<f64>::zeros(n, 3 * chunk.len());
                for (t, q) in chunk.clone().enumerate() {
                    let x = &rule.nodes[q];
                    let w = rule.weights[q];
                    space.eval_raw(x, &mut vals, &mut grads);
                    let sw = w.sqrt();
                    for (i, v) in vals.iter().enumerate() {
                        for c in 0..3 {
                            vt[(i, 3 * t + c)] = sw * v[c];
                        }
                    }
                    for (m, (_, r)) in rigid.iter().enumerate() {
                        let rv = r(x);
                        rigid_norms[m] += w * rv.norm_squared();
                        for (i, v) in vals.iter().enumerate() {
                            moments[(i, m)] += w * v.dot(&rv);
                        }
                    }
                }
                gram.gemm(1.0, &vt, &vt.transpose(), 1.0);
            }
            (gram, moments, rigid_norms)
        });
        let mut gram = DMatrix::<f64>::zeros(n, n);
        let mut moments = DMatrix::<f64>::zeros(n, rigid.len());
        let mut rigid_norms = vec![0.0; rigid.len()];
        for (g, m, r) in parts {
            gram += g;
            moments += m;
            for (a, b) in rigid_norms.iter_mut().zip(r) {
                *a += b;
            }
        }

        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if !(lmax > 0.0) {
            return Err(Error::Assembly("empty Gram matrix".into()));
        }
        let mut keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > GRAM_CUTOFF * lmax).collect();
        keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let mut transform = DMatrix::<f64>::zeros(n, keep.len());
        for (col, &i) in keep.iter().enumerate() {
            let mut v = eig.eigenvectors.column(i).into_owned();
            // deterministic sign: largest entry positive
            let imax = v.iamax();
            if v[imax] < 0.0 {
                v.neg_mut();
            }
            transform.set_column(col, &(v / eig.eigenvalues[i].sqrt()));
        }

        // L² projection of the rigid fields onto the orthonormal basis
        let proj = transform.transpose() * moments;
        let mut modes: Vec<(String, DVector<f64>)> = Vec::new();
        for (m, (label, _)) in rigid.iter().enumerate() {
            let c = proj.column(m).into_owned();
            let defect = (rigid_norms[m] - c.norm_squared()).max(0.0) / rigid_norms[m];
            if defect < RIGID_REPRESENTABLE_TOL {
                modes.push((label.to_string(), c));
            }
        }
        // modified Gram–Schmidt in coefficient space (= L² since the basis is orthonormal)
        let mut rigid_modes = Vec::new();
        let mut done: Vec<DVector<f64>> = Vec::new();
        for (label, mut c) in modes {
            for d in &done {
                let p = d.dot(&c);
                c.axpy(-p, d, 1.0);
            }
            let nrm = c.norm();
            if nrm < 1e-8 {
                return Err(Error::Assembly(format!("rigid mode {label} is dependent on the others")));
            }
            c /= nrm;
            rigid_modes.push(RigidMode { label, coefficients: c.iter().copied().collect() });
            done.push(c);
        }

        space.transform = transform;
        space.rigid_modes = rigid_modes;
        Ok(space)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn dim(&self) -> usize {
        self.transform.ncols()
    }

    pub fn raw_len(&self) -> usize {
        self.gens.len()
    }

    pub fn rigid_modes(&self) -> &[RigidMode] {
        &self.rigid_modes
    }

    pub(crate) fn transform(&self) -> &DMatrix<f64> {
        &self.transform
    }

    pub fn volume_rule(&self) -> Result<QuadratureRule> {
        volume_quadrature(&self.domain, self.quadrature_order)
    }

    pub(crate) fn tables(&self, x: &Vec3) -> NodeTables {
        let s = (x - self.center).component_mul(&self.inv_half);
        NodeTables([
            Table1d::new(self.max_deg, s.x, self.inv_half.x),
            Table1d::new(self.max_deg, s.y, self.inv_half.y),
            Table1d::new(self.max_deg, s.z, self.inv_half.z),
        ])
    }

    /// Values and gradients of all raw generators at `x`.
    pub(crate) fn eval_raw(&self, x: &Vec3, vals: &mut [Vec3], grads: &mut [Mat3]) {
        let t = self.tables(x);
        for (g, (v, d)) in self.gens.iter().zip(vals.iter_mut().zip(grads.iter_mut())) {
            match *g {
                Generator::Component { comp, i, j, k } => {
                    let (p, grad, _) = t.scalar(i, j, k);
                    *v = Vec3::zeros();
                    v[comp] = p;
                    *d = Mat3::zeros();
                    d.set_row(comp, &grad.transpose());
                }
                Generator::Planar { i, j } => {
                    let (_, g1, h) = t.scalar(i, j, 0);
                    *v = Vec3::new(g1.y, -g1.x, 0.0);
                    *d = Mat3::new(h[(0, 1)], h[(1, 1)], 0.0, -h[(0, 0)], -h[(0, 1)], 0.0, 0.0, 0.0, 0.0);
                }
                Generator::Axial { k } => {
                    let (p, g1, _) = t.scalar(0, 0, k);
                    *v = Vec3::new(0.0, 0.0, p);
                    *d = Mat3::zeros();
                    d[(2, 2)] = g1.z;
                }
                Generator::Curl { comp, i, j, k } => {
                    // curl(p e_c) = ∇p × e_c
                    let (_, g1, h) = t.scalar(i, j, k);
                    let mut e = Vec3::zeros();
                    e[comp] = 1.0;
                    *v = g1.cross(&e);
                    for col in 0..3 {
                        d.set_column(col, &h.column(col).into_owned().cross(&e));
                    }
                }
            }
        }
    }

    /// Orthonormal-basis coefficients to raw-generator coefficients.
    pub fn raw_coefficients(&self, coeffs: &[f64]) -> Result<DVector<f64>> {
        if coeffs.len() != self.dim() {
            return Err(Error::invalid(format!("expected {} coefficients, got {}", self.dim(), coeffs.len())));
        }
        Ok(&self.transform * DVector::from_column_slice(coeffs))
    }

    /// The field `Σ cᵢ bᵢ`.
    pub fn field(&self, coeffs: &[f64]) -> Result<SpaceField<'_>> {
        Ok(SpaceField { space: self, raw: self.raw_coefficients(coeffs)? })
    }

    /// The `i`-th orthonormal basis field.
    pub fn basis_field(&self, i: usize) -> Result<SpaceField<'_>> {
        if i >= self.dim() {
            return Err(Error::invalid(format!("basis index {i} out of range {}", self.dim())));
        }
        Ok(SpaceField { space: self, raw: self.transform.column(i).into_owned() })
    }

    /// Values and gradients of every orthonormal basis field at `nodes`, node-major.
    pub fn tabulate(&self, nodes: &[Vec3]) -> BasisTable {
        let n = self.raw_len();
        let dim = self.dim();
        let tt = self.transform.transpose();
        let parts = grouped(nodes.len(), |range| {
            let mut values = Vec::with_capacity(range.len() * dim);
            let mut grads = Vec::with_capacity(range.len() * dim);
            let mut vals = vec![Vec3::zeros(); n];
            let mut gr = vec![Mat3::zeros(); n];
            for chunk_start in range.clone().step_by(CHUNK) {
                let chunk = chunk_start..(chunk_start + CHUNK).min(range.end);
                let mut raw = DMatrix::<f64>::zeros(n, 12 * chunk.len());
                for (t, q) in chunk.clone().enumerate() {
                    self.eval_raw(&nodes[q], &mut vals, &mut gr);
                    for i in 0..n {
                        for c in 0..3 {
                            raw[(i, 12 * t + c)] = vals[i][c];
                        }
                        for (c, g) in gr[i].iter().enumerate() {
                            raw[(i, 12 * t + 3 + c)] = *g;
                        }
                    }
                }
                let out = &tt * raw;
                for t in 0..chunk.len() {
                    for b in 0..dim {
                        values.push(Vec3::new(out[(b, 12 * t)], out[(b, 12 * t + 1)], out[(b, 12 * t + 2)]));
                        grads.push(Mat3::from_iterator((0..9).map(|c| out[(b, 12 * t + 3 + c)])));
                    }
                }
            }
            (values, grads)
        });
        let mut values = Vec::with_capacity(nodes.len() * dim);
        let mut grads = Vec::with_capacity(nodes.len() * dim);
        for (v, g) in parts {
            values.extend(v);
            grads.extend(g);
        }
        BasisTable { dim, values, grads }
    }
}

/// Basis values and gradients at a list of nodes; entry `q * dim + b`.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub dim: usize,
    pub values: Vec<Vec3>,
    pub grads: Vec<Mat3>,
}

impl BasisTable {
    pub fn value(&self, node: usize, coeffs: &[f64]) -> Vec3 {
        let row = &self.values[node * self.dim..(node + 1) * self.dim];
        row.iter().zip(coeffs).fold(Vec3::zeros(), |acc, (v, c)| acc + v * *c)
    }

    pub fn gradient(&self, node: usize, coeffs: &[f64]) -> Mat3 {
        let row = &self.grads[node * self.dim..(node + 1) * self.dim];
        row.iter().zip(coeffs).fold(Mat3::zeros(), |acc, (g, c)| acc + g * *c)
    }
}

/// A field in a [`GalerkinSpace`], stored by raw-generator coefficients.
pub struct SpaceField<'a> {
    space: &'a GalerkinSpace,
    raw: DVector<f64>,
}

impl SpaceField<'_> {
    fn eval(&self, x: &Vec3) -> (Vec3, Mat3) {
        let n = self.space.raw_len();
        let mut vals = vec![Vec3::zeros(); n];
        let mut grads = vec![Mat3::zeros(); n];
        self.space.eval_raw(x, &mut vals, &mut grads);
        let mut v = Vec3::zeros();
        let mut g = Mat3::zeros();
        for i in 0..n {
            v += vals[i] * self.raw[i];
            g += grads[i] * self.raw[i];
        }
        (v, g)
    }
}

impl VectorField for SpaceField<'_> {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.eval(x).0
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.eval(x).1
    }
}
