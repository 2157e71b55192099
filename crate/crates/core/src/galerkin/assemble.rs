use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::space::{grouped, GalerkinSpace, CHUNK};
use crate::error::{Error, Result};
use crate::loads::{LoadEvaluator, LoadSpec};
use crate::math3::{Mat3, Vec3};

/// Relative eigenvalue threshold identifying the numerical kernel of `A`.
pub const KERNEL_EIG_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AssembleOptions {
    /// Adds `κ ∫ div bᵢ div bⱼ` to the stiffness.
    pub incompressible_penalty: Option<f64>,
}

/// Quadratic model `½cᵀAc − cᵀb(R)` in the orthonormal basis of a space.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    /// `Aᵢⱼ = 8∫ 𝔼(bᵢ):𝔼(bⱼ)`, without penalty.
    pub stiffness: DMatrix<f64>,
    /// `∫ div bᵢ div bⱼ`.
    pub div_div: DMatrix<f64>,
    pub kappa: Option<f64>,
    /// `B_jk[i] = L(e_j e_kᵀ bᵢ)`, row-major in `(j, k)`; `b(R) = Σ R_jk B_jk`.
    pub load_blocks: Vec<DVector<f64>>,
    pub rigid_modes: Vec<DVector<f64>>,
    pub rigid_labels: Vec<String>,
    /// Eigenvalues of the stiffness below the kernel threshold.
    pub kernel_eigenvalues: Vec<f64>,
}

impl StiffnessSystem {
    pub fn dim(&self) -> usize {
        self.stiffness.nrows()
    }

    /// `A + κ D`.
    pub fn matrix(&self) -> DMatrix<f64> {
        match self.kappa {
            Some(k) => &self.stiffness + &self.div_div * k,
            None => self.stiffness.clone(),
        }
    }

    /// `bᵢ(R) = L(R bᵢ)`.
    pub fn load_vector(&self, r: &Mat3) -> DVector<f64> {
        let mut b = DVector::zeros(self.dim());
        for j in 0..3 {
            for k in 0..3 {
                b.axpy(r[(j, k)], &self.load_blocks[3 * j + k], 1.0);
            }
        }
        b
    }

    /// `½cᵀAc − cᵀb`, penalty included.
    pub fn energy(&self, c: &DVector<f64>, b: &DVector<f64>) -> f64 {
        0.5 * c.dot(&(self.matrix() * c)) - c.dot(b)
    }

    /// Removes the rigid-mode components of `v`.
    pub fn project(&self, v: &mut DVector<f64>) {
        for m in &self.rigid_modes {
            let p = m.dot(v);
            v.axpy(-p, m, 1.0);
        }
    }

    pub fn with_penalty(&self, kappa: Option<f64>) -> Self {
        Self { kappa, ..self.clone() }
    }
}

/// Stiffness, divergence penalty and load blocks by quadrature.
pub fn assemble(space: &GalerkinSpace, spec: &LoadSpec, options: &AssembleOptions) -> Result<StiffnessSystem> {
    if let Some(k) = options.incompressible_penalty {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("penalty must be a finite nonnegative number, got {k}")));
        }
    }
    if spec.domain != space.domain() {
        return Err(Error::invalid("load domain differs from the space domain"));
    }
    let loads = LoadEvaluator::new(spec, space.quadrature_order())?;
    let rule = loads.volume_rule();
    let forces = loads.weighted_forces();
    let n = space.raw_len();
    let s2 = std::f64::consts::SQRT_2;

    let parts = grouped(rule.len(), |range| {
        let mut stiff = DMatrix::<f64>::zeros(n, n);
        let mut divdiv = DMatrix::<f64>::zeros(n, n);
        let mut blocks = DMatrix::<f64>::zeros(n, 9);
        let mut vals = vec![Vec3::zeros(); n];
        let mut grads = vec![Mat3::zeros(); n];
        for chunk_start in range.clone().step_by(CHUNK) {
            let chunk = chunk_start..(chunk_start + CHUNK).min(range.end);
            let mut st = DMatrix::<f64>::zeros(n, 6 * chunk.len());
            let mut dt = DMatrix::<f64>::zeros(n, chunk.len());
            for (t, q) in chunk.clone().enumerate() {
                let x = &rule.nodes[q];
                let sw = rule.weights[q].sqrt();
                let wf = forces[q];
                space.eval_raw(x, &mut vals, &mut grads);
                for i in 0..n {
                    let g = &grads[i];
                    // strain components with the √2 weight on shears, so row dot = E:E
                    st[(i, 6 * t)] = sw * g[(0, 0)];
                    st[(i, 6 * t + 1)] = sw * g[(1, 1)];
                    st[(i, 6 * t + 2)] = sw * g[(2, 2)];
                    st[(i, 6 * t + 3)] = sw * 0.5 * s2 * (g[(0, 1)] + g[(1, 0)]);
                    st[(i, 6 * t + 4)] = sw * 0.5 * s2 * (g[(0, 2)] + g[(2, 0)]);
                    st[(i, 6 * t + 5)] = sw * 0.5 * s2 * (g[(1, 2)] + g[(2, 1)]);
                    dt[(i, t)] = sw * g.trace();
                    let v = vals[i];
                    for j in 0..3 {
                        for k in 0..3 {
                            blocks[(i, 3 * j + k)] += wf[j] * v[k];
                        }
                    }
                }
            }
            stiff.gemm(8.0, &st, &st.transpose(), 1.0);
            divdiv.gemm(1.0, &dt, &dt.transpose(), 1.0);
        }
        (stiff, divdiv, blocks)
    });
    let mut stiff = DMatrix::<f64>::zeros(n, n);
    let mut divdiv = DMatrix::<f64>::zeros(n, n);
    let mut blocks = DMatrix::<f64>::zeros(n, 9);
    for (s, d, b) in parts {
        stiff += s;
        divdiv += d;
        blocks += b;
    }
    // surface tractions contribute to the loads only
    let mut vals = vec![Vec3::zeros(); n];
    let mut grads = vec![Mat3::zeros(); n];
    for (x, wg) in loads.surface_nodes().iter().zip(loads.weighted_tractions()) {
        space.eval_raw(x, &mut vals, &mut grads);
        for i in 0..n {
            for j in 0..3 {
                for k in 0..3 {
                    blocks[(i, 3 * j + k)] += wg[j] * vals[i][k];
                }
            }
        }
    }

    let t = space.transform();
    let tt = t.transpose();
    let mut a = &tt * stiff * t;
    let mut d = &tt * divdiv * t;
    symmetrize(&mut a);
    symmetrize(&mut d);
    let bt = &tt * blocks;
    let load_blocks = (0..9).map(|c| bt.column(c).into_owned()).collect();
    let rigid_modes: Vec<DVector<f64>> =
        space.rigid_modes().iter().map(|m| DVector::from_column_slice(&m.coefficients)).collect();
    let rigid_labels = space.rigid_modes().iter().map(|m| m.label.clone()).collect();

    let kernel_eigenvalues = check_kernel(&a, &rigid_modes)?;
    Ok(StiffnessSystem {
        stiffness: a,
        div_div: d,
        kappa: options.incompressible_penalty,
        load_blocks,
        rigid_modes,
        rigid_labels,
        kernel_eigenvalues,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Cross-checks the numerical kernel of `A` against the analytic rigid modes.
fn check_kernel(a: &DMatrix<f64>, modes: &[DVector<f64>]) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::new(a.clone());
    let norm = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if norm == 0.0 {
        return Err(Error::Assembly("stiffness matrix vanishes".into()));
    }
    let mut small: Vec<f64> = eig.eigenvalues.iter().copied().filter(|v| v.abs() < KERNEL_EIG_TOL * norm).collect();
    small.sort_by(f64::total_cmp);
    if small.len() != modes.len() {
        return Err(Error::Assembly(format!(
            "stiffness kernel has dimension {} but {} rigid modes are representable",
            small.len(),
            modes.len()
        )));
    }
    for (i, m) in modes.iter().enumerate() {
        let r = (a * m).norm();
        if r > 1e-9 * norm {
            return Err(Error::Assembly(format!("rigid mode {i} is not in the kernel: |A m| = {r:e}")));
        }
    }
    Ok(small)
}
