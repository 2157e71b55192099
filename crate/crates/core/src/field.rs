//! Vector fields with values and gradients.

use crate::math3::{sym, Mat3, Vec3};

/// A displacement field on the reference configuration.
///
/// `gradient(x)[(j, k)] = ∂v_j/∂x_k`.
pub trait VectorField: Sync {
    fn value(&self, x: &Vec3) -> Vec3;
    fn gradient(&self, x: &Vec3) -> Mat3;

    fn strain(&self, x: &Vec3) -> Mat3 {
        sym(&self.gradient(x))
    }

    fn divergence(&self, x: &Vec3) -> f64 {
        self.gradient(x).trace()
    }
}

/// Symmetric gradient `½(∇vᵀ + ∇v)`.
pub fn strain<V: VectorField + ?Sized>(v: &V, x: &Vec3) -> Mat3 {
    v.strain(x)
}

/// Field given by two closures.
pub struct FnField<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> VectorField for FnField<F, G>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
    G: Fn(&Vec3) -> Mat3 + Sync,
{
    fn value(&self, x: &Vec3) -> Vec3 {
        (self.value)(x)
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        (self.gradient)(x)
    }
}

/// Affine field `x ↦ a + Bx`.
#[derive(Debug, Clone, Copy)]
pub struct AffineField {
    pub offset: Vec3,
    pub matrix: Mat3,
}

impl VectorField for AffineField {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.offset + self.matrix * x
    }

    fn gradient(&self, _x: &Vec3) -> Mat3 {
        self.matrix
    }
}

/// Sum of two fields.
pub struct SumField<'a, A: ?Sized, B: ?Sized>(pub &'a A, pub &'a B);

impl<A: VectorField + ?Sized, B: VectorField + ?Sized> VectorField for SumField<'_, A, B> {
    fn value(&self, x: &Vec3) -> Vec3 {
        self.0.value(x) + self.1.value(x)
    }

    fn gradient(&self, x: &Vec3) -> Mat3 {
        self.0.gradient(x) + self.1.gradient(x)
    }
}

/// Fourth-order central differences of `v` with step `h`.
pub fn fd_gradient<F: Fn(&Vec3) -> Vec3>(v: F, x: &Vec3, h: f64) -> Mat3 {
    let mut g = Mat3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        let d = (v(&(x - 2.0 * e)) - v(&(x + 2.0 * e)) + 8.0 * (v(&(x + e)) - v(&(x - e)))) / (12.0 * h);
        g.set_column(k, &d);
    }
    g
}

/// Fourth-order central-difference divergence of a matrix field, row-wise: `(div S)_j = Σ_k ∂S_jk/∂x_k`.
pub fn fd_divergence<F: Fn(&Vec3) -> Mat3>(s: F, x: &Vec3, h: f64) -> Vec3 {
    let mut out = Vec3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        let d = (s(&(x - 2.0 * e)) - s(&(x + 2.0 * e)) + (s(&(x + e)) - s(&(x - e))) * 8.0) / (12.0 * h);
        out += d.column(k);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn strain_examples() {
        let w = crate::math3::skew_matrix(crate::math3::SkewParams::new(0.2, 0.5, -1.0));
        let rot = AffineField { offset: Vec3::zeros(), matrix: w };
        assert_eq!(strain(&rot, &Vec3::new(0.1, 0.2, 0.3)), Mat3::zeros());
        let id = AffineField { offset: Vec3::zeros(), matrix: Mat3::identity() };
        assert_eq!(strain(&id, &Vec3::zeros()), Mat3::identity());
        let shear = AffineField { offset: Vec3::zeros(), matrix: Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0) };
        let e = strain(&shear, &Vec3::zeros());
        assert_eq!(e, Mat3::new(0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn fd_gradient_is_exact_on_cubics() {
        let v = |x: &Vec3| Vec3::new(x.x * x.y * x.y, x.z.powi(3), x.x + x.y * x.z);
        let x = Vec3::new(0.3, -0.2, 0.7);
        let exact = Mat3::new(x.y * x.y, 2.0 * x.x * x.y, 0.0, 0.0, 0.0, 3.0 * x.z * x.z, 1.0, x.z, x.y);
        assert_relative_eq!(fd_gradient(v, &x, 1e-3), exact, epsilon = 1e-10);
    }
}
