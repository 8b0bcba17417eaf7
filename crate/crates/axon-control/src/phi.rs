//! The vector gain `phi(x)` of the output-feedback control law.
//!
//! `phi` solves the second-order linear ODE system (row-vector form)
//!
//! ```text
//! D phi''(x)^T = phi(x)^T (A + g I + (a/D) B H^T)
//!               + phi'(x)^T (a I - B H^T)
//! phi(0) = H,  phi'(0)^T = K - (H^T B / D) H^T
//! ```
//!
//! which comes out of requiring the control transformation to map the
//! observer states onto the damped target system: the initial values make
//! the transformed state vanish at the moving boundary and give the target
//! ODE matrix `A + B K`. The companion form stacks `z = [phi^T, phi'^T]`
//! so that `z(x) = z(0) exp(N1 x)`.

use crate::linalg::{expm4, mat4_zero, row4_mul_mat4, Mat4, Vec2};
use crate::model::LinearModel;
use crate::scalar::Scalar;

/// Evaluator for `phi(x)` and `phi'(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiGain<T> {
    /// Companion matrix of the second-order ODE system.
    pub n1: Mat4<T>,
    /// Initial row `[phi(0)^T, phi'(0)^T]`.
    pub lead: [T; 4],
}

impl<T: Scalar> PhiGain<T> {
    /// Builds the evaluator from the linearized model, the plant constants
    /// embedded in it, and the controller row `K`.
    pub fn new(model: &LinearModel<T>, degradation: T, advection: T, diffusivity: T, k_row: &Vec2<T>) -> Self {
        let d = diffusivity;
        let a = advection;
        let g = degradation;
        let b = model.b_vector;
        let h = model.h_vector;
        let amat = model.a_matrix;

        // M1 = (A + g I + (a/D) B H^T) / D, M2 = (a I - B H^T) / D.
        let mut m1 = [[T::zero(); 2]; 2];
        let mut m2 = [[T::zero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let bh = b[i] * h[j];
                let eye = if i == j { T::one() } else { T::zero() };
                m1[i][j] = (amat[i][j] + g * eye + a / d * bh) / d;
                m2[i][j] = (a * eye - bh) / d;
            }
        }
        let mut n1 = mat4_zero();
        for i in 0..2 {
            for j in 0..2 {
                n1[i][2 + j] = m1[i][j];
                n1[2 + i][j] = if i == j { T::one() } else { T::zero() };
                n1[2 + i][2 + j] = m2[i][j];
            }
        }

        let hb = h[0] * b[0] + h[1] * b[1];
        let lead = [
            h[0],
            h[1],
            k_row[0] - hb / d * h[0],
            k_row[1] - hb / d * h[1],
        ];
        PhiGain { n1, lead }
    }

    fn row_at(&self, x: T) -> [T; 4] {
        let e = expm4(&crate::linalg::mat4_scale(x, &self.n1));
        row4_mul_mat4(&self.lead, &e)
    }

    /// `phi(x)` (column of the row `phi(x)^T`).
    pub fn phi(&self, x: T) -> Vec2<T> {
        let z = self.row_at(x);
        [z[0], z[1]]
    }

    /// `phi'(x)`.
    pub fn dphi(&self, x: T) -> Vec2<T> {
        let z = self.row_at(x);
        [z[2], z[3]]
    }

    /// Tabulates `(phi, phi')` at `x_start + k * step` for `k = 0..count`.
    ///
    /// One matrix exponential for the whole batch: the companion row is
    /// propagated with the semigroup property, which is exact.
    pub fn tabulate(&self, x_start: T, step: T, count: usize) -> Vec<(Vec2<T>, Vec2<T>)> {
        let hop = expm4(&crate::linalg::mat4_scale(step, &self.n1));
        let mut z = self.row_at(x_start);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(([z[0], z[1]], [z[2], z[3]]));
            z = row4_mul_mat4(&z, &hop);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::steady_state_profile;
    use crate::model::linearize;
    use crate::params::BiophysicalParams;
    use approx::assert_relative_eq;

    fn setup() -> (BiophysicalParams<f64>, PhiGain<f64>) {
        let p = BiophysicalParams::reference();
        let eq = steady_state_profile(&p, 12e-6).unwrap();
        let model = linearize(&p, &eq);
        let k = [-0.0094, 36.0];
        let phi = PhiGain::new(&model, p.degradation, p.advection, p.diffusivity, &k);
        (p, phi)
    }

    #[test]
    fn phi_at_zero_is_h() {
        let p = BiophysicalParams::reference();
        let eq = steady_state_profile(&p, 12e-6).unwrap();
        let model = linearize(&p, &eq);
        let (_, phi) = setup();
        let v = phi.phi(0.0);
        assert_eq!(v[0], model.h_vector[0]);
        assert_eq!(v[1], model.h_vector[1]);
    }

    #[test]
    fn dphi_matches_central_differences() {
        let (_, phi) = setup();
        let h = 1e-9;
        for &x in &[-2.0e-5, -1.0e-5, -3.0e-6, 0.0, 5.0e-6] {
            let d = phi.dphi(x);
            for k in 0..2 {
                let fd = (phi.phi(x + h)[k] - phi.phi(x - h)[k]) / (2.0 * h);
                assert_relative_eq!(d[k], fd, max_relative = 1e-5, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn ode_residual_vanishes() {
        // Second derivative by central differences must satisfy the ODE.
        let p = BiophysicalParams::reference();
        let eq = steady_state_profile(&p, 12e-6).unwrap();
        let model = linearize(&p, &eq);
        let k = [-0.0094, 36.0];
        let phi = PhiGain::new(&model, p.degradation, p.advection, p.diffusivity, &k);
        let h = 1e-8;
        for &x in &[-1.5e-5, -5.0e-6, 4.0e-6] {
            let f0 = phi.phi(x);
            let fp = phi.phi(x + h);
            let fm = phi.phi(x - h);
            let d1 = phi.dphi(x);
            for j in 0..2 {
                let lhs = p.diffusivity * (fp[j] - 2.0 * f0[j] + fm[j]) / (h * h);
                // rhs_j = sum_i phi_i M1[i][j] * D + phi'_i M2[i][j] * D
                let mut rhs: f64 = 0.0;
                for i in 0..2 {
                    rhs += f0[i] * phi.n1[i][2 + j] + d1[i] * phi.n1[2 + i][2 + j];
                }
                rhs *= p.diffusivity;
                let scale = lhs.abs().max(rhs.abs()).max(1e-12);
                assert!(
                    (lhs - rhs).abs() <= 1e-4 * scale,
                    "ODE residual at {x}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn tabulate_matches_pointwise() {
        let (_, phi) = setup();
        let step = -1.5e-7;
        let tab = phi.tabulate(-1.0e-6, step, 40);
        for (k, (v, d)) in tab.iter().enumerate() {
            let x = -1.0e-6 + step * k as f64;
            let pv = phi.phi(x);
            let pd = phi.dphi(x);
            for j in 0..2 {
                assert_relative_eq!(v[j], pv[j], max_relative = 1e-10, epsilon = 1e-14);
                assert_relative_eq!(d[j], pd[j], max_relative = 1e-10, epsilon = 1e-14);
            }
        }
    }
}
