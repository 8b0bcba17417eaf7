//! Output-feedback boundary control law.
//!
//! ```text
//! U(t) = ((D gamma_2 - beta) / D) u_hat(0, t)
//!        + (phi'(-l)^T - gamma_2 phi(-l)^T) X_hat
//!        - (1/D) int_0^l (phi'(-y)^T - gamma_2 phi(-y)^T) B u_hat(y, t) dy
//! q_s(t) = q_s^* - U(t)
//! ```
//!
//! with `beta = -H^T B = D / l_c`. The law is the target boundary relation
//! `w_x(0) = gamma_2 w(0)` written out through the control transformation;
//! it is linear in `(u_hat, X_hat)`.

use crate::model::LinearModel;
use crate::observer::ObserverState;
use crate::params::BiophysicalParams;
use crate::phi::PhiGain;
use crate::scalar::Scalar;

/// Control command in both coordinate systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlValue<T> {
    /// Error-coordinate boundary slope command (mol/m^4).
    pub u: T,
    /// Physical soma influx `q_s = q_s^* - U` (mol/m^4).
    pub q_s: T,
    /// Whether the optional nonnegativity clamp fired.
    pub clamped: bool,
}

/// Evaluates the control law on the observer state over the measured domain
/// `[0, l]`. `clamp_nonnegative` optionally saturates `q_s` at zero
/// (negative influx is unphysical); the flag in the result records it.
pub fn control_law<T: Scalar>(
    obs: &ObserverState<T>,
    l: T,
    phi: &PhiGain<T>,
    model: &LinearModel<T>,
    params: &BiophysicalParams<T>,
    gamma2: T,
    q_s_star: T,
    clamp_nonnegative: bool,
) -> ControlValue<T> {
    let d = params.diffusivity;
    let beta = model.beta;
    let b = model.b_vector;
    let n = obs.u_hat.len();
    let h_sigma = T::from_index(n - 1).recip();
    let half = T::from_f64_lossy(0.5);

    // phi and phi' at -y_i = -i h l, one matrix exponential for the batch.
    let tab = phi.tabulate(T::zero(), -h_sigma * l, n);

    // Trapezoid of (phi'(-y)^T - gamma_2 phi(-y)^T) B u_hat(y) over [0, l].
    let mut integral = T::zero();
    for (i, (pv, pd)) in tab.iter().enumerate() {
        let row = [pd[0] - gamma2 * pv[0], pd[1] - gamma2 * pv[1]];
        let f = (row[0] * b[0] + row[1] * b[1]) * obs.u_hat[i];
        let w = if i == 0 || i == n - 1 { half } else { T::one() };
        integral += w * f;
    }
    integral *= h_sigma * l;

    let (pv_l, pd_l) = tab[n - 1];
    let x_term = (pd_l[0] - gamma2 * pv_l[0]) * obs.x_hat[0]
        + (pd_l[1] - gamma2 * pv_l[1]) * obs.x_hat[1];

    let u = (d * gamma2 - beta) / d * obs.u_hat[0] + x_term - integral / d;
    let q_s = q_s_star - u;
    if clamp_nonnegative && q_s < T::zero() {
        ControlValue { u, q_s: T::zero(), clamped: true }
    } else {
        ControlValue { u, q_s, clamped: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::steady_state_profile;
    use crate::model::linearize;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    const L_S: f64 = 12e-6;
    const N: usize = 128;

    fn setup() -> (
        BiophysicalParams<f64>,
        crate::equilibrium::EquilibriumProfile<f64>,
        LinearModel<f64>,
        PhiGain<f64>,
    ) {
        let p = BiophysicalParams::reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        let model = linearize(&p, &eq);
        let phi = PhiGain::new(&model, p.degradation, p.advection, p.diffusivity, &[-0.0094, 36.0]);
        (p, eq, model, phi)
    }

    fn random_obs(rng: &mut impl Rng) -> ObserverState<f64> {
        ObserverState {
            u_hat: (0..N).map(|_| rng.gen_range(-1e-3..1e-3)).collect(),
            x_hat: [rng.gen_range(-1e-3..1e-3), rng.gen_range(-1e-6..1e-6)],
            time: 0.0,
        }
    }

    #[test]
    fn zero_state_gives_steady_influx() {
        let (p, eq, model, phi) = setup();
        let obs = ObserverState::zeroed(N);
        let v = control_law(&obs, L_S, &phi, &model, &p, 1e-3, eq.q_s_star, false);
        assert_eq!(v.u, 0.0);
        assert_eq!(v.q_s, eq.q_s_star);
        assert!(!v.clamped);
    }

    #[test]
    fn law_is_linear_in_the_observer_state() {
        let (p, eq, model, phi) = setup();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        let s1 = random_obs(&mut rng);
        let s2 = random_obs(&mut rng);
        let alpha = 1.7;
        let combo = ObserverState {
            u_hat: s1
                .u_hat
                .iter()
                .zip(&s2.u_hat)
                .map(|(a, b)| alpha * a + b)
                .collect(),
            x_hat: [
                alpha * s1.x_hat[0] + s2.x_hat[0],
                alpha * s1.x_hat[1] + s2.x_hat[1],
            ],
            time: 0.0,
        };
        let g2 = 1e-3;
        let u1 = control_law(&s1, L_S, &phi, &model, &p, g2, eq.q_s_star, false).u;
        let u2 = control_law(&s2, L_S, &phi, &model, &p, g2, eq.q_s_star, false).u;
        let uc = control_law(&combo, L_S, &phi, &model, &p, g2, eq.q_s_star, false).u;
        assert_relative_eq!(uc, alpha * u1 + u2, max_relative = 1e-12);
    }

    /// Adaptive Simpson quadrature of a scalar function.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn recur(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                recur(f, a, m, left, tol / 2.0, depth - 1)
                    + recur(f, m, b, right, tol / 2.0, depth - 1)
            }
        }
        let whole = simpson(f, a, b);
        recur(f, a, b, whole, tol, 30)
    }

    #[test]
    fn trapezoid_term_matches_adaptive_simpson_on_linear_fields() {
        let (p, eq, model, phi) = setup();
        let g2 = 1e-3;
        // u_hat linear in y: trapezoid is exact in the field; remaining error
        // is the phi sampling, checked against an adaptive oracle on the
        // smooth integrand.
        let slope = 17.0;
        let offset = -3.0e-4;
        let obs = ObserverState {
            u_hat: (0..N)
                .map(|i| offset + slope * (L_S * i as f64 / (N - 1) as f64))
                .collect(),
            x_hat: [0.0, 0.0],
            time: 0.0,
        };
        let v = control_law(&obs, L_S, &phi, &model, &p, g2, eq.q_s_star, false);

        let b = model.b_vector;
        let integrand = |y: f64| {
            let pv = phi.phi(-y);
            let pd = phi.dphi(-y);
            let row = [pd[0] - g2 * pv[0], pd[1] - g2 * pv[1]];
            (row[0] * b[0] + row[1] * b[1]) * (offset + slope * y)
        };
        let integral = adaptive_simpson(&integrand, 0.0, L_S, 1e-14);
        let want = (p.diffusivity * g2 - model.beta) / p.diffusivity * obs.u_hat[0]
            - integral / p.diffusivity;
        // The full integrand (phi terms times the field) is not linear, so
        // the 128-point trapezoid carries its usual O(h^2) error.
        assert_relative_eq!(v.u, want, max_relative = 1e-3);
    }

    #[test]
    fn clamp_fires_and_is_reported() {
        let (p, eq, model, phi) = setup();
        let mut obs = ObserverState::zeroed(N);
        // Push u_hat(0) so hard that q_s would go negative: the dominant
        // coefficient (D gamma_2 - beta)/D is large and negative.
        obs.u_hat[0] = -1.0;
        let free = control_law(&obs, L_S, &phi, &model, &p, 1e-3, eq.q_s_star, false);
        assert!(free.q_s < 0.0);
        let clamped = control_law(&obs, L_S, &phi, &model, &p, 1e-3, eq.q_s_star, true);
        assert!(clamped.clamped);
        assert_eq!(clamped.q_s, 0.0);
        assert_eq!(clamped.u, free.u);
    }
}
