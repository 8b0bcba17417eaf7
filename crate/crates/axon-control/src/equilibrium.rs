//! Steady-state tubulin profile for a fixed axon length.
//!
//! The profile solves the constant-coefficient ODE
//! `D c'' - a c' - g c = 0` on `[0, l_s]` with `c(l_s) = c_inf` and
//! `D c'(l_s) = (a - g l_c) c_inf`, via the characteristic roots
//! `r_pm = (a +/- sqrt(a^2 + 4 D g)) / (2 D)`. The closed form stays valid
//! for every `x >= 0`, which matters whenever the axon overshoots the
//! setpoint length.

use crate::error::{Error, Result};
use crate::params::BiophysicalParams;
use crate::scalar::Scalar;

/// Steady-state concentration profile `c_eq(x)` and the steady influx.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumProfile<T> {
    /// Setpoint length (m).
    pub setpoint: T,
    /// Coefficient of the `exp(root_plus * x)` mode (mol/m^3).
    pub coeff_plus: T,
    /// Coefficient of the `exp(root_minus * x)` mode (mol/m^3).
    pub coeff_minus: T,
    /// Positive characteristic root (1/m).
    pub root_plus: T,
    /// Negative characteristic root (1/m).
    pub root_minus: T,
    /// Steady influx `q_s^* = -c_eq'(0)` (mol/m^4).
    pub q_s_star: T,
}

impl<T: Scalar> EquilibriumProfile<T> {
    /// `c_eq(x)`; valid for all `x >= 0`.
    pub fn eval(&self, x: T) -> T {
        self.coeff_plus * (self.root_plus * x).exp()
            + self.coeff_minus * (self.root_minus * x).exp()
    }

    /// `c_eq'(x)`.
    pub fn deriv(&self, x: T) -> T {
        self.coeff_plus * self.root_plus * (self.root_plus * x).exp()
            + self.coeff_minus * self.root_minus * (self.root_minus * x).exp()
    }

    /// `c_eq''(x)`.
    pub fn deriv2(&self, x: T) -> T {
        self.coeff_plus * self.root_plus * self.root_plus * (self.root_plus * x).exp()
            + self.coeff_minus * self.root_minus * self.root_minus * (self.root_minus * x).exp()
    }
}

/// Computes the steady-state profile for setpoint length `l_s`.
pub fn steady_state_profile<T: Scalar>(
    params: &BiophysicalParams<T>,
    l_s: T,
) -> Result<EquilibriumProfile<T>> {
    if !(l_s > T::zero()) || !l_s.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "setpoint length must be positive and finite, got {l_s}"
        )));
    }
    let d = params.diffusivity;
    let a = params.advection;
    let g = params.degradation;
    let c_inf = params.cone_equilibrium;
    let two = T::from_f64_lossy(2.0);
    let four = T::from_f64_lossy(4.0);

    let disc = a * a + four * d * g;
    // End-point slope fixed by the zero-steady-state reduction of the cone ODE.
    let slope = params.boundary_drift() * c_inf / d;

    if a == T::zero() && g == T::zero() {
        // Pure diffusion: c'' = 0 with zero end slope forces a constant.
        return Ok(EquilibriumProfile {
            setpoint: l_s,
            coeff_plus: c_inf,
            coeff_minus: T::zero(),
            root_plus: T::zero(),
            root_minus: T::zero(),
            q_s_star: T::zero(),
        });
    }
    if disc <= T::epsilon() * (a * a).max(four * d * g.abs()) {
        return Err(Error::DegenerateRoots(format!(
            "a^2 + 4*D*g = {disc} is indistinguishable from zero"
        )));
    }

    let sq = disc.sqrt();
    let r_plus = (a + sq) / (two * d);
    let r_minus = (a - sq) / (two * d);

    // Two-point conditions at x = l_s:
    //   C+ e^{r+ l} + C- e^{r- l} = c_inf
    //   C+ r+ e^{r+ l} + C- r- e^{r- l} = slope
    let denom = r_minus - r_plus;
    let coeff_plus = (c_inf * r_minus - slope) * (-r_plus * l_s).exp() / denom;
    let coeff_minus = (slope - c_inf * r_plus) * (-r_minus * l_s).exp() / denom;

    let profile = EquilibriumProfile {
        setpoint: l_s,
        coeff_plus,
        coeff_minus,
        root_plus: r_plus,
        root_minus: r_minus,
        q_s_star: T::zero(),
    };
    let q_s_star = -profile.deriv(T::zero());
    Ok(EquilibriumProfile { q_s_star, ..profile })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;

    fn reference() -> BiophysicalParams<f64> {
        BiophysicalParams::reference()
    }

    const L_S: f64 = 12e-6;

    #[test]
    fn zero_advection_zero_degradation_is_constant() {
        let mut p = reference();
        p.advection = 0.0;
        p.degradation = 0.0;
        let eq = steady_state_profile(&p, L_S).unwrap();
        for i in 0..=10 {
            let x = L_S * i as f64 / 10.0;
            assert_relative_eq!(eq.eval(x), p.cone_equilibrium, max_relative = 1e-15);
        }
        assert_eq!(eq.q_s_star, 0.0);
    }

    #[test]
    fn reference_characteristic_roots() {
        let p = reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        // Roots of D r^2 - a r - g = 0 with the reference constants.
        let sq = (p.advection * p.advection + 4.0 * p.diffusivity * p.degradation).sqrt();
        let r_plus = (p.advection + sq) / (2.0 * p.diffusivity);
        let r_minus = (p.advection - sq) / (2.0 * p.diffusivity);
        assert_relative_eq!(eq.root_plus, r_plus, max_relative = 1e-14);
        assert_relative_eq!(eq.root_minus, r_minus, max_relative = 1e-14);
        assert_relative_eq!(eq.root_plus, 0.2241, max_relative = 1e-3);
        assert_relative_eq!(eq.root_minus, -0.2231, max_relative = 1e-3);
    }

    #[test]
    fn ode_residual_at_random_points() {
        let p = reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        let scale = (0..200)
            .map(|i| eq.eval(L_S * i as f64 / 199.0).abs())
            .fold(0.0f64, f64::max);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = rng.gen_range(0.0..L_S);
            let res = p.diffusivity * eq.deriv2(x) - p.advection * eq.deriv(x)
                - p.degradation * eq.eval(x);
            assert!(res.abs() <= 1e-10 * scale, "residual {res} at x = {x}");
        }
    }

    #[test]
    fn boundary_identities() {
        let p = reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        let slope = p.boundary_drift() * p.cone_equilibrium / p.diffusivity;
        assert_relative_eq!(eq.eval(L_S), p.cone_equilibrium, max_relative = 1e-12);
        assert_relative_eq!(eq.deriv(L_S), slope, max_relative = 1e-12);
        assert_relative_eq!(eq.q_s_star, -eq.deriv(0.0), max_relative = 1e-12);
        // Reference magnitude: 1.19e-5 * (1 - 2e-4) mol/m^4.
        assert_relative_eq!(eq.deriv(L_S), 1.19e-5 * (1.0 - 2e-4), max_relative = 1e-4);
    }

    #[test]
    fn end_slope_matches_finite_difference_of_profile() {
        let p = reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        // The profile varies on the 1/root ~ meter scale, so a large step is
        // fine and avoids catastrophic cancellation in the difference.
        let h = 1e-3;
        let fd = (eq.eval(L_S + h) - eq.eval(L_S - h)) / (2.0 * h);
        assert_relative_eq!(fd, eq.deriv(L_S), max_relative = 1e-6);
    }

    #[test]
    fn rejects_nonpositive_setpoint() {
        assert!(steady_state_profile(&reference(), 0.0).is_err());
        assert!(steady_state_profile(&reference(), -1e-6).is_err());
    }

    #[test]
    fn profile_extends_beyond_setpoint() {
        let p = reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        // Closed form is smooth past l_s; residual still vanishes there.
        let x = 2.0 * L_S;
        let res =
            p.diffusivity * eq.deriv2(x) - p.advection * eq.deriv(x) - p.degradation * eq.eval(x);
        assert!(res.abs() <= 1e-10 * eq.eval(x).abs());
    }
}
