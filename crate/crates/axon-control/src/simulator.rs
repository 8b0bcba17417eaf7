//! Moving-boundary plant simulator.
//!
//! The tubulin PDE is front-fixed with `sigma = x / l(t)`:
//!
//! ```text
//! c_t = (D / l^2) c_ss + (sigma l_dot / l - a / l) c_s - g c
//! ```
//!
//! on `sigma in [0, 1]`, with `c_s(0) = -q_s l` and the growth-cone ODE at
//! `sigma = 1`. Time stepping is semi-implicit backward Euler: diffusion and
//! the cone ODE's linear/flux terms are implicit, advection, mesh velocity
//! and degradation are explicit. The implicit cone coupling matters: the
//! flux term `D c_x(l) / l_c` carries an effective rate of order
//! `D / (l_c h l)` (~1e8 1/s for a micron-long axon on a 128-point grid),
//! which no explicit step at a useful `dt` survives.
//!
//! The resulting linear system is tridiagonal except for the last row, whose
//! second-order one-sided flux stencil reaches three nodes back; the solver
//! below folds that row into an otherwise standard Thomas sweep.

use crate::error::{Error, Result};
use crate::params::BiophysicalParams;
use crate::scalar::Scalar;

/// Plant state on the front-fixed grid.
///
/// `c[i]` samples the concentration at `sigma_i = i / (n - 1)`; the last
/// sample is the cone concentration `c_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState<T> {
    pub c: Vec<T>,
    /// Axon length (m).
    pub l: T,
    /// Simulation time (s).
    pub time: T,
}

/// Boundary measurements available to the observer, in error coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements<T> {
    /// Tip flux error `u_x(l, t) = c_x(l, t) - c_eq'(l)` (mol/m^4).
    pub y1: T,
    /// Length error `y2 = l - l_s` (m).
    pub y2: T,
}

impl<T: Scalar> PlantState<T> {
    /// Samples an arbitrary profile `f(x)` on a uniform grid over `[0, l]`.
    pub fn from_profile<F: Fn(T) -> T>(f: F, l: T, n: usize) -> Self {
        let c = (0..n)
            .map(|i| f(l * T::from_index(i) / T::from_index(n - 1)))
            .collect();
        PlantState { c, l, time: T::zero() }
    }

    pub fn cone_concentration(&self) -> T {
        *self.c.last().expect("empty state")
    }

    pub fn grid_n(&self) -> usize {
        self.c.len()
    }

    fn validate(&self) -> Result<()> {
        if self.c.len() < 4 {
            return Err(Error::InvalidState(format!(
                "need at least 4 grid points, got {}",
                self.c.len()
            )));
        }
        if !(self.l > T::zero()) || !self.l.is_finite() {
            return Err(Error::InvalidState(format!("axon length must be positive, got {}", self.l)));
        }
        if self.c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite concentration sample".into()));
        }
        Ok(())
    }
}

/// Physical tip gradient `c_x(l, t)` by a second-order one-sided stencil.
pub fn tip_flux<T: Scalar>(state: &PlantState<T>) -> T {
    let n = state.c.len();
    let h = T::from_index(n - 1).recip();
    let three = T::from_f64_lossy(3.0);
    let four = T::from_f64_lossy(4.0);
    let two = T::from_f64_lossy(2.0);
    (three * state.c[n - 1] - four * state.c[n - 2] + state.c[n - 3]) / (two * h * state.l)
}

/// Boundary measurements in error coordinates.
pub fn measure<T: Scalar>(
    state: &PlantState<T>,
    eq: &crate::equilibrium::EquilibriumProfile<T>,
) -> Measurements<T> {
    Measurements {
        y1: tip_flux(state) - eq.deriv(state.l),
        y2: state.l - eq.setpoint,
    }
}

/// Advances the plant by one step of size `dt` under influx `q_s`.
pub fn plant_step<T: Scalar>(
    state: &PlantState<T>,
    params: &BiophysicalParams<T>,
    q_s: T,
    dt: T,
) -> Result<PlantState<T>> {
    state.validate()?;
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = state.c.len();
    let h = T::from_index(n - 1).recip();
    let two = T::from_f64_lossy(2.0);

    let d = params.diffusivity;
    let a = params.advection;
    let g = params.degradation;
    let r_g = params.growth_rate;
    let rt_g = params.assembly_rate;
    let l_c = params.cone_length;
    let c_inf = params.cone_equilibrium;

    // Boundary kinematics first; coefficients are evaluated on the new domain.
    let c_c = state.cone_concentration();
    let l_dot = r_g * (c_c - c_inf);
    let l = state.l + dt * l_dot;
    if !(l > T::zero()) {
        return Err(Error::InvalidState(format!("axon length collapsed to {l}")));
    }

    let r = dt * d / (l * l * h * h);
    let mut lower = vec![T::zero(); n];
    let mut diag = vec![T::zero(); n];
    let mut upper = vec![T::zero(); n];
    let mut rhs = vec![T::zero(); n];

    // sigma = 0: Neumann via ghost node c_{-1} = c_1 + 2 h l q_s.
    diag[0] = T::one() + two * r;
    upper[0] = -two * r;
    rhs[0] = state.c[0]
        + dt * (d / (l * l) * (two * h * l * q_s) / (h * h) + a * q_s - g * state.c[0]);

    // Interior rows: implicit diffusion; advection/mesh velocity first-order
    // upwind by local sign, degradation explicit.
    for i in 1..n - 1 {
        let sigma = h * T::from_index(i);
        let conv = (sigma * l_dot - a) / l;
        let c_s = if conv > T::zero() {
            (state.c[i + 1] - state.c[i]) / h
        } else {
            (state.c[i] - state.c[i - 1]) / h
        };
        lower[i] = -r;
        diag[i] = T::one() + two * r;
        upper[i] = -r;
        rhs[i] = state.c[i] + dt * (conv * c_s - g * state.c[i]);
    }

    // Cone ODE row: linear drift and the flux term implicit, the assembly
    // nonlinearity explicit.
    let drift = params.boundary_drift();
    let flux_coef = d / (two * h * l * l_c);
    let nonlinear = (r_g * c_c + rt_g * l_c) * (c_c - c_inf) / l_c;
    let tail = [
        flux_coef,                                                   // c_{n-3}
        -T::from_f64_lossy(4.0) * flux_coef,                         // c_{n-2}
        dt.recip() - drift / l_c + T::from_f64_lossy(3.0) * flux_coef, // c_{n-1}
    ];
    let tail_rhs = c_c / dt - nonlinear;

    let mut c_new = solve_tridiagonal_with_tail(&lower, &diag, &upper, &rhs, &tail, tail_rhs)?;

    for v in &mut c_new {
        if !v.is_finite() {
            return Err(Error::Numerical("plant step produced a non-finite value".into()));
        }
    }
    Ok(PlantState { c: c_new, l, time: state.time + dt })
}

/// Solves a system that is tridiagonal in rows `0..n-1` while row `n-1` has
/// entries on columns `n-3, n-2, n-1` (`tail`).
pub(crate) fn solve_tridiagonal_with_tail<T: Scalar>(
    lower: &[T],
    diag: &[T],
    upper: &[T],
    rhs: &[T],
    tail: &[T; 3],
    tail_rhs: T,
) -> Result<Vec<T>> {
    let n = diag.len();
    // Forward sweep over the tridiagonal rows: x_i = d[i] - e[i] x_{i+1}.
    let mut e = vec![T::zero(); n - 1];
    let mut dvec = vec![T::zero(); n - 1];
    let mut denom = diag[0];
    if denom == T::zero() {
        return Err(Error::Numerical("singular tridiagonal system".into()));
    }
    e[0] = upper[0] / denom;
    dvec[0] = rhs[0] / denom;
    for i in 1..n - 1 {
        denom = diag[i] - lower[i] * e[i - 1];
        if denom == T::zero() {
            return Err(Error::Numerical("singular tridiagonal system".into()));
        }
        e[i] = upper[i] / denom;
        dvec[i] = (rhs[i] - lower[i] * dvec[i - 1]) / denom;
    }
    // Fold the tail row: substitute x_{n-3} and x_{n-2} in terms of x_{n-1}.
    // x_{n-3} = d3 - e3 x_{n-2}, x_{n-2} = d2 - e2 x_{n-1}.
    let (d3, e3) = (dvec[n - 3], e[n - 3]);
    let (d2, e2) = (dvec[n - 2], e[n - 2]);
    let coef = tail[0] * e3 * e2 - tail[1] * e2 + tail[2];
    let r = tail_rhs - tail[0] * (d3 - e3 * d2) - tail[1] * d2;
    if coef == T::zero() {
        return Err(Error::Numerical("singular cone row".into()));
    }
    let x_last = r / coef;
    let mut x = vec![T::zero(); n];
    x[n - 1] = x_last;
    for i in (0..n - 1).rev() {
        x[i] = dvec[i] - e[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::steady_state_profile;
    use approx::assert_relative_eq;

    const L_S: f64 = 12e-6;
    const N: usize = 128;

    fn reference() -> BiophysicalParams<f64> {
        BiophysicalParams::reference()
    }

    #[test]
    fn tip_flux_stencil_is_exact_on_quadratics() {
        let l = 7.0e-6;
        let state = PlantState::from_profile(|x| 1.0 + 2.0 * x + 3.0 * x * x, l, 64);
        assert_relative_eq!(tip_flux(&state), 2.0 + 6.0 * l, max_relative = 1e-10);
    }

    #[test]
    fn measurements_vanish_at_equilibrium() {
        let p = reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        let state = PlantState::from_profile(|x| eq.eval(x), L_S, 256);
        let m = measure(&state, &eq);
        // The one-sided stencil's truncation error on the exponential profile
        // dominates: O(h^2 c_eq''') ~ 5e-6 relative at n = 256.
        assert!(m.y1.abs() <= 1e-4 * eq.deriv(L_S).abs(), "y1 = {}", m.y1);
        assert_eq!(m.y2, 0.0);
    }

    #[test]
    fn degradation_only_mass_decays_monotonically() {
        // Frozen boundary, pinned (zero) cone concentration, no influx,
        // vanishing advection: d/dt int c dx = -g int c dx <= 0.
        let p = BiophysicalParams::<f64> {
            diffusivity: 0.1,
            advection: 1e-300,
            degradation: 0.01,
            growth_rate: 1e-300,
            assembly_rate: 1e-300,
            cone_length: 1e12,
            cone_equilibrium: 1e-300,
        };
        let mut state = PlantState::from_profile(
            |x| (std::f64::consts::PI * x).sin().abs() + 1e-6,
            1.0,
            128,
        );
        state.c[127] = 0.0;
        let mass = |s: &PlantState<f64>| -> f64 {
            let h = s.l / 127.0;
            let mut m = 0.5 * (s.c[0] + s.c[127]);
            for v in &s.c[1..127] {
                m += v;
            }
            m * h
        };
        let mut prev = mass(&state);
        for _ in 0..200 {
            state = plant_step(&state, &p, 0.0, 1e-3).unwrap();
            let cur = mass(&state);
            assert!(cur <= prev * (1.0 + 1e-12), "mass grew: {prev} -> {cur}");
            prev = cur;
        }
    }

    #[test]
    fn tail_solver_matches_dense_elimination() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 12;
        let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(3.0..4.0)).collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tail = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 5.0];
        let tail_rhs = rng.gen_range(-1.0..1.0);

        // Dense Gaussian elimination oracle.
        let mut m = vec![vec![0.0f64; n + 1]; n];
        for i in 0..n - 1 {
            m[i][i] = diag[i];
            if i > 0 {
                m[i][i - 1] = lower[i];
            }
            m[i][i + 1] = upper[i];
            m[i][n] = rhs[i];
        }
        m[n - 1][n - 3] = tail[0];
        m[n - 1][n - 2] = tail[1];
        m[n - 1][n - 1] = tail[2];
        m[n - 1][n] = tail_rhs;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
                .unwrap();
            m.swap(col, piv);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
        let mut want = vec![0.0f64; n];
        for i in (0..n).rev() {
            let mut s = m[i][n];
            for k in i + 1..n {
                s -= m[i][k] * want[k];
            }
            want[i] = s / m[i][i];
        }

        let got = solve_tridiagonal_with_tail(&lower, &diag, &upper, &rhs, &tail, tail_rhs).unwrap();
        for i in 0..n {
            assert_relative_eq!(got[i], want[i], max_relative = 1e-10);
        }
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = reference();
        let eq = steady_state_profile(&p, L_S).unwrap();
        let mut state = PlantState::from_profile(|x| eq.eval(x), L_S, N);
        let c0 = state.c.clone();
        for _ in 0..1000 {
            state = plant_step(&state, &p, eq.q_s_star, 1e-3).unwrap();
        }
        assert_relative_eq!(state.l, L_S, max_relative = 1e-9);
        for (a, b) in state.c.iter().zip(&c0) {
            assert_relative_eq!(a, b, max_relative = 1e-7);
        }
    }

    #[test]
    fn boundary_velocity_sign_follows_cone_concentration() {
        let p = reference();
        let hi = PlantState::from_profile(|_| p.cone_equilibrium * 1.1, 5e-6, N);
        let lo = PlantState::from_profile(|_| p.cone_equilibrium * 0.9, 5e-6, N);
        let hi2 = plant_step(&hi, &p, 0.0, 1e-3).unwrap();
        let lo2 = plant_step(&lo, &p, 0.0, 1e-3).unwrap();
        assert!(hi2.l > hi.l);
        assert!(lo2.l < lo.l);
    }

    #[test]
    fn pure_diffusion_matches_cosine_eigenmode() {
        // Frozen boundary (r_g -> 0) and pinned cone concentration
        // (l_c -> infinity) turn the plant into heat flow on [0, L] with a
        // zero-flux left end and a Dirichlet right end. A single cosine
        // eigenmode then decays exactly at rate D nu^2.
        let p = BiophysicalParams::<f64> {
            diffusivity: 0.1,
            advection: 1e-14,
            degradation: 1e-14,
            growth_rate: 1e-14,
            assembly_rate: 1e-14,
            cone_length: 1e12,
            cone_equilibrium: 1.0,
        };
        let big_l = 1.0;
        let c_c = 1.0;
        let nu = std::f64::consts::FRAC_PI_2 / big_l;
        let mut state = PlantState::from_profile(|x| c_c + (nu * x).cos(), big_l, 256);
        let dt: f64 = 1e-4;
        let t_end: f64 = 1.0;
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            state = plant_step(&state, &p, 0.0, dt).unwrap();
        }
        let decay = (-p.diffusivity * nu * nu * t_end).exp();
        for (i, &c) in state.c.iter().enumerate() {
            let x = big_l * i as f64 / 255.0;
            let want = c_c + (nu * x).cos() * decay;
            assert!(
                (c - want).abs() <= 1e-3 * 1.0,
                "node {i}: {c} vs {want}"
            );
        }
    }

    #[test]
    fn rejects_bad_states() {
        let p = reference();
        let state = PlantState::from_profile(|_| 0.01, -1.0, N);
        assert!(plant_step(&state, &p, 0.0, 1e-3).is_err());
        let state = PlantState::from_profile(|_| 0.01, 5e-6, N);
        assert!(plant_step(&state, &p, 0.0, -1.0).is_err());
        let mut state = PlantState::from_profile(|_| 0.01, 5e-6, N);
        state.c[3] = f64::NAN;
        assert!(plant_step(&state, &p, 0.0, 1e-3).is_err());
    }
}
