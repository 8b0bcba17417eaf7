//! Linearized reference-error model, coordinate conversions, and gain checks.
//!
//! The cone ODE is linearized about the setpoint equilibrium, giving
//! `a_tilde = (a - g l_c - r_g c_inf - r_tilde_g l_c) / l_c` and
//! `beta = D / l_c`. Linearization also produces a `c_eq''(l_s) z_2`
//! cross-coupling; the reference model's state matrix keeps a zero there, so
//! the term is dropped and its coefficient is exposed for inspection instead.

use crate::equilibrium::EquilibriumProfile;
use crate::error::{Error, Result};
use crate::linalg::{eig2, Mat2, Vec2};
use crate::params::BiophysicalParams;
use crate::scalar::Scalar;

/// Matrices and scalars of the linearized error system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel<T> {
    /// State matrix `[[a_tilde, 0], [r_g, 0]]`.
    pub a_matrix: Mat2<T>,
    /// Input column `[-beta, 0]`.
    pub b_vector: Vec2<T>,
    /// Boundary-output column `[1, -(a - g l_c) c_inf / D]`.
    pub h_vector: Vec2<T>,
    /// Measurement row `[0, 1]`.
    pub c_row: Vec2<T>,
    /// Linearized cone self-coupling (1/s).
    pub a_tilde: T,
    /// Flux input coefficient `D / l_c` (m/s).
    pub beta: T,
    /// Coefficient of the dropped `z_2` cross term, `-D c_eq''(l_s) / l_c`
    /// ((mol/m^3)/(m s)). Kept out of the state matrix; reported so callers
    /// can judge the approximation for their parameter set.
    pub dropped_cross_term: T,
}

/// Observer and controller gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainConfig<T> {
    /// Kernel decay parameter lambda (1/s).
    pub lambda: T,
    /// Observer boundary gain gamma_1 (>= D/a).
    pub gamma1: T,
    /// Controller boundary gain gamma_2 (>= a/D).
    pub gamma2: T,
    /// Controller row `[k_1, k_2]`.
    pub k_row: Vec2<T>,
    /// Observer column `[l_1, l_2]`.
    pub l_col: Vec2<T>,
}

/// Verdicts on the gain inequalities and the corresponding eigenvalues.
///
/// Violations are reported, never thrown; callers decide what to do.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport<T> {
    pub lambda_positive: bool,
    /// `gamma_1 >= D / a`.
    pub gamma1_ok: bool,
    /// `gamma_2 >= a / D`.
    pub gamma2_ok: bool,
    /// `k_1 > a_tilde / beta`.
    pub k1_ok: bool,
    /// `k_2 > 0`.
    pub k2_ok: bool,
    /// `l_1 > a_tilde l_2 / r_g`.
    pub l1_ok: bool,
    /// `l_2 > a_tilde`.
    pub l2_ok: bool,
    /// Eigenvalues of `A - L C` as (re, im) pairs.
    pub observer_eigs: [(T, T); 2],
    /// Eigenvalues of `A + B K` as (re, im) pairs.
    pub controller_eigs: [(T, T); 2],
}

impl<T: Scalar> GainReport<T> {
    pub fn observer_closed_form_ok(&self) -> bool {
        self.l1_ok && self.l2_ok
    }

    pub fn controller_closed_form_ok(&self) -> bool {
        self.k1_ok && self.k2_ok
    }

    pub fn observer_hurwitz(&self) -> bool {
        self.observer_eigs.iter().all(|(re, _)| *re < T::zero())
    }

    pub fn controller_hurwitz(&self) -> bool {
        self.controller_eigs.iter().all(|(re, _)| *re < T::zero())
    }

    pub fn all_ok(&self) -> bool {
        self.lambda_positive
            && self.gamma1_ok
            && self.gamma2_ok
            && self.observer_closed_form_ok()
            && self.controller_closed_form_ok()
    }
}

/// Builds the linearized error model from the parameters and equilibrium.
pub fn linearize<T: Scalar>(
    params: &BiophysicalParams<T>,
    eq: &EquilibriumProfile<T>,
) -> LinearModel<T> {
    let d = params.diffusivity;
    let l_c = params.cone_length;
    let c_inf = params.cone_equilibrium;
    let a_tilde = (params.boundary_drift()
        - params.growth_rate * c_inf
        - params.assembly_rate * l_c)
        / l_c;
    let beta = d / l_c;
    LinearModel {
        a_matrix: [[a_tilde, T::zero()], [params.growth_rate, T::zero()]],
        b_vector: [-beta, T::zero()],
        h_vector: [T::one(), -params.boundary_drift() * c_inf / d],
        c_row: [T::zero(), T::one()],
        a_tilde,
        beta,
        dropped_cross_term: -d * eq.deriv2(eq.setpoint) / l_c,
    }
}

/// Converts physical state samples on a uniform sigma grid over `[0, l]` into
/// error coordinates `(u, X)`.
pub fn to_error_coords<T: Scalar>(
    c_samples: &[T],
    c_c: T,
    l: T,
    eq: &EquilibriumProfile<T>,
) -> Result<(Vec<T>, Vec2<T>)> {
    if !(l > T::zero()) {
        return Err(Error::InvalidState(format!("axon length must be positive, got {l}")));
    }
    let n = c_samples.len();
    let c_inf = eq.eval(eq.setpoint);
    let u = c_samples
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let x = l * T::from_index(i) / T::from_index(n - 1);
            c - eq.eval(x)
        })
        .collect();
    Ok((u, [c_c - c_inf, l - eq.setpoint]))
}

/// Exact inverse of [`to_error_coords`].
pub fn from_error_coords<T: Scalar>(
    u_samples: &[T],
    x_state: &Vec2<T>,
    eq: &EquilibriumProfile<T>,
) -> (Vec<T>, T, T) {
    let n = u_samples.len();
    let c_inf = eq.eval(eq.setpoint);
    let l = x_state[1] + eq.setpoint;
    let c = u_samples
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let x = l * T::from_index(i) / T::from_index(n - 1);
            u + eq.eval(x)
        })
        .collect();
    (c, x_state[0] + c_inf, l)
}

/// `A - L C` for the given observer column.
pub fn observer_matrix<T: Scalar>(model: &LinearModel<T>, l_col: &Vec2<T>) -> Mat2<T> {
    // C = [0, 1], so L C only touches the second column.
    [
        [model.a_matrix[0][0], model.a_matrix[0][1] - l_col[0]],
        [model.a_matrix[1][0], model.a_matrix[1][1] - l_col[1]],
    ]
}

/// `A + B K` for the given controller row.
pub fn controller_matrix<T: Scalar>(model: &LinearModel<T>, k_row: &Vec2<T>) -> Mat2<T> {
    [
        [
            model.a_matrix[0][0] + model.b_vector[0] * k_row[0],
            model.a_matrix[0][1] + model.b_vector[0] * k_row[1],
        ],
        [
            model.a_matrix[1][0] + model.b_vector[1] * k_row[0],
            model.a_matrix[1][1] + model.b_vector[1] * k_row[1],
        ],
    ]
}

/// Checks every closed-form gain inequality and computes the eigenvalues of
/// the observer and controller matrices.
pub fn check_gains<T: Scalar>(
    params: &BiophysicalParams<T>,
    model: &LinearModel<T>,
    gains: &GainConfig<T>,
) -> GainReport<T> {
    let r_g = params.growth_rate;
    GainReport {
        lambda_positive: gains.lambda > T::zero(),
        gamma1_ok: gains.gamma1 >= params.diffusivity / params.advection,
        gamma2_ok: gains.gamma2 >= params.advection / params.diffusivity,
        k1_ok: gains.k_row[0] > model.a_tilde / model.beta,
        k2_ok: gains.k_row[1] > T::zero(),
        l1_ok: gains.l_col[0] > model.a_tilde * gains.l_col[1] / r_g,
        l2_ok: gains.l_col[1] > model.a_tilde,
        observer_eigs: eig2(&observer_matrix(model, &gains.l_col)),
        controller_eigs: eig2(&controller_matrix(model, &gains.k_row)),
    }
}
