//! Physical parameters of the tubulin transport model.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The seven physical constants of the plant, in strict SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiophysicalParams<T> {
    /// Diffusivity (m^2/s).
    pub diffusivity: T,
    /// Advection velocity (m/s).
    pub advection: T,
    /// Degradation rate (1/s).
    pub degradation: T,
    /// Lumped growth-rate parameter (m^4/(mol s)).
    pub growth_rate: T,
    /// Assembly reaction rate (1/s).
    pub assembly_rate: T,
    /// Growth-cone length ratio (m).
    pub cone_length: T,
    /// Equilibrium cone concentration (mol/m^3).
    pub cone_equilibrium: T,
}

impl<T: Scalar> BiophysicalParams<T> {
    pub fn new(
        diffusivity: T,
        advection: T,
        degradation: T,
        growth_rate: T,
        assembly_rate: T,
        cone_length: T,
        cone_equilibrium: T,
    ) -> Result<Self> {
        let p = Self {
            diffusivity,
            advection,
            degradation,
            growth_rate,
            assembly_rate,
            cone_length,
            cone_equilibrium,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("diffusivity", self.diffusivity),
            ("advection", self.advection),
            ("degradation", self.degradation),
            ("growth_rate", self.growth_rate),
            ("assembly_rate", self.assembly_rate),
            ("cone_length", self.cone_length),
            ("cone_equilibrium", self.cone_equilibrium),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v <= T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and strictly positive, got {v}"
                )));
            }
        }
        // a - g*l_c may have either sign but must be finite.
        let drift = self.advection - self.degradation * self.cone_length;
        if !drift.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "a - g*l_c is not finite ({drift})"
            )));
        }
        Ok(())
    }

    /// The boundary drift coefficient a - g*l_c (m/s).
    pub fn boundary_drift(&self) -> T {
        self.advection - self.degradation * self.cone_length
    }

    /// Reference parameter set used by the stock scenarios (SI units).
    pub fn reference() -> Self {
        Self {
            diffusivity: T::from_f64_lossy(10e-6),
            advection: T::from_f64_lossy(1e-8),
            degradation: T::from_f64_lossy(5e-7),
            growth_rate: T::from_f64_lossy(1.783e-5),
            assembly_rate: T::from_f64_lossy(0.053),
            cone_length: T::from_f64_lossy(4e-6),
            cone_equilibrium: T::from_f64_lossy(0.0119),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_params_validate() {
        BiophysicalParams::<f64>::reference().validate().unwrap();
    }

    #[test]
    fn rejects_nonpositive_constant() {
        let mut p = BiophysicalParams::<f64>::reference();
        p.degradation = 0.0;
        assert!(p.validate().is_err());
        p.degradation = -1.0;
        assert!(p.validate().is_err());
    }
}
