//! Scalar fields, parameter shifts and the nonautonomous integrator.

pub mod field;
pub mod integrate;
pub mod shift;

pub use field::{ScalarField, StateDomain};
pub use integrate::{
    integrate, integrate_until_escape, DenseStep, Escape, IntegratorConfig, IntegratorStats, Method, Sampling, Stepper, Trajectory,
};
pub use shift::{validate_shift, ParameterShift, ShiftFamily, ShiftValidation};
