//! Time integration of the pulled-back damped wave equation and the checks
//! built on it.

mod conjugation;
mod energy;
mod integrator;
mod lipschitz;
mod sampler;

pub use conjugation::{conjugated_flow_error, conjugated_flow_error_ops, ConjugationReport};
pub use energy::{e2_of, energy_profile, fit_envelope, EnergyProfile, EnvelopeFit};
pub use integrator::{evolve, split_steps, step, Integrator, Trajectory};
pub use lipschitz::{lipschitz_envelope_check, GronwallReport, LipschitzConstants, GRONWALL_SLACK};
pub use sampler::{
    distance_matrix, draw_initial_condition, farthest_point_indices, flow_images, run_ic, sample_attractor,
    select_points, AttractorSample, IcRun, Provenance, SamplerConfig,
};
