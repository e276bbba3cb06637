//! Pullback attractors, stable paths and the tracking diagnostics between them.

pub mod path;
pub mod pseudo;
pub mod pullback;

pub use path::{make_stable_path, PathCrossing, PathSegment, RoutingPolicy, StablePath};
pub use pseudo::{
    construct_pseudo_orbit, verify_pseudo_orbit, Jump, PseudoOrbit, PseudoOrbitConfig, PseudoOrbitReport,
};
pub use pullback::{
    compute_pullback, eps_close_tracks, forward_limit, forward_limit_on, ForwardLimit, PullbackAttractor,
    PullbackConfig, TrackingReport,
};
