//! Tipping classification: connectivity of stable paths, forward basin
//! stability, critical-rate windows and sufficient conditions.

pub mod classify;
pub mod connectivity;
pub mod energy;
pub mod predicates;
pub mod rates;
pub mod sweep;

pub use classify::{classify_tipping, ClassifyConfig, Predicates, ShiftSummary, Tolerances, TippingReport, Verdict};
pub use connectivity::{lambda_connected, reachable_endpoints, ConnectivityGraph, GraphEdge, GraphNode, Reachability, RouteEnd};
pub use energy::{energy_balance_report, EnergyBalanceReport, EnergyCase};
pub use predicates::{
    bifurcation_on_start_branch, fast_middle, foreign_basin_check, forward_basin_stable, no_rtip_neighborhood,
    reparametrization_witness, BasinStability, BasinWitness, EndTarget, FoldInterval, ForeignBasin, ForeignBasinReport,
    NoTipNeighborhood, ReparamWitness,
};
pub use rates::{
    find_rate_windows, find_rate_windows_against, limit_at_rate, RateSample, RateScanConfig, RateScanResult, RateWindow,
};
pub use sweep::{sweep_decompose, MonotoneSweep};
