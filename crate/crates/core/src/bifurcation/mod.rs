//! Equilibria of the frozen system, their branches and bifurcation points,
//! and basins of attraction.

pub mod basin;
pub mod diagram;
pub mod equilibria;
pub mod equivalence;

pub use basin::{basin, BasinInterval};
pub use diagram::{
    build_diagram, build_diagram_with, BifurcationClass, BifurcationDiagram, BifurcationPoint, Branch, DiagramConfig,
    Incidence, Side,
};
pub use equilibria::{classify, find_equilibria, find_equilibria_with, Equilibrium, Kind, RootTolerances};
pub use equivalence::{check_bifurcation_equivalence, EquivalenceReport};
