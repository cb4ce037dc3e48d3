//! Energy and information balance: densities, fluxes, source terms, their
//! spatial integrals and the discrete balance residual.

mod energy;
mod info;
mod residual;
mod stream;
mod trace;

pub use energy::{energy_fields, EnergyFields};
pub use info::{
    info_density, info_fields, info_flux, info_sources, integrate_space, ActiveSources, InfoContext, InfoFields,
    InfoLevel, LevelInput, PotentialForms,
};
pub use residual::{balance_residual, ResidualMask, ResidualReport};
pub use stream::{analyze_pair, CellWindow, PairSolvers, SensorSeries, StreamOutput, StreamPlan};
pub use trace::{cumulative, self_interference_check, BalanceTrace, BoundaryTrace, WindowReport};
