//! Phase-space discretization: the grid, the distribution field, its
//! velocity moments, the local alignment field and the integral
//! observables together with their exact production rates.

mod field;
mod grid;
mod observables;
mod support;

pub use field::{
    alignment_field, h_profile, moments, slice_moments, DistributionField, MomentField,
    RHO_FLOOR_REL,
};
pub use grid::PhaseGrid;
pub use observables::{
    fmt_p, observables, observables_with, production_rates, production_rates_with,
    ObservableOptions, ObservableRow, ObservableSeries, ProductionRates, ENTROPY_FLOOR,
    SUPPORT_THRESHOLD_REL,
};
pub use support::{diameter_bound, SupportSet};
