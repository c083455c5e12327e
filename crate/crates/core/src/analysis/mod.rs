//! Fixed points, spectra, connectivity and free energies of the model flows.

pub mod connectivity;
pub mod fixed_points;
pub mod flow_grid;
pub mod free_energy;
pub mod spectrum;

pub use connectivity::{
    disconnection_test, separatrix_containment, ConnectivityReport, ContainmentReport,
    CONNECTIVITY_THRESHOLD,
};
pub use fixed_points::{
    classify_fixed_point, find_fixed_points, Classification, FixedPointClass, FixedPointRecord,
    FixedPointSearch,
};
pub use flow_grid::{flow_field_grid, GridChart, GridSample};
pub use free_energy::{
    detect_transitions, free_energy, phi_closed_form, phi_sweep, FreeEnergyConfig,
    FreeEnergyCurve, FreeEnergyEstimate, Transition, TransitionConfig, TransitionKind,
};
pub use spectrum::{linear_generator, linear_spectrum, numeric_spectrum, Regime, SpectrumRecord};
