//! Simulation and analysis of cascaded down-conversion photon triplets.

pub mod analysis;
pub mod model;
pub mod phasematch;
pub mod sim;
pub mod stream;
pub mod ttag;

pub use model::{
    genuine_triplet_fraction, genuine_triplet_fraction_with, mean_pairs_from_pump,
    poisson_pair_probability, triplet_success_probability, ArmEfficiencies, ModelError,
    PairNumberDistribution, SourceParams, TripletFractionMode,
};
pub use sim::{expected_rates, simulate_run, ExpectedRates, SimConfig, SimError};
pub use stream::{Channel, TimeTag, TimeTagStream};
