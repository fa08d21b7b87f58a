//! Closed-form performance: despreading error, union bounds, PEPs, rates,
//! energy saving and complexity counts.

mod bounds;
mod despread;
mod pep;
pub mod quadrature;
mod tables;

pub use bounds::{
    abep_estbc_ml_bound, abep_sm_union_bound, abep_stbc_sm_union_bound, abep_total, estbc_pair_spectra,
    stbc_pair_spectra, AbepBreakdown, AnalyticModel, PairSpectra, DEFAULT_PAIR_CAP,
};
pub use despread::{abep_despreading_bits, despreading_error};
pub use pep::{dense_spectrum, gram_spectrum, pep_approx, pep_exact, q_approx, q_function, PepSpectrum, RANK_TOL};
pub use tables::{
    bits_per_interval, complexity_count, complexity_formula, complexity_table, data_rate, energy_saving,
    energy_saving_at, energy_table, implicit_bits, rate_table, sequence_pair_count, stbc_codeword_count,
    truncate_2dp, ComplexityParams, ComplexityRow, Detector, EnergyRow, RateRow, ENERGY_TABLE_BT, TABLE_ROWS,
};
