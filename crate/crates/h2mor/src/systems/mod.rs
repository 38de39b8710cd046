//! Full-order models, reduced models and H2 norms.

pub(crate) mod atoms;
mod matrix_market;
mod model;
mod norms;
mod quadrature;
mod rom;

pub use matrix_market::{load_state_space, parse_matrix_market, read_matrix_market};
pub use model::{DelaySystem, ModelKind, StateSpace, Tabulated, TransferFunctionModel};
pub use norms::{
    check_meier_luenberger, h2_error, h2_norm, h2_norm_state_space, ErrorMethod, H2Error,
    InterpolationMismatch, MeierLuenbergerReport, QuadratureOptions,
};
pub use quadrature::{bcc_rule, BccRule};
pub(crate) use rom::quadratic_roots;
pub use rom::{h2_inner_rom, h2_norm_rom, rom_difference_norm, RationalRom};
