//! Exact simulation of the four-site extended Bose-Hubbard model and its
//! NOON-state preparation protocols.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod model;
mod numeric;
pub mod presets;
pub mod protocols;
pub mod robustness;
pub mod scalar;
pub mod spectrum;

pub use error::{Error, Result};
pub use fock::{FockBasis, FockState, Ladder, OperatorExpr, QuantumState, Site};
pub use model::{DerivedScales, HermitianOperator, ModelParameters};
pub use scalar::Real;
pub use presets::{ParameterSet, Preset};
pub use protocols::{ProtocolConfig, ProtocolEngine};

pub type State64 = QuantumState<f64>;
pub type State32 = QuantumState<f32>;
pub type Operator64 = HermitianOperator<f64>;
pub type Operator32 = HermitianOperator<f32>;
pub type Params64 = ModelParameters<f64>;
pub type Params32 = ModelParameters<f32>;
pub type Config64 = ProtocolConfig<f64>;
pub type Config32 = ProtocolConfig<f32>;
pub type Engine64 = ProtocolEngine<f64>;
pub type Engine32 = ProtocolEngine<f32>;
