//! Predimension-based amalgamation of finite relational structures.
//!
//! The engine evaluates exact predimensions, decides strong (self-sufficient)
//! inclusions, computes closures, amalgamates freely and thriftily, builds
//! finite approximations of generic models and audits the geometry they carry.
//!
//! Predimension arithmetic is generic over an exact [`Scalar`]; the aliases
//! below fix the two shipped choices.

pub mod amalgam;
pub mod audit;
pub mod builder;
pub mod canon;
pub mod collapse;
pub mod error;
pub mod extension;
mod flow;
pub mod geometry;
mod linalg;
pub mod oracle;
pub mod predim;
pub mod report;
pub mod sample;
pub mod scalar;
pub mod set;
pub mod strong;
pub mod structure;
pub mod text;

pub use canon::{canonical_form, canonical_form_pointed};
pub use error::{Error, Result};
pub use predim::{delta, delta_rel, Evaluator, PredimensionSpec};
pub use scalar::{Scalar, Weight};
pub use set::ElemSet;
pub use structure::{induced_substructure, is_embedding, Embedding, FinStructure, Signature};

/// Exact rationals over `i64`; enough for desk-scale structures.
pub type Rational = num_rational::Ratio<i64>;
/// Arbitrary-precision rationals.
pub type BigRational = num_rational::Ratio<num_bigint::BigInt>;

pub type Spec = PredimensionSpec<Rational>;
pub type BigSpec = PredimensionSpec<BigRational>;
