//! Assertion generation engine: information bank, critic-guided tree
//! search over assertion sets, syntax checking and final combination.
//!
//! Numeric code is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, with `F32` variants for the rest.

pub mod agents;
pub mod bank;
pub mod pipeline;
pub mod rag;
pub mod scalar;
pub mod sva;
pub mod tree;

pub type SearchParams = tree::SearchParams<f64>;
pub type ReasoningNode = tree::ReasoningNode<f64>;
pub type ReasoningTree = tree::ReasoningTree<f64>;
pub type CritiqueResult = agents::CritiqueResult<f64>;
pub type FlatIndex = rag::FlatIndex<f64>;
pub type RunConfig = pipeline::RunConfig<f64>;
pub type SignalRunResult = pipeline::SignalRunResult<f64>;
pub type DesignRun = pipeline::DesignRun<f64>;

pub type SearchParamsF32 = tree::SearchParams<f32>;
pub type ReasoningTreeF32 = tree::ReasoningTree<f32>;
pub type FlatIndexF32 = rag::FlatIndex<f32>;
pub type RunConfigF32 = pipeline::RunConfig<f32>;
