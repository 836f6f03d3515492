//! Sensorimotor object recognition with grid-cell location codes.
//!
//! A sensor visits the patches of a 5x5 feature grid. Grid-cell modules track
//! where it is on the object by path integration, dendritic segments bind
//! locations to sensed features, and an object is classified once its
//! location activity falls within the stored codes of exactly one class.

pub mod dataset;
pub mod dendrite;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod inference;
pub mod knn;
pub mod learning;
pub mod memory;
pub mod network;
pub mod sdr;
pub mod sensory;

pub use dataset::{FeatureGrid, GridLayout, ProtocolKind, SequenceProtocol, Source, Split, SyntheticSpec};
pub use dendrite::{DendriticSegment, SegmentStore};
pub use error::{Error, FormatError, FormatErrorKind, Result};
pub use experiment::{ClassifierKind, ExperimentConfig};
pub use grid::{GridModuleConfig, LocationActivity, LocationRepresentation, ModuleState, Movement, Phase};
pub use inference::{Classification, InferenceResult, InferenceSession, Status, Verdict};
pub use knn::{knn_classify, KnnClassifier};
pub use memory::{ClassMemory, LocationCode};
pub use network::{Network, NetworkConfig};
pub use sdr::Sdr;
pub use sensory::SensoryLayer;
