//! Turns a chosen action into concrete dashboard operations via a
//! data-driven catalogue, and keeps the snapshot served at `/api/state`.

pub mod catalogue;
pub mod engine;

pub use catalogue::{
    validate_catalogue, AdaptationOperation, AdaptationStrategy, Catalogue, CatalogueEntry, CatalogueError, PropertySpec,
    PropertyType, Violation, Vocabulary,
};
pub use engine::{engine_task, AdaptationConfig, AdaptationEngine, CurrentState, DeclaredView, StateStore};
