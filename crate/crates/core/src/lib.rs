//! Multi-level hate speech annotation toolkit.
//!
//! - [`corpus`]: ingestion, anonymization, Maltese diacritic folding, keyword subcorpora.
//! - [`sampling`]: seeded stratified selection and per-annotator presentation orders.
//! - [`scheme`]: the hierarchical annotation scheme, routing and label derivations.
//! - [`agreement`]: percent agreement, Fleiss' and Randolph's kappa.
//! - [`store`]: append-only annotation event log and dataset export.

pub mod agreement;
pub mod corpus;
pub mod sampling;
pub mod scheme;
pub mod store;
