//! Taxi GPS traces to urban regions and DTN carrier selection.
//!
//! The pipeline runs in stages, each a module here:
//!
//! - [`ingest`]: dataset adapters and the canonical trace format
//! - [`trajectory`]: segmentation, stop points and trips
//! - [`regions`]: visit-density quad-tree and visit / departure events
//! - [`stats`]: distribution fitting, Akaike weights, Pearson correlation
//! - [`functions`]: hourly transactions, Apriori and functional labels
//! - [`dtn`]: encounter extraction, carrier selection and delivery simulation
//! - [`pipeline`]: config, staged artifacts and the reproducibility manifest

pub mod dtn;
pub mod functions;
pub mod ingest;
pub mod pipeline;
pub mod regions;
pub mod stats;
pub mod synth;
pub mod trajectory;
