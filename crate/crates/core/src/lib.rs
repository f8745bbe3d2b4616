//! Edge-to-cloud mobility analytics.
//!
//! Synthetic transit feeds ([`feedgen`]) are cleaned by edge nodes
//! ([`edge_node`]), ordered and labelled stop/move by the fabric ([`fabric`]),
//! and stored as hourly trajectory graph snapshots indexed by a time tree
//! ([`graph_cloud`]) that answers shortest-path, degree and PageRank queries.
//! [`pipeline`] wires the stages together with bounded channels.

pub mod config;
pub mod edge_node;
pub mod fabric;
pub mod feed_model;
pub mod feedgen;
pub mod graph_cloud;
pub mod hour;
pub mod pipeline;

pub use feed_model::{CleanTuple, ContextTuple, MotionLabel, RawTuple, RejectReason, RejectRecord};
pub use hour::HourBucket;
