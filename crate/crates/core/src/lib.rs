pub mod db;
pub mod dissociation;
pub mod engine;
pub mod enumerate;
pub mod error;
pub mod harness;
pub mod optimize;
pub mod oracle;
pub mod plan;
pub mod query;
pub mod random;
pub mod sql;
