pub mod fairness;
pub mod setting;
pub mod experiment;
pub mod report;
