pub mod analysis;
pub mod document;
pub mod engine;
pub mod expr;
pub mod lifetable;
pub mod model;
pub mod params;
pub mod report;
pub mod survival;
pub mod uncertainty;
