pub mod numerics;
pub mod par;
pub mod paths;
pub mod models;
pub mod measure;
pub mod arbitrage;
pub mod scenarios;
