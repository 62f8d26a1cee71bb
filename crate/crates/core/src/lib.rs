pub mod analysis;
pub mod blocking;
pub mod config;
pub mod counts;
pub mod dist;
pub mod error;
pub mod reference;
pub mod run;
pub mod sim;
pub mod timing;
