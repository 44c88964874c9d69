pub mod allocation;
pub mod game;
pub mod lp;
pub mod market;
pub mod report;
pub mod scenario;
pub mod study;
