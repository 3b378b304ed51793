pub mod config;
pub mod dilation;
pub mod error;
pub mod matcore;
pub mod numrange;
pub mod omax;
pub mod rng;
