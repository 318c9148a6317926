pub mod adversary;
pub mod coding;
pub mod decoders;
pub mod experiments;
pub mod gf2;
pub mod lt;
pub mod rng;
