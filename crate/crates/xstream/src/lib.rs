//! Tick-accurate simulator of a processor ring that maintains connected
//! components over an unbounded edge stream, with bulk aging.

pub mod aging;
pub mod dfr;
pub mod experiments;
pub mod gen;
pub mod model;
pub mod pipelined;
pub mod processor;
pub mod queries;
pub mod ring;
pub mod stream;
pub mod union_find;

pub use aging::{AgingError, AgingPredicate, TradeoffParams};

/// Double-precision tradeoff parameters.
pub type Tradeoff = TradeoffParams<f64>;
/// Single-precision tradeoff parameters.
pub type Tradeoff32 = TradeoffParams<f32>;
