//! Shipped defaults (placeholder while scaffolding).
pub const RARE_THRESHOLD: u32 = 20;
