//! Latent-space evolution of tile-based platformer levels.
//!
//! Pipeline: parse a text-encoded level into tile grids, train a small
//! Wasserstein-GAN generator on one-hot sliding windows, then search the
//! generator's 32-dimensional latent space with CMA-ES for levels that hit
//! static tile-distribution targets or agent-measured difficulty, judged by
//! a deterministic tick simulator with an A* completion agent.

pub mod cmaes;
pub mod corpus;
pub mod neural;
pub mod render;
pub mod fitness;
pub mod gan;
pub mod sim;
