//! Expert-to-generalist whole-body control pipeline for a planar humanoid.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`net`] — parameter stores, reverse-mode autodiff, MLP and gated
//!   attention networks, Adam, checkpoints.
//! - [`sim`] — planar articulated robot simulation with PD control, ground
//!   contact, domain randomization, and a fixed-perturbation dynamics
//!   variant that stands in for deployment conditions.
//! - [`motions`] — synthetic reference motion generation for six behavior
//!   families plus feature extraction for clustering.
//! - [`cluster`] — dual-encoder autoencoder aligning motion and tag
//!   latents, K-means, and elbow-method cluster-count selection.
//! - [`rl`] — PPO with GAE and parallel rollout collection.
//! - [`tracking`] — motion-tracking task (observations, rewards, metrics),
//!   base policy training, and per-cluster expert fine-tuning.
//! - [`delta`] — per-cluster residual ankle-action models that make the
//!   nominal simulator reproduce deployment trajectories, with iterative
//!   expert fine-tuning.
//! - [`distill`] — DAgger distillation of the experts into a single
//!   gated-attention generalist.
//! - [`pipeline`] — configs, stage orchestration, manifests, and reports.

pub mod cluster;
pub mod delta;
pub mod distill;
pub mod motions;
pub mod net;
pub mod pipeline;
pub mod rl;
pub mod sim;
pub mod tracking;
pub mod util;
