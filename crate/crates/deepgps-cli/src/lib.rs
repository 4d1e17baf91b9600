//! Experiment orchestration for the weakly-supervised positioning workbench:
//! configuration, presets, the collect/train/eval/sweep commands, and run
//! manifests.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod presets;
