// SPDX-License-Identifier: Apache-2.0

//! Cycle-based transaction-level model of an AXI system with per-controller
//! access control wrappers.

pub mod acw;
pub mod agents;
pub mod axi;
pub mod fabric;
pub mod kernel;
pub mod topology;
