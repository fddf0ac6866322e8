// SPDX-License-Identifier: Apache-2.0

//! Scenario runner, performance experiments, property-suite testbenches
//! and mutation runs for the access control wrapper model.

pub mod designs;
pub mod experiments;
pub mod monitor;
pub mod mutation;
pub mod report;
pub mod scenario;
pub mod testbench;
