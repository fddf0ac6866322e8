// SPDX-License-Identifier: Apache-2.0

//! Bus controllers, peripherals and the trusted entity.

pub mod dma;
pub mod memory;
pub mod te;

pub use dma::{Descriptor, Dma, DmaMode, DmaProgram, TxnRecord};
pub use memory::{word_signal, Memory, MemoryConfig};
pub use te::{IllegalEvent, ManagedAcw, Readmission, Te, TeConfig, TeError};
