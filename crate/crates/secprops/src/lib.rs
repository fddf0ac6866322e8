// SPDX-License-Identifier: Apache-2.0

//! Security property language: parsing, template expansion over asset
//! manifests, and checking against simulation runs.

pub mod ast;
pub mod bundled;
pub mod eval;
pub mod parse;
pub mod report;
pub mod suite;

pub use ast::{Expr, Kind, PropertyAst, Radix};
pub use bundled::Level;
pub use eval::{
    differential, eval_ift, eval_suite, eval_trace, Differential, EvalError, PropertyResult, RunPlan, Status,
};
pub use parse::{parse_atom, parse_property, ParseError, ParseErrorKind};
pub use report::{Counts, Report};
pub use suite::{expand_template, AssetManifest, Environment, Expansion, Property, Suite, SuiteError, Template};
