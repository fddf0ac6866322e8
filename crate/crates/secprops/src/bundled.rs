// SPDX-License-Identifier: Apache-2.0

//! Property suites shipped with the crate.

use std::fmt;
use std::str::FromStr;

use crate::suite::{Suite, SuiteError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Ip,
    Firmware,
    System,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Ip, Level::Firmware, Level::System];

    pub fn name(self) -> &'static str {
        match self {
            Level::Ip => "ip",
            Level::Firmware => "firmware",
            Level::System => "system",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Level::Ip => include_str!("../suites/ip.props"),
            Level::Firmware => include_str!("../suites/firmware.props"),
            Level::System => include_str!("../suites/system.props"),
        }
    }

    pub fn suite(self) -> Result<Suite, SuiteError> {
        Suite::parse(self.text())
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|l| l.name() == s).ok_or_else(|| format!("unknown suite `{s}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Kind;

    fn counts(l: Level) -> (usize, usize, usize) {
        let e = l.suite().unwrap().expand().unwrap();
        assert!(e.warnings.is_empty(), "{:?}", e.warnings);
        let ift = e.properties.iter().filter(|p| p.kind() == Kind::Ift).count();
        (l.suite().unwrap().templates.len(), ift, e.properties.len() - ift)
    }

    #[test]
    fn suite_sizes() {
        assert_eq!(counts(Level::Ip), (18, 164, 152));
        assert_eq!(counts(Level::Firmware), (4, 1436, 2));
        assert_eq!(counts(Level::System), (2, 76, 0));
    }
}
