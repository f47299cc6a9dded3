//! The four benchmark domains shipped with the crate.

use super::{parse_domain, Domain};

pub const BLOCKSWORLD: &str = include_str!("../../domains/blocksworld.pddl");
pub const HANOI: &str = include_str!("../../domains/hanoi.pddl");
pub const GRIPPERS: &str = include_str!("../../domains/grippers.pddl");
pub const DRIVERLOG: &str = include_str!("../../domains/driverlog.pddl");

/// `(tag, source)` for every bundled domain.
pub const ALL: [(&str, &str); 4] = [("bw", BLOCKSWORLD), ("hn", HANOI), ("gr", GRIPPERS), ("dl", DRIVERLOG)];

/// Parses one of the bundled sources. Panics only if the shipped file is broken.
pub fn domain(source: &str) -> Domain {
    parse_domain(source).expect("bundled domain parses")
}
