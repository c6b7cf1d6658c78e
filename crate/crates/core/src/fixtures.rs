//! Reference instances bundled with the crate.
//!
//! These are the small reference hypergraphs and decompositions used
//! throughout the test suites and the bundled benchmark corpus. The raw
//! files live under `assets/`.

use crate::decompose::Ghd;
use crate::hypergraph::Hypergraph;

pub const HP_TEXT: &str = include_str!("../assets/corpus/hp.hg");
pub const HP_PRIME_TEXT: &str = include_str!("../assets/corpus/hp_prime.hg");
pub const HP2_TEXT: &str = include_str!("../assets/corpus/hp2.hg");
pub const HP3_TEXT: &str = include_str!("../assets/corpus/hp3.hg");
pub const TRIANGLE_TEXT: &str = include_str!("../assets/corpus/triangle.hg");
pub const PATH2_TEXT: &str = include_str!("../assets/corpus/path2.hg");

pub const HP_PRIME_GHD_JSON: &str = include_str!("../assets/ghd/hp_prime_ghd.json");
pub const HP2_GHD_JSON: &str = include_str!("../assets/ghd/hp2_ghd.json");

/// Acyclic reference hypergraph (width 1).
pub fn h_p() -> Hypergraph {
    Hypergraph::parse(HP_TEXT).expect("bundled instance parses")
}

/// Cyclic reference hypergraph (width 2).
pub fn h_p_prime() -> Hypergraph {
    Hypergraph::parse(HP_PRIME_TEXT).expect("bundled instance parses")
}

/// The cyclic reference hypergraph plus the extra binary constraint `w7(c,i)`.
pub fn h_p2() -> Hypergraph {
    Hypergraph::parse(HP2_TEXT).expect("bundled instance parses")
}

/// The cyclic reference hypergraph after merging `b` into `g`.
pub fn h_p3() -> Hypergraph {
    Hypergraph::parse(HP3_TEXT).expect("bundled instance parses")
}

pub fn triangle() -> Hypergraph {
    Hypergraph::parse(TRIANGLE_TEXT).expect("bundled instance parses")
}

pub fn path2() -> Hypergraph {
    Hypergraph::parse(PATH2_TEXT).expect("bundled instance parses")
}

/// The width-2 reference decomposition of [`h_p_prime`].
pub fn hp_prime_ghd() -> Ghd {
    Ghd::from_json(HP_PRIME_GHD_JSON).expect("bundled decomposition parses")
}

/// The width-2 reference decomposition of [`h_p2`].
pub fn hp2_ghd() -> Ghd {
    Ghd::from_json(HP2_GHD_JSON).expect("bundled decomposition parses")
}
