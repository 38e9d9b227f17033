//! Random access into every version of a collection of strings described by
//! a tree of single-character edits.
//!
//! The pipeline: [`version`] parses and validates the tree, [`euler`] turns
//! it into labeled horizontal segments, and [`segment`] answers "the `j`-th
//! lowest segment crossing `x`" with a tree of [`slab`] indexes and
//! [`rank_select`] sequences. [`persistent`] ties it together.

pub mod bits;
pub mod cli;
pub mod codec;
pub mod error;
pub mod euler;
pub mod marked;
pub mod persistent;
pub mod rank_select;
pub mod segment;
pub mod serialize;
pub mod slab;
pub mod testkit;
pub mod version;

pub use error::{Error, Result};
pub use persistent::{PersistentStringIndex, PrefixSelectIndex};
pub use segment::{SegmentIndex, SegmentIndexConfig};
pub use slab::Backend;
pub use version::{parse_version_tree, VersionId, VersionTree};
