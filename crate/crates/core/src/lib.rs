//! Dependency-health analysis for JVM-ecosystem projects.
//!
//! The crate is organised as a pipeline:
//!
//! * [`manifest`] extracts declared library dependencies from `pom.xml` and
//!   `build.gradle` files.
//! * [`history`] mines library version updates from a project's commit stream.
//! * [`registry`] fetches release metadata and jar artifacts (network, cache or
//!   local fixture directory).
//! * [`bytecode`] parses class files, extracts library APIs and project call
//!   sites, builds class-hierarchy call graphs and fingerprints method bodies.
//! * [`metrics`] computes usage intensity, outdatedness, update intensity and
//!   update delay, plus distribution reports.
//! * [`bugdb`] holds severe bugs, their affected versions and buggy methods.
//! * [`alert`] runs risk and effort analysis for projects using buggy versions.
//!
//! [`version`] provides the version ordering shared by every stage.

pub mod alert;
pub mod bugdb;
pub mod bytecode;
pub mod diag;
pub mod history;
pub mod manifest;
pub mod metrics;
pub mod registry;
pub mod version;

pub use diag::{Diagnostic, Diagnostics};
pub use manifest::{CommitRef, Library, LibraryDependency, LibraryVersionRef, SourceSet};
pub use version::{compare_versions, parse_version, ParsedVersion, UpdateClass, VersionString};

/// Version of every JSON/CSV report schema emitted by the crate.
pub const SCHEMA_VERSION: u32 = 1;
