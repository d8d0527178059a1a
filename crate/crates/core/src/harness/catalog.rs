//! Built-in manufactured problems.

use std::path::Path;

use super::problem_file::{load_problem, parse_problem, ProblemFile};
use crate::error::{Error, Result};

const ENTRIES: [(&str, &str); 7] = [
    ("exp_growth", include_str!("../../catalog/exp_growth.toml")),
    ("quadratic", include_str!("../../catalog/quadratic.toml")),
    ("feedback", include_str!("../../catalog/feedback.toml")),
    (
        "factorial_infinite",
        include_str!("../../catalog/factorial_infinite.toml"),
    ),
    (
        "bilinear_first_kind",
        include_str!("../../catalog/bilinear_first_kind.toml"),
    ),
    (
        "classical_first_kind",
        include_str!("../../catalog/classical_first_kind.toml"),
    ),
    (
        "exp_first_kind",
        include_str!("../../catalog/exp_first_kind.toml"),
    ),
];

pub fn catalog_names() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|(name, _)| *name)
}

/// Raw TOML of a catalog entry.
pub fn catalog_source(name: &str) -> Option<&'static str> {
    ENTRIES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| *src)
}

pub fn load_catalog(name: &str) -> Result<ProblemFile> {
    let src = catalog_source(name).ok_or_else(|| {
        Error::invalid(format!(
            "unknown catalog problem `{name}`; available: {}",
            catalog_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_problem(src, name)
}

/// A file path if one exists, otherwise a catalog name.
pub fn resolve(target: &str) -> Result<ProblemFile> {
    if Path::new(target).is_file() {
        return load_problem(target);
    }
    if catalog_source(target).is_some() {
        return load_catalog(target);
    }
    if target.ends_with(".toml") || target.contains(std::path::MAIN_SEPARATOR) {
        return load_problem(target);
    }
    load_catalog(target)
}
