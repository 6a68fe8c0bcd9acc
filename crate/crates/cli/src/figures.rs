//! Bundled run sets that regenerate the data behind each figure.

use toml::{Table, Value};

use crate::error::CliError;

const BUNDLES: &[(u32, &str)] = &[
    (1, include_str!("../figures/fig01.toml")),
    (2, include_str!("../figures/fig02.toml")),
    (3, include_str!("../figures/fig03.toml")),
    (4, include_str!("../figures/fig04.toml")),
    (5, include_str!("../figures/fig05.toml")),
    (6, include_str!("../figures/fig06.toml")),
    (7, include_str!("../figures/fig07.toml")),
    (8, include_str!("../figures/fig08.toml")),
    (9, include_str!("../figures/fig09.toml")),
    (10, include_str!("../figures/fig10.toml")),
    (11, include_str!("../figures/fig11.toml")),
    (12, include_str!("../figures/fig12.toml")),
    (13, include_str!("../figures/fig13.toml")),
    (14, include_str!("../figures/fig14.toml")),
];

pub fn available() -> Vec<u32> {
    BUNDLES.iter().map(|(n, _)| *n).collect()
}

/// A named run inside a figure bundle.
#[derive(Debug, Clone)]
pub struct BundledRun {
    pub name: String,
    pub table: Table,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub figure: u32,
    pub description: String,
    pub runs: Vec<BundledRun>,
}

pub fn bundle(figure: u32) -> Result<Bundle, CliError> {
    let text = BUNDLES
        .iter()
        .find(|(n, _)| *n == figure)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            CliError::Validation(format!("no bundled config for figure {figure}; available: {:?}", available()))
        })?;
    parse_bundle(figure, text)
}

pub fn parse_bundle(figure: u32, text: &str) -> Result<Bundle, CliError> {
    let mut root: Table = text
        .parse()
        .map_err(|e| CliError::Validation(format!("figure {figure}: {e}")))?;
    let description = root
        .remove("description")
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default();
    let Some(Value::Array(runs)) = root.remove("runs") else {
        return Err(CliError::Validation(format!("figure {figure}: missing [[runs]]")));
    };
    if let Some(k) = root.keys().next() {
        return Err(CliError::Validation(format!("figure {figure}: unknown key `{k}`")));
    }
    let runs = runs
        .into_iter()
        .map(|v| {
            let Value::Table(mut t) = v else {
                return Err(CliError::Validation(format!("figure {figure}: runs must be tables")));
            };
            let name = t
                .remove("name")
                .and_then(|n| n.as_str().map(str::to_string))
                .ok_or_else(|| CliError::Validation(format!("figure {figure}: run without a name")))?;
            Ok(BundledRun { name, table: t })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Bundle {
        figure,
        description,
        runs,
    })
}
