//! Scenario documents shipped with the binary.

use crate::error::CliError;
use crate::scenario::ConfigDocument;

/// `(name, document)` pairs of the bundled figure scenarios.
pub const BUNDLED: [(&str, &str); 6] = [
    ("fig2a", include_str!("../scenarios/fig2a.json")),
    ("fig2b", include_str!("../scenarios/fig2b.json")),
    ("fig4", include_str!("../scenarios/fig4.json")),
    ("fig5", include_str!("../scenarios/fig5.json")),
    ("fig6", include_str!("../scenarios/fig6.json")),
    ("fig7", include_str!("../scenarios/fig7.json")),
];

/// Loads a bundled document by file name (`fig7`) or by the name of one of
/// its scenarios (`fig7_cw`, which selects only that scenario).
pub fn bundled(name: &str) -> Result<ConfigDocument, CliError> {
    if let Some((_, text)) = BUNDLED.iter().find(|(n, _)| *n == name) {
        return ConfigDocument::parse(text);
    }
    for (_, text) in BUNDLED {
        let doc = ConfigDocument::parse(text)?;
        if doc.scenarios.iter().any(|s| s.name == name) {
            return doc.select(name);
        }
    }
    let names: Vec<&str> = BUNDLED.iter().map(|(n, _)| *n).collect();
    Err(CliError::Config(format!(
        "unknown bundled scenario `{name}` (available: {})",
        names.join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_bundled_document_parses() {
        for (name, text) in BUNDLED {
            let doc = ConfigDocument::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            for s in &doc.scenarios {
                assert!(s.name.starts_with(name), "{} in {name}", s.name);
                assert!(!s.grid().unwrap().points.is_empty());
            }
        }
    }

    #[test]
    fn lookup_by_scenario_name() {
        assert_eq!(bundled("fig7").unwrap().scenarios.len(), 2);
        let doc = bundled("fig7_cw").unwrap();
        assert_eq!(doc.scenarios.len(), 1);
        assert_eq!(doc.scenarios[0].name, "fig7_cw");
        assert!(bundled("fig99").is_err());
    }
}
