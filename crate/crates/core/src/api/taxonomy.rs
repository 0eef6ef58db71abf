use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::{ApiError, ApiImport};

/// Prefix map from fully-qualified API names to domain labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiTaxonomy {
    entries: HashMap<String, String>,
    /// (prefix, label) in file order.
    ordered: Vec<(String, String)>,
    label_universe: Vec<String>,
}

pub type DomainLabelSet = BTreeSet<String>;

const SEPARATORS: [char; 2] = ['.', '/'];

impl ApiTaxonomy {
    /// Build from (prefix, label) pairs; line numbers in errors are 1-based pair positions.
    pub fn from_pairs<I, P, L>(pairs: I) -> Result<Self, ApiError>
    where
        I: IntoIterator<Item = (P, L)>,
        P: AsRef<str>,
        L: AsRef<str>,
    {
        let mut t = Self {
            entries: HashMap::new(),
            ordered: Vec::new(),
            label_universe: Vec::new(),
        };
        for (i, (p, l)) in pairs.into_iter().enumerate() {
            t.insert(p.as_ref(), l.as_ref(), i as u64 + 1)?;
        }
        Ok(t)
    }

    fn insert(&mut self, prefix: &str, label: &str, line: u64) -> Result<(), ApiError> {
        let prefix = prefix.trim().trim_matches(&SEPARATORS[..]);
        let label = label.trim();
        if prefix.is_empty() {
            return Err(ApiError::EmptyPrefix { line });
        }
        if label.is_empty() {
            return Err(ApiError::EmptyLabel { line });
        }
        if self.entries.contains_key(prefix) {
            return Err(ApiError::DuplicatePrefix {
                line,
                prefix: prefix.to_string(),
            });
        }
        if !self.label_universe.iter().any(|l| l == label) {
            self.label_universe.push(label.to_string());
        }
        self.entries.insert(prefix.to_string(), label.to_string());
        self.ordered.push((prefix.to_string(), label.to_string()));
        Ok(())
    }

    /// Parse CSV text with header `prefix,label`; `#` lines are comments.
    pub fn parse(text: &str) -> Result<Self, ApiError> {
        // Drop comment and blank lines up front, remembering original line numbers.
        let mut line_numbers = Vec::new();
        let mut kept = String::with_capacity(text.len());
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            line_numbers.push(i as u64 + 1);
            kept.push_str(line);
            kept.push('\n');
        }
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(kept.as_bytes());
        let mut t = Self {
            entries: HashMap::new(),
            ordered: Vec::new(),
            label_universe: Vec::new(),
        };
        for (idx, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| ApiError::Csv(e.to_string()))?;
            let line = line_numbers.get(idx).copied().unwrap_or(0);
            if idx == 0 {
                if record.len() != 2 || &record[0] != "prefix" || &record[1] != "label" {
                    return Err(ApiError::BadHeader(record.iter().collect::<Vec<_>>().join(",")));
                }
                continue;
            }
            if record.len() != 2 {
                return Err(ApiError::Csv(format!(
                    "line {line}: expected 2 fields, found {}",
                    record.len()
                )));
            }
            t.insert(&record[0], &record[1], line)?;
        }
        if line_numbers.is_empty() {
            return Err(ApiError::BadHeader(String::new()));
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self, ApiError> {
        let text = std::fs::read_to_string(path).map_err(|e| ApiError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// The reference taxonomy shipped with the crate.
    pub fn reference() -> Self {
        Self::parse(include_str!("../../data/taxonomy.csv")).expect("shipped taxonomy is valid")
    }

    pub fn label_universe(&self) -> &[String] {
        &self.label_universe
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.ordered
    }

    /// Label of the longest separator-aligned prefix of `name`.
    pub fn lookup(&self, name: &str) -> Option<&str> {
        let name = name.trim_matches(&SEPARATORS[..]);
        if let Some(l) = self.entries.get(name) {
            return Some(l);
        }
        name.char_indices()
            .rev()
            .filter(|(_, c)| SEPARATORS.contains(c))
            .find_map(|(i, _)| self.entries.get(&name[..i]).map(String::as_str))
    }
}

/// Union of the labels of all matched imports.
pub fn map_to_domains(imports: &[ApiImport], taxonomy: &ApiTaxonomy) -> DomainLabelSet {
    imports
        .iter()
        .filter_map(|i| taxonomy.lookup(&i.qualified_name))
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::api::Language;

    fn import(name: &str) -> ApiImport {
        ApiImport {
            raw_statement: format!("import {name};"),
            qualified_name: name.to_string(),
            language: Language::Java,
        }
    }

    #[test]
    fn parse_basic() {
        let t = ApiTaxonomy::parse("prefix,label\njava.sql,DB\njavax.swing,UI\n").unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.label_universe(), &["DB".to_string(), "UI".to_string()]);
    }

    #[test]
    fn comments_and_blank_lines() {
        let t = ApiTaxonomy::parse("prefix,label\n# databases\njava.sql,DB\n\n  javax.swing , UI \n").unwrap();
        assert_eq!(t.lookup("javax.swing.JPanel"), Some("UI"));
    }

    #[test]
    fn duplicate_prefix_reports_second_line() {
        let err = ApiTaxonomy::parse("prefix,label\njava.sql,DB\njava.sql,IO\n").unwrap_err();
        assert!(
            matches!(err, ApiError::DuplicatePrefix { line: 3, ref prefix } if prefix == "java.sql"),
            "{err:?}"
        );
    }

    #[test]
    fn empty_label_reports_line() {
        let err = ApiTaxonomy::parse("prefix,label\njava.sql,DB\n# c\njava.io,\n").unwrap_err();
        assert!(matches!(err, ApiError::EmptyLabel { line: 4 }), "{err:?}");
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            ApiTaxonomy::parse("name,domain\na,b\n"),
            Err(ApiError::BadHeader(_))
        ));
    }

    #[test]
    fn longest_prefix_wins() {
        let t = ApiTaxonomy::from_pairs([("java.sql", "DB"), ("javax.swing", "UI"), ("javax", "Utility")]).unwrap();
        let got = map_to_domains(
            &[
                import("java.sql.Connection"),
                import("javax.swing.JPanel"),
                import("org.unknown.X"),
            ],
            &t,
        );
        assert_eq!(got, ["DB", "UI"].iter().map(|s| s.to_string()).collect());
        assert_eq!(t.lookup("javax.crypto.Cipher"), Some("Utility"));
    }

    #[test]
    fn separator_alignment() {
        let t = ApiTaxonomy::from_pairs([("java.sql", "DB"), ("QtWidgets", "UI")]).unwrap();
        assert_eq!(t.lookup("java.sqlx.Thing"), None);
        assert_eq!(t.lookup("java.sql"), Some("DB"));
        assert_eq!(t.lookup("QtWidgets/QApplication"), Some("UI"));
        assert_eq!(t.lookup("QtWidgetsExtra/X"), None);
    }

    #[test]
    fn empty_imports() {
        let t = ApiTaxonomy::from_pairs([("java.sql", "DB")]).unwrap();
        assert!(map_to_domains(&[], &t).is_empty());
    }

    #[test]
    fn reference_has_31_labels() {
        let t = ApiTaxonomy::reference();
        assert_eq!(t.label_universe().len(), 31);
    }
}
