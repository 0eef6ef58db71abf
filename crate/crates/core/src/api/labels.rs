use serde::{Deserialize, Serialize};

use super::{extract_imports, map_to_domains, ApiError, ApiTaxonomy, DomainLabelSet, Language};
use crate::links::LinkedDataset;
use crate::miner::{Issue, ProjectSnapshot};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledIssue {
    pub issue: Issue,
    pub labels: DomainLabelSet,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelingSummary {
    pub labeled: usize,
    /// Linked issues whose files import nothing the taxonomy knows.
    pub dropped_unlabeled: usize,
}

/// Label each linked issue with the domains imported by the source files its
/// pull requests changed. Issues left without labels are dropped and counted.
pub fn labels_for_dataset(
    dataset: &LinkedDataset,
    snapshot: &ProjectSnapshot,
    taxonomy: &ApiTaxonomy,
) -> Result<(Vec<LabeledIssue>, LabelingSummary), ApiError> {
    let mut out = Vec::new();
    let mut summary = LabelingSummary::default();
    for example in &dataset.examples {
        let mut labels = DomainLabelSet::new();
        for path in example.links.iter().flat_map(|l| &l.source_files) {
            let content = snapshot
                .file_contents
                .get(path)
                .ok_or_else(|| ApiError::MissingFileContent { path: path.clone() })?;
            let Some(language) = Language::from_path(path) else {
                continue;
            };
            labels.extend(map_to_domains(&extract_imports(content, language), taxonomy));
        }
        if labels.is_empty() {
            summary.dropped_unlabeled += 1;
        } else {
            summary.labeled += 1;
            out.push(LabeledIssue {
                issue: example.issue.clone(),
                labels,
            });
        }
    }
    Ok((out, summary))
}
