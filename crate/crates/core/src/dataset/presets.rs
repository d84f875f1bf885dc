//! Column presets for the HFEA anonymised register export.
//!
//! The pipeline runs on any CSV; these names only save typing when the input
//! is an HFEA extract. Names are given already standardized (lowercase, trimmed).

use super::{PreprocessOptions, SelectionCriteria};

pub const HFEA_TARGET: &str = "live birth occurrence";

/// Infertility-cause indicator columns; a row needs at least one of them.
pub const HFEA_INFERTILITY_CAUSES: &[&str] = &[
    "cause of infertility - tubal disease",
    "cause of infertility - ovulatory disorder",
    "cause of infertility - male factor",
    "cause of infertility - patient unexplained",
    "cause of infertility - endometriosis",
    "cause of infertility - cervical factors",
    "cause of infertility - female factors",
    "cause of infertility - partner sperm concentration",
    "cause of infertility - partner sperm morphology",
    "cause of infertility - partner sperm motility",
    "cause of infertility - partner sperm immunological factors",
];

pub const HFEA_PRIOR_CYCLES: &str = "total number of previous cycles, both ivf and di";
pub const HFEA_ELECTIVE_SET: &str = "elective single embryo transfer";

/// Feature list reported for the best-performing selection. It enumerates 39
/// rows although the accompanying text speaks of 45 features; it ships as-is.
pub const HFEA_SELECTED_FEATURES: &[&str] = &[
    "cause of infertility - tubal disease",
    "cause of infertility - partner sperm immunological factors",
    "cause of infertility - partner sperm morphology",
    "cause of infertility - endometriosis",
    "cause of infertility - female factors",
    "cause of infertility - ovulatory disorder",
    "cause of infertility - patient unexplained",
    "date of egg mixing",
    "date of embryo thawing",
    "eggs mixed with donor sperm",
    "eggs mixed with partner sperm",
    "eggs thawed",
    "embryos transferred",
    "embryos transferred from eggs micro-injected",
    "embryos stored for use by patient",
    "frozen cycle",
    "stimulation used",
    "total embryos created",
    "total number of previous treatments, both ivf and di at clinic",
    "total number of previous ivf pregnancies",
    "total number of previous di pregnancies",
    "total number of live births - conceived through ivf",
    "total number of live births - conceived through ivf or di",
    "total number of previous pregnancies - ivf and di",
    "donated embryo",
    "heart one delivery date",
    "heart one weeks gestation",
    "heart two delivery date",
    "heart two weeks gestation",
    "total number of previous di cycles",
    "type of infertility - female secondary",
    "type of infertility - male primary",
    "pgd",
    "pgt-a treatment",
    "pgt-m treatment",
    "total eggs mixed",
    "fresh eggs stored",
    "fresh eggs stored (0/1)",
    "total number of live births - conceived through ivf or di",
];

/// Inclusion/exclusion rules for an HFEA extract: valid target, at least one
/// recorded infertility cause, non-negative prior cycles, and a recorded
/// elective single embryo transfer flag.
pub fn hfea_criteria() -> SelectionCriteria {
    SelectionCriteria {
        target_column: HFEA_TARGET.to_string(),
        required_any_of: HFEA_INFERTILITY_CAUSES.iter().map(|s| s.to_string()).collect(),
        non_negative_columns: vec![HFEA_PRIOR_CYCLES.to_string()],
        required_columns: vec![HFEA_ELECTIVE_SET.to_string()],
    }
}

pub fn hfea_options() -> PreprocessOptions {
    PreprocessOptions {
        criteria: hfea_criteria(),
        min_non_null: 0.01,
        positive_label: Some("1".to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::standardize_name;

    #[test]
    fn preset_names_are_standardized() {
        let c = hfea_criteria();
        for name in c
            .required_any_of
            .iter()
            .chain(&c.non_negative_columns)
            .chain(&c.required_columns)
            .chain(std::iter::once(&c.target_column))
        {
            assert_eq!(&standardize_name(name), name);
        }
        assert_eq!(HFEA_SELECTED_FEATURES.len(), 39);
    }
}
