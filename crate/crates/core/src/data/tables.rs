//! Descriptive tabulations: endpoint-ascertainment flow and baseline tables.

use std::collections::BTreeMap;

use super::{AnalysisRow, AnalysisSet, Arm, EndpointStatus};
use crate::table::{fmt_num, Table};

/// Mutually exclusive, exhaustive ascertainment categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AscertainmentCategory {
    Outmigrated,
    Transferred,
    Measured,
    Died,
    Missing,
}

impl AscertainmentCategory {
    pub const ALL: [AscertainmentCategory; 5] = [
        AscertainmentCategory::Outmigrated,
        AscertainmentCategory::Transferred,
        AscertainmentCategory::Measured,
        AscertainmentCategory::Died,
        AscertainmentCategory::Missing,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AscertainmentCategory::Outmigrated => "outmigrated",
            AscertainmentCategory::Transferred => "transferred",
            AscertainmentCategory::Measured => "measured",
            AscertainmentCategory::Died => "died",
            AscertainmentCategory::Missing => "missing",
        }
    }

    fn from_status(status: EndpointStatus) -> Option<AscertainmentCategory> {
        match status {
            EndpointStatus::ExcludedOutmigrated => Some(AscertainmentCategory::Outmigrated),
            EndpointStatus::ExcludedTransferred => Some(AscertainmentCategory::Transferred),
            EndpointStatus::Suppressed | EndpointStatus::Unsuppressed => {
                Some(AscertainmentCategory::Measured)
            }
            EndpointStatus::Died => Some(AscertainmentCategory::Died),
            EndpointStatus::MissingVl => Some(AscertainmentCategory::Missing),
            // Withdrawn and late-enrollment rows are outside the flow table.
            EndpointStatus::ExcludedWithdrawn | EndpointStatus::ExcludedLateEnrollment => None,
        }
    }
}

/// One cell of the ascertainment flow summary.
#[derive(Debug, Clone)]
pub struct AscertainmentRow {
    /// "overall", "arm_0", or "arm_1".
    pub group: String,
    pub category: AscertainmentCategory,
    pub n: usize,
    pub proportion: f64,
}

/// Counts and proportions per ascertainment category, overall and by arm.
/// The categories partition the non-withdrawn, evaluable cohort.
pub fn ascertainment_table(set: &AnalysisSet) -> Vec<AscertainmentRow> {
    let mut counts: BTreeMap<(AscertainmentCategory, Option<Arm>), usize> = BTreeMap::new();
    let mut totals: BTreeMap<Option<Arm>, usize> = BTreeMap::new();
    let classify = |row: &AnalysisRow| AscertainmentCategory::from_status(row.classification.status);

    for row in set.rows.iter().chain(&set.excluded) {
        if let Some(cat) = classify(row) {
            for key in [None, Some(row.arm)] {
                *counts.entry((cat, key)).or_insert(0) += 1;
                *totals.entry(key).or_insert(0) += 1;
            }
        }
    }

    let mut out = Vec::new();
    for group in [None, Some(Arm::Control), Some(Arm::Intervention)] {
        let denom = *totals.get(&group).unwrap_or(&0);
        for cat in AscertainmentCategory::ALL {
            let n = *counts.get(&(cat, group)).unwrap_or(&0);
            out.push(AscertainmentRow {
                group: group.map_or("overall".to_string(), |a| format!("arm_{}", a.as_u8())),
                category: cat,
                n,
                proportion: if denom == 0 {
                    f64::NAN
                } else {
                    n as f64 / denom as f64
                },
            });
        }
    }
    out
}

/// Render the ascertainment summary as a report table.
pub fn ascertainment_to_table(rows: &[AscertainmentRow]) -> Table {
    let mut table = Table::new("ascertainment", &["group", "category", "n", "proportion"]);
    for r in rows {
        table.push(vec![
            r.group.clone(),
            r.category.label().to_string(),
            r.n.to_string(),
            fmt_num(r.proportion),
        ]);
    }
    table
}

/// Grouping for the baseline characteristics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Overall,
    Arm,
    Country,
    CountryArm,
    Clinic,
}

fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn numeric_summary(table: &mut Table, group: &str, variable: &str, values: &mut Vec<f64>) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let stats: [(&str, f64); 3] = if values.is_empty() {
        [("median", f64::NAN), ("q1", f64::NAN), ("q3", f64::NAN)]
    } else {
        [
            ("median", quantile_type7(values, 0.5)),
            ("q1", quantile_type7(values, 0.25)),
            ("q3", quantile_type7(values, 0.75)),
        ]
    };
    for (stat, v) in stats {
        table.push(vec![
            group.to_string(),
            variable.to_string(),
            stat.to_string(),
            fmt_num(v),
        ]);
    }
}

fn categorical_summary(
    table: &mut Table,
    group: &str,
    variable: &str,
    values: impl Iterator<Item = String>,
) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0usize;
    for v in values {
        *counts.entry(v).or_insert(0) += 1;
        total += 1;
    }
    for (level, n) in counts {
        table.push(vec![
            group.to_string(),
            variable.to_string(),
            format!("{level}_n"),
            n.to_string(),
        ]);
        table.push(vec![
            group.to_string(),
            variable.to_string(),
            format!("{level}_pct"),
            fmt_num(if total == 0 {
                f64::NAN
            } else {
                n as f64 / total as f64
            }),
        ]);
    }
}

/// Baseline characteristics: median and IQR for numeric variables, counts
/// and proportions for categorical ones, in deterministic order.
pub fn baseline_table(set: &AnalysisSet, grouping: Grouping) -> Table {
    let group_of = |row: &AnalysisRow| -> String {
        match grouping {
            Grouping::Overall => "overall".to_string(),
            Grouping::Arm => format!("arm_{}", row.arm.as_u8()),
            Grouping::Country => row.participant.country.to_string(),
            Grouping::CountryArm => {
                format!("{}_arm_{}", row.participant.country, row.arm.as_u8())
            }
            Grouping::Clinic => set.clinics[row.clinic_index].clinic_id.clone(),
        }
    };

    let mut groups: BTreeMap<String, Vec<&AnalysisRow>> = BTreeMap::new();
    for row in &set.rows {
        groups.entry(group_of(row)).or_default().push(row);
    }

    let mut table = Table::new("baseline", &["group", "variable", "statistic", "value"]);
    for (group, rows) in &groups {
        table.push(vec![
            group.clone(),
            "n".to_string(),
            "count".to_string(),
            rows.len().to_string(),
        ]);
        let mut ages: Vec<f64> = rows.iter().map(|r| r.participant.age as f64).collect();
        numeric_summary(&mut table, group, "age", &mut ages);
        let mut children: Vec<f64> = rows
            .iter()
            .map(|r| r.participant.n_children as f64)
            .collect();
        numeric_summary(&mut table, group, "n_children", &mut children);

        let cat = |f: fn(&AnalysisRow) -> String| rows.iter().map(move |r| f(r));
        categorical_summary(&mut table, group, "sex", cat(|r| r.participant.sex.to_string()));
        categorical_summary(
            &mut table,
            group,
            "country",
            cat(|r| r.participant.country.to_string()),
        );
        categorical_summary(
            &mut table,
            group,
            "education",
            cat(|r| r.participant.education.clone()),
        );
        categorical_summary(
            &mut table,
            group,
            "employment",
            cat(|r| r.participant.employment.clone()),
        );
        categorical_summary(
            &mut table,
            group,
            "marital_status",
            cat(|r| r.participant.marital_status.clone()),
        );
        categorical_summary(
            &mut table,
            group,
            "alcohol_use",
            cat(|r| r.participant.alcohol_use.clone()),
        );
        categorical_summary(
            &mut table,
            group,
            "mobility",
            cat(|r| r.participant.mobility.clone()),
        );
        categorical_summary(
            &mut table,
            group,
            "art_regimen_baseline",
            cat(|r| r.participant.art_regimen_baseline.clone()),
        );
        categorical_summary(
            &mut table,
            group,
            "baseline_suppressed",
            cat(|r| {
                r.participant
                    .baseline_suppressed
                    .map(|b| b.to_string())
                    .unwrap_or_else(|| "missing".to_string())
            }),
        );
        categorical_summary(
            &mut table,
            group,
            "baseline_care_status",
            cat(|r| r.participant.baseline_care_status.to_string()),
        );
    }
    table
}
