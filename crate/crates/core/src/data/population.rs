//! Population selection: join participants to clinics, classify endpoints,
//! and split the cohort into included, excluded, and unevaluable sets.

use std::collections::BTreeMap;
use std::collections::HashMap;

use super::{
    classify_endpoint, endpoint_window, Arm, ClinicRecord, DeathHandling, EndpointClassification,
    EndpointStatus, EndpointWindow, MissingHandling, ParticipantRecord, PopulationSpec,
    DEFAULT_DATABASE_CLOSURE,
};
use crate::error::{Error, Result};

/// One participant joined to their clinic, classified under a spec.
#[derive(Debug, Clone)]
pub struct AnalysisRow {
    pub participant: ParticipantRecord,
    pub clinic_index: usize,
    pub arm: Arm,
    pub window: EndpointWindow,
    pub classification: EndpointClassification,
}

/// Measurement indicator and outcome for one analysis row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeCell {
    /// Delta: endpoint considered measured for this analysis.
    pub measured: bool,
    /// Outcome value when measured; 0.0 placeholder otherwise.
    pub y: f64,
}

/// The selected analysis population plus everything filtered out of it.
#[derive(Debug, Clone)]
pub struct AnalysisSet {
    pub spec: PopulationSpec,
    pub clinics: Vec<ClinicRecord>,
    /// Rows passing all spec filters.
    pub rows: Vec<AnalysisRow>,
    /// Rows excluded by the spec, still classified (for flow accounting).
    pub excluded: Vec<AnalysisRow>,
    /// (participant_id, reason) for rows with no valid endpoint window.
    pub unevaluable: Vec<(String, String)>,
    pub exclusion_counts: BTreeMap<String, usize>,
}

impl AnalysisSet {
    pub fn clinic(&self, row: &AnalysisRow) -> &ClinicRecord {
        &self.clinics[row.clinic_index]
    }

    /// Primary-endpoint outcome cell for one included row under this spec.
    pub fn suppression_outcome(&self, row: &AnalysisRow) -> OutcomeCell {
        suppression_outcome(row.classification.status, &self.spec)
    }

    /// Clinic ids with at least one included row, sorted.
    pub fn clinic_ids_with_rows(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .rows
            .iter()
            .map(|r| self.clinics[r.clinic_index].clinic_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// Map an endpoint status to the (measured, outcome) pair the estimators
/// consume, honoring the spec's death and missingness handling.
pub fn suppression_outcome(status: EndpointStatus, spec: &PopulationSpec) -> OutcomeCell {
    match status {
        EndpointStatus::Suppressed => OutcomeCell {
            measured: true,
            y: 1.0,
        },
        EndpointStatus::Unsuppressed => OutcomeCell {
            measured: true,
            y: 0.0,
        },
        EndpointStatus::Died => match spec.death_handling {
            DeathHandling::Failure => OutcomeCell {
                measured: true,
                y: 0.0,
            },
            DeathHandling::Censor => OutcomeCell {
                measured: false,
                y: 0.0,
            },
        },
        EndpointStatus::MissingVl => match spec.missing_handling {
            MissingHandling::Failure => OutcomeCell {
                measured: true,
                y: 0.0,
            },
            // Adjust and Exclude both leave the cell unmeasured; Exclude rows
            // are already filtered out of `rows` during selection.
            MissingHandling::Adjust | MissingHandling::Exclude => OutcomeCell {
                measured: false,
                y: 0.0,
            },
        },
        excluded => unreachable!("excluded status {excluded} has no outcome"),
    }
}

/// Join, classify, and filter the cohort under a population spec.
pub fn select_population(
    records: &[ParticipantRecord],
    clinics: &[ClinicRecord],
    spec: &PopulationSpec,
) -> Result<AnalysisSet> {
    spec.validate()?;
    let index: HashMap<&str, usize> = clinics
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clinic_id.as_str(), i))
        .collect();

    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut unevaluable = Vec::new();
    let mut exclusion_counts: BTreeMap<String, usize> = BTreeMap::new();

    for record in records {
        let clinic_index = *index.get(record.clinic_id.as_str()).ok_or_else(|| {
            Error::data(format!(
                "participant {} references unknown clinic `{}`",
                record.participant_id, record.clinic_id
            ))
        })?;
        let arm = clinics[clinic_index].arm;
        let window = match endpoint_window(record.enrollment_date, DEFAULT_DATABASE_CLOSURE) {
            Ok(w) => w,
            Err(e) => {
                *exclusion_counts
                    .entry("unevaluable_window".to_string())
                    .or_insert(0) += 1;
                unevaluable.push((record.participant_id.clone(), e.to_string()));
                continue;
            }
        };
        let classification = classify_endpoint(record, spec, &window);
        let row = AnalysisRow {
            participant: record.clone(),
            clinic_index,
            arm,
            window,
            classification,
        };
        let missing_excluded = classification.status == EndpointStatus::MissingVl
            && spec.missing_handling == MissingHandling::Exclude;
        if classification.status.is_excluded() || missing_excluded {
            *exclusion_counts
                .entry(classification.status.label().to_string())
                .or_insert(0) += 1;
            excluded.push(row);
        } else {
            rows.push(row);
        }
    }

    Ok(AnalysisSet {
        spec: *spec,
        clinics: clinics.to_vec(),
        rows,
        excluded,
        unevaluable,
        exclusion_counts,
    })
}
