//! Data model for a youth HIV cluster randomized trial: participant and
//! clinic records, endpoint-window arithmetic, endpoint and care-status
//! classification, population filters, and descriptive tabulations.

mod endpoint;
mod load;
mod population;
mod tables;

pub use endpoint::{
    classify_care_status, classify_endpoint, endpoint_window, engagement_indicators,
    EngagementIndicators,
};
pub use load::{
    load_clinics, load_participants, write_clinics, write_participants, LoadReport,
    CLINIC_COLUMNS, PARTICIPANT_COLUMNS, SCHEMA_VERSION,
};
pub use population::{select_population, AnalysisRow, AnalysisSet, OutcomeCell};
pub use tables::{
    ascertainment_table, ascertainment_to_table, baseline_table, AscertainmentCategory,
    AscertainmentRow, Grouping,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Database closure for the primary endpoint.
pub const DEFAULT_DATABASE_CLOSURE: NaiveDate = match NaiveDate::from_ymd_opt(2022, 3, 1) {
    Some(d) => d,
    None => unreachable!(),
};

/// Primary analyses restrict to enrollment strictly before this date.
pub const PRIMARY_ENROLLMENT_CUTOFF: NaiveDate = match NaiveDate::from_ymd_opt(2019, 12, 1) {
    Some(d) => d,
    None => unreachable!(),
};

/// "2-year mark" is enrollment plus this many days.
pub const TWO_YEAR_DAYS: i64 = 730;
/// Endpoint window opens this many days before the 2-year mark.
pub const WINDOW_BEFORE_DAYS: i64 = 90;
/// Endpoint window closes this many days after the 2-year mark (or at
/// database closure, whichever is earlier).
pub const WINDOW_AFTER_DAYS: i64 = 180;
/// "6 months" is this many days everywhere it appears.
pub const HALF_YEAR_DAYS: i64 = 183;
/// Retention requires clinic contact at least once every this many days.
pub const CONTACT_GAP_DAYS: i64 = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

impl std::fmt::Display for Sex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Sex::Female => "female",
            Sex::Male => "male",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Country {
    Kenya,
    Uganda,
}

impl std::fmt::Display for Country {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Country::Kenya => "kenya",
            Country::Uganda => "uganda",
        })
    }
}

/// Care status at enrollment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CareStatus {
    /// Started ART within the prior 6 months or at enrollment.
    RecentlyEngaged,
    /// On ART longer, with a clinic visit in the prior 6 months.
    Engaged,
    /// On ART longer, without a clinic visit in the prior 6 months.
    ReEngaging,
}

impl std::fmt::Display for CareStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CareStatus::RecentlyEngaged => "recently_engaged",
            CareStatus::Engaged => "engaged",
            CareStatus::ReEngaging => "re_engaging",
        })
    }
}

/// Randomized arm of a clinic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Intervention,
}

impl Arm {
    pub fn as_u8(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Intervention => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Arm> {
        match v {
            0 => Some(Arm::Control),
            1 => Some(Arm::Intervention),
            _ => None,
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// A dated viral load measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViralLoad {
    pub date: NaiveDate,
    pub copies: f64,
}

/// One enrolled individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub participant_id: String,
    pub clinic_id: String,
    pub enrollment_date: NaiveDate,
    pub age: u32,
    pub sex: Sex,
    pub country: Country,
    pub education: String,
    pub employment: String,
    pub marital_status: String,
    pub n_children: u32,
    pub alcohol_use: String,
    pub mobility: String,
    /// Baseline ART regimen code; "dtg" marks dolutegravir at baseline.
    pub art_regimen_baseline: String,
    pub baseline_suppressed: Option<bool>,
    pub baseline_care_status: CareStatus,
    pub withdrawal_date: Option<NaiveDate>,
    pub death_date: Option<NaiveDate>,
    pub outmigration_date: Option<NaiveDate>,
    pub transfer_date: Option<NaiveDate>,
    pub dtg_switch_date: Option<NaiveDate>,
    pub birth_dates: Vec<NaiveDate>,
    /// Sorted ascending after ingestion.
    pub contact_dates: Vec<NaiveDate>,
    pub viral_loads: Vec<ViralLoad>,
    /// (question id, Likert score 1-5).
    pub satisfaction_responses: Vec<(String, i32)>,
}

impl ParticipantRecord {
    pub fn on_dtg_at_baseline(&self) -> bool {
        self.art_regimen_baseline == "dtg"
    }

    /// Check record-level invariants; returns the first violation found.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let check_date = |label: &str, d: Option<NaiveDate>| -> std::result::Result<(), String> {
            match d {
                Some(d) if d < self.enrollment_date => Err(format!(
                    "{label} {d} precedes enrollment {}",
                    self.enrollment_date
                )),
                _ => Ok(()),
            }
        };
        check_date("withdrawal_date", self.withdrawal_date)?;
        check_date("death_date", self.death_date)?;
        check_date("outmigration_date", self.outmigration_date)?;
        check_date("transfer_date", self.transfer_date)?;
        check_date("dtg_switch_date", self.dtg_switch_date)?;
        for vl in &self.viral_loads {
            if !(vl.copies >= 0.0) {
                return Err(format!("viral load on {} has negative copies", vl.date));
            }
        }
        for (_, score) in &self.satisfaction_responses {
            if !(1..=5).contains(score) {
                return Err(format!("satisfaction score {score} outside 1-5"));
            }
        }
        Ok(())
    }
}

/// The randomization unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicRecord {
    pub clinic_id: String,
    pub country: Country,
    pub arm: Arm,
    /// Country x clinic size x prior study participation stratum.
    pub stratum_id: String,
    pub n_youth_in_care_baseline: u32,
    pub baseline_suppression_proportion: f64,
}

impl ClinicRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..=1.0).contains(&self.baseline_suppression_proportion) {
            return Err(format!(
                "baseline_suppression_proportion {} outside [0,1]",
                self.baseline_suppression_proportion
            ));
        }
        Ok(())
    }
}

/// Per-participant endpoint ascertainment window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointWindow {
    pub two_year_mark: NaiveDate,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub database_closure: NaiveDate,
}

/// Primary-endpoint status of a participant under one analysis configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointStatus {
    Suppressed,
    Unsuppressed,
    Died,
    MissingVl,
    ExcludedOutmigrated,
    ExcludedTransferred,
    ExcludedWithdrawn,
    ExcludedLateEnrollment,
}

impl EndpointStatus {
    pub fn is_excluded(self) -> bool {
        matches!(
            self,
            EndpointStatus::ExcludedOutmigrated
                | EndpointStatus::ExcludedTransferred
                | EndpointStatus::ExcludedWithdrawn
                | EndpointStatus::ExcludedLateEnrollment
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            EndpointStatus::Suppressed => "suppressed",
            EndpointStatus::Unsuppressed => "unsuppressed",
            EndpointStatus::Died => "died",
            EndpointStatus::MissingVl => "missing_vl",
            EndpointStatus::ExcludedOutmigrated => "excluded_outmigrated",
            EndpointStatus::ExcludedTransferred => "excluded_transferred",
            EndpointStatus::ExcludedWithdrawn => "excluded_withdrawn",
            EndpointStatus::ExcludedLateEnrollment => "excluded_late_enrollment",
        }
    }
}

impl std::fmt::Display for EndpointStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Endpoint status plus the viral load it was classified on, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndpointClassification {
    pub status: EndpointStatus,
    pub endpoint_vl: Option<ViralLoad>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Population {
    Primary,
    Secondary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferHandling {
    Exclude,
    Include,
    Success,
    Censor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeathHandling {
    Failure,
    Censor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingHandling {
    Failure,
    Adjust,
    Exclude,
}

/// Which participants enter an analysis and how their endpoints map to
/// outcomes. The primary population excludes outmigrations and transfers;
/// the secondary population includes both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub population: Population,
    pub enrollment_cutoff: Option<NaiveDate>,
    pub vl_threshold: f64,
    pub transfer_handling: TransferHandling,
    pub death_handling: DeathHandling,
    pub missing_handling: MissingHandling,
}

impl PopulationSpec {
    /// Primary analytic population: enrolled before 2019-12-01, outmigrations
    /// and transfers excluded, failures = unsuppressed / died / missing.
    pub fn primary() -> Self {
        PopulationSpec {
            population: Population::Primary,
            enrollment_cutoff: Some(PRIMARY_ENROLLMENT_CUTOFF),
            vl_threshold: 400.0,
            transfer_handling: TransferHandling::Exclude,
            death_handling: DeathHandling::Failure,
            missing_handling: MissingHandling::Failure,
        }
    }

    /// Secondary analytic population: all enrollment dates, outmigrations and
    /// transfers included and classified on their observed endpoint data.
    pub fn secondary() -> Self {
        PopulationSpec {
            population: Population::Secondary,
            enrollment_cutoff: None,
            vl_threshold: 400.0,
            transfer_handling: TransferHandling::Include,
            death_handling: DeathHandling::Failure,
            missing_handling: MissingHandling::Failure,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.vl_threshold = threshold;
        self
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        if self.vl_threshold <= 0.0 {
            return Err(crate::error::Error::config(
                "viral-load threshold must be positive",
            ));
        }
        Ok(())
    }
}
