//! Delimited-text ingestion and emission for participant and clinic tables.
//!
//! Both files are comma-separated with a fixed, versioned header. Dates are
//! ISO-8601 (`YYYY-MM-DD`), optional scalars are empty strings, and
//! list-valued fields are semicolon-separated (`date:copies` pairs for viral
//! loads, `question:score` pairs for satisfaction responses).

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

use super::{
    Arm, CareStatus, ClinicRecord, Country, ParticipantRecord, Sex, ViralLoad,
};
use crate::error::{Error, Result};

/// Version of the data dictionary the loaders expect.
pub const SCHEMA_VERSION: &str = "1";

pub const PARTICIPANT_COLUMNS: [&str; 24] = [
    "participant_id",
    "clinic_id",
    "enrollment_date",
    "age",
    "sex",
    "country",
    "education",
    "employment",
    "marital_status",
    "n_children",
    "alcohol_use",
    "mobility",
    "art_regimen_baseline",
    "baseline_suppressed",
    "baseline_care_status",
    "withdrawal_date",
    "death_date",
    "outmigration_date",
    "transfer_date",
    "dtg_switch_date",
    "birth_dates",
    "contact_dates",
    "viral_loads",
    "satisfaction_responses",
];

pub const CLINIC_COLUMNS: [&str; 6] = [
    "clinic_id",
    "country",
    "arm",
    "stratum_id",
    "n_youth_in_care_baseline",
    "baseline_suppression_proportion",
];

/// A row rejected during ingestion, with the reason.
#[derive(Debug, Clone)]
pub struct RowDiagnostic {
    /// 1-based data row number (header excluded).
    pub row: usize,
    pub id: String,
    pub reason: String,
}

/// Validated records plus row-level diagnostics for rejected rows.
#[derive(Debug)]
pub struct LoadReport {
    pub records: Vec<ParticipantRecord>,
    pub rejected: Vec<RowDiagnostic>,
}

fn check_header(got: &csv::StringRecord, want: &[&str], what: &str) -> Result<()> {
    let got: Vec<&str> = got.iter().collect();
    if got != want {
        for col in want {
            if !got.contains(col) {
                return Err(Error::data(format!(
                    "{what} file missing required column `{col}` (schema v{SCHEMA_VERSION})"
                )));
            }
        }
        return Err(Error::data(format!(
            "{what} file header does not match schema v{SCHEMA_VERSION}: expected {want:?}, got {got:?}"
        )));
    }
    Ok(())
}

fn parse_date(field: &str, row: usize, col: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d")
        .map_err(|_| Error::data(format!("row {row}: unparseable date `{field}` in `{col}`")))
}

fn parse_opt_date(field: &str, row: usize, col: &str) -> Result<Option<NaiveDate>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_date(field, row, col).map(Some)
    }
}

fn parse_date_list(field: &str, row: usize, col: &str) -> Result<Vec<NaiveDate>> {
    field
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| parse_date(s, row, col))
        .collect()
}

fn parse_num<T: std::str::FromStr>(field: &str, row: usize, col: &str) -> Result<T> {
    field
        .parse::<T>()
        .map_err(|_| Error::data(format!("row {row}: unparseable value `{field}` in `{col}`")))
}

fn parse_sex(field: &str, row: usize) -> Result<Sex> {
    match field {
        "female" => Ok(Sex::Female),
        "male" => Ok(Sex::Male),
        other => Err(Error::data(format!("row {row}: unknown sex `{other}`"))),
    }
}

fn parse_country(field: &str, row: usize) -> Result<Country> {
    match field {
        "kenya" => Ok(Country::Kenya),
        "uganda" => Ok(Country::Uganda),
        other => Err(Error::data(format!("row {row}: unknown country `{other}`"))),
    }
}

fn parse_care_status(field: &str, row: usize) -> Result<CareStatus> {
    match field {
        "recently_engaged" => Ok(CareStatus::RecentlyEngaged),
        "engaged" => Ok(CareStatus::Engaged),
        "re_engaging" => Ok(CareStatus::ReEngaging),
        other => Err(Error::data(format!(
            "row {row}: unknown baseline_care_status `{other}`"
        ))),
    }
}

fn parse_opt_bool(field: &str, row: usize, col: &str) -> Result<Option<bool>> {
    match field {
        "" => Ok(None),
        "true" | "1" => Ok(Some(true)),
        "false" | "0" => Ok(Some(false)),
        other => Err(Error::data(format!(
            "row {row}: unparseable boolean `{other}` in `{col}`"
        ))),
    }
}

/// Load and validate the participants table. Parse failures are hard errors;
/// rows violating record invariants are rejected with diagnostics.
pub fn load_participants(path: &Path) -> Result<LoadReport> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    check_header(reader.headers()?, &PARTICIPANT_COLUMNS, "participants")?;

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    let mut rejected = Vec::new();

    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let rec = result?;
        if rec.len() != PARTICIPANT_COLUMNS.len() {
            return Err(Error::data(format!(
                "row {row}: expected {} fields, got {}",
                PARTICIPANT_COLUMNS.len(),
                rec.len()
            )));
        }
        let get = |idx: usize| rec.get(idx).unwrap_or("");
        let participant_id = get(0).to_string();
        if participant_id.is_empty() {
            return Err(Error::data(format!("row {row}: empty participant_id")));
        }
        if !seen.insert(participant_id.clone()) {
            return Err(Error::data(format!(
                "duplicate participant_id `{participant_id}` at row {row}"
            )));
        }

        let mut viral_loads = Vec::new();
        for part in get(22).split(';').filter(|s| !s.is_empty()) {
            let (d, c) = part.split_once(':').ok_or_else(|| {
                Error::data(format!("row {row}: malformed viral_loads entry `{part}`"))
            })?;
            viral_loads.push(ViralLoad {
                date: parse_date(d, row, "viral_loads")?,
                copies: parse_num::<f64>(c, row, "viral_loads")?,
            });
        }
        viral_loads.sort_by_key(|vl| vl.date);

        let mut satisfaction_responses = Vec::new();
        for part in get(23).split(';').filter(|s| !s.is_empty()) {
            let (q, s) = part.split_once(':').ok_or_else(|| {
                Error::data(format!(
                    "row {row}: malformed satisfaction_responses entry `{part}`"
                ))
            })?;
            satisfaction_responses
                .push((q.to_string(), parse_num::<i32>(s, row, "satisfaction_responses")?));
        }

        let mut contact_dates = parse_date_list(get(21), row, "contact_dates")?;
        contact_dates.sort();
        let mut birth_dates = parse_date_list(get(20), row, "birth_dates")?;
        birth_dates.sort();

        let record = ParticipantRecord {
            participant_id: participant_id.clone(),
            clinic_id: get(1).to_string(),
            enrollment_date: parse_date(get(2), row, "enrollment_date")?,
            age: parse_num(get(3), row, "age")?,
            sex: parse_sex(get(4), row)?,
            country: parse_country(get(5), row)?,
            education: get(6).to_string(),
            employment: get(7).to_string(),
            marital_status: get(8).to_string(),
            n_children: parse_num(get(9), row, "n_children")?,
            alcohol_use: get(10).to_string(),
            mobility: get(11).to_string(),
            art_regimen_baseline: get(12).to_string(),
            baseline_suppressed: parse_opt_bool(get(13), row, "baseline_suppressed")?,
            baseline_care_status: parse_care_status(get(14), row)?,
            withdrawal_date: parse_opt_date(get(15), row, "withdrawal_date")?,
            death_date: parse_opt_date(get(16), row, "death_date")?,
            outmigration_date: parse_opt_date(get(17), row, "outmigration_date")?,
            transfer_date: parse_opt_date(get(18), row, "transfer_date")?,
            dtg_switch_date: parse_opt_date(get(19), row, "dtg_switch_date")?,
            birth_dates,
            contact_dates,
            viral_loads,
            satisfaction_responses,
        };

        match record.validate() {
            Ok(()) => records.push(record),
            Err(reason) => rejected.push(RowDiagnostic {
                row,
                id: participant_id,
                reason,
            }),
        }
    }
    Ok(LoadReport { records, rejected })
}

/// Load and validate the clinics table.
pub fn load_clinics(path: &Path) -> Result<Vec<ClinicRecord>> {
    let mut reader = csv::ReaderBuilder::new().from_path(path)?;
    check_header(reader.headers()?, &CLINIC_COLUMNS, "clinics")?;

    let mut seen = HashSet::new();
    let mut clinics = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let rec = result?;
        let get = |idx: usize| rec.get(idx).unwrap_or("");
        let clinic_id = get(0).to_string();
        if !seen.insert(clinic_id.clone()) {
            return Err(Error::data(format!(
                "duplicate clinic_id `{clinic_id}` at row {row}"
            )));
        }
        let arm_raw: u8 = parse_num(get(2), row, "arm")?;
        let clinic = ClinicRecord {
            clinic_id,
            country: parse_country(get(1), row)?,
            arm: Arm::from_u8(arm_raw)
                .ok_or_else(|| Error::data(format!("row {row}: arm must be 0 or 1")))?,
            stratum_id: get(3).to_string(),
            n_youth_in_care_baseline: parse_num(get(4), row, "n_youth_in_care_baseline")?,
            baseline_suppression_proportion: parse_num(
                get(5),
                row,
                "baseline_suppression_proportion",
            )?,
        };
        clinic
            .validate()
            .map_err(|reason| Error::data(format!("row {row}: {reason}")))?;
        clinics.push(clinic);
    }
    if clinics.is_empty() {
        return Err(Error::data("clinics file contains no rows"));
    }
    Ok(clinics)
}

fn fmt_opt_date(d: Option<NaiveDate>) -> String {
    d.map(|d| d.to_string()).unwrap_or_default()
}

/// Emit a participants table in schema order.
pub fn write_participants<W: Write>(w: W, records: &[ParticipantRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PARTICIPANT_COLUMNS)?;
    for r in records {
        let viral_loads = r
            .viral_loads
            .iter()
            .map(|vl| format!("{}:{}", vl.date, vl.copies))
            .collect::<Vec<_>>()
            .join(";");
        let satisfaction = r
            .satisfaction_responses
            .iter()
            .map(|(q, s)| format!("{q}:{s}"))
            .collect::<Vec<_>>()
            .join(";");
        let joined_dates = |v: &[NaiveDate]| {
            v.iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(";")
        };
        wtr.write_record([
            r.participant_id.as_str(),
            r.clinic_id.as_str(),
            &r.enrollment_date.to_string(),
            &r.age.to_string(),
            &r.sex.to_string(),
            &r.country.to_string(),
            r.education.as_str(),
            r.employment.as_str(),
            r.marital_status.as_str(),
            &r.n_children.to_string(),
            r.alcohol_use.as_str(),
            r.mobility.as_str(),
            r.art_regimen_baseline.as_str(),
            &r.baseline_suppressed
                .map(|b| b.to_string())
                .unwrap_or_default(),
            &r.baseline_care_status.to_string(),
            &fmt_opt_date(r.withdrawal_date),
            &fmt_opt_date(r.death_date),
            &fmt_opt_date(r.outmigration_date),
            &fmt_opt_date(r.transfer_date),
            &fmt_opt_date(r.dtg_switch_date),
            &joined_dates(&r.birth_dates),
            &joined_dates(&r.contact_dates),
            &viral_loads,
            &satisfaction,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Emit a clinics table in schema order.
pub fn write_clinics<W: Write>(w: W, clinics: &[ClinicRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CLINIC_COLUMNS)?;
    for c in clinics {
        wtr.write_record([
            c.clinic_id.as_str(),
            &c.country.to_string(),
            &c.arm.as_u8().to_string(),
            c.stratum_id.as_str(),
            &c.n_youth_in_care_baseline.to_string(),
            &c.baseline_suppression_proportion.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
