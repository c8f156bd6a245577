//! Endpoint-window arithmetic and per-participant classification rules.

use chrono::{Days, NaiveDate};

use super::{
    CareStatus, EndpointClassification, EndpointStatus, EndpointWindow, ParticipantRecord,
    Population, PopulationSpec, TransferHandling, ViralLoad, CONTACT_GAP_DAYS, HALF_YEAR_DAYS,
    TWO_YEAR_DAYS, WINDOW_AFTER_DAYS, WINDOW_BEFORE_DAYS,
};
use crate::error::{Error, Result};

fn plus_days(d: NaiveDate, days: i64) -> NaiveDate {
    if days >= 0 {
        d.checked_add_days(Days::new(days as u64)).expect("date overflow")
    } else {
        d.checked_sub_days(Days::new((-days) as u64)).expect("date underflow")
    }
}

/// Endpoint window for a participant: 90 days before the 2-year mark through
/// the earlier of 180 days after it and database closure.
pub fn endpoint_window(enrollment_date: NaiveDate, closure: NaiveDate) -> Result<EndpointWindow> {
    if enrollment_date >= closure {
        return Err(Error::data(format!(
            "enrollment {enrollment_date} not before database closure {closure}"
        )));
    }
    let two_year_mark = plus_days(enrollment_date, TWO_YEAR_DAYS);
    let start = plus_days(two_year_mark, -WINDOW_BEFORE_DAYS);
    let end = plus_days(two_year_mark, WINDOW_AFTER_DAYS).min(closure);
    if start >= end {
        return Err(Error::data(format!(
            "endpoint window empty (start {start} >= end {end}): participant unevaluable"
        )));
    }
    Ok(EndpointWindow {
        two_year_mark,
        start,
        end,
        database_closure: closure,
    })
}

/// Care status at enrollment from ART start and last-visit dates.
pub fn classify_care_status(
    art_start_date: NaiveDate,
    last_visit_date: Option<NaiveDate>,
    enrollment_date: NaiveDate,
) -> CareStatus {
    debug_assert!(art_start_date <= enrollment_date);
    let days_on_art = (enrollment_date - art_start_date).num_days();
    if days_on_art <= HALF_YEAR_DAYS {
        return CareStatus::RecentlyEngaged;
    }
    match last_visit_date {
        Some(v) if (enrollment_date - v).num_days() <= HALF_YEAR_DAYS => CareStatus::Engaged,
        _ => CareStatus::ReEngaging,
    }
}

/// The viral load used for classification: among in-window measurements the
/// one closest to the 2-year mark, ties broken toward the earlier date.
fn select_endpoint_vl(
    loads: &[ViralLoad],
    window: &EndpointWindow,
    censor_after: Option<NaiveDate>,
) -> Option<ViralLoad> {
    loads
        .iter()
        .filter(|vl| vl.date >= window.start && vl.date <= window.end)
        .filter(|vl| censor_after.map_or(true, |c| vl.date <= c))
        .min_by_key(|vl| ((vl.date - window.two_year_mark).num_days().abs(), vl.date))
        .copied()
}

/// Classify one participant's primary endpoint under a population spec.
///
/// Exclusions are checked first (withdrawn, then late enrollment, then
/// outmigration/transfer per the spec's handling); among the remaining,
/// death before the endpoint viral load is a failure, and suppression is a
/// strict `copies < threshold` comparison on the selected in-window load.
pub fn classify_endpoint(
    record: &ParticipantRecord,
    spec: &PopulationSpec,
    window: &EndpointWindow,
) -> EndpointClassification {
    let none = |status| EndpointClassification {
        status,
        endpoint_vl: None,
    };

    if record.withdrawal_date.is_some() {
        return none(EndpointStatus::ExcludedWithdrawn);
    }
    if let Some(cutoff) = spec.enrollment_cutoff {
        if record.enrollment_date >= cutoff {
            return none(EndpointStatus::ExcludedLateEnrollment);
        }
    }
    let outmigrated = record
        .outmigration_date
        .map_or(false, |d| d <= window.end);
    if outmigrated && spec.population == Population::Primary {
        return none(EndpointStatus::ExcludedOutmigrated);
    }
    let transferred = record.transfer_date.map_or(false, |d| d <= window.end);
    let mut vl_censor_after = None;
    if transferred {
        match spec.transfer_handling {
            TransferHandling::Exclude => return none(EndpointStatus::ExcludedTransferred),
            TransferHandling::Include => {}
            // Transfers count as successes: suppressed without an endpoint
            // load. The Suppressed <=> measured-below-threshold invariant is
            // deliberately relaxed under this sensitivity handling.
            TransferHandling::Success => return none(EndpointStatus::Suppressed),
            TransferHandling::Censor => vl_censor_after = record.transfer_date,
        }
    }

    let selected = select_endpoint_vl(&record.viral_loads, window, vl_censor_after);
    if let Some(death) = record.death_date {
        if death <= window.end {
            match selected {
                // Death on or before the endpoint load's date: died prior to
                // their endpoint viral load.
                Some(vl) if vl.date >= death => return none(EndpointStatus::Died),
                Some(_) => {}
                None => return none(EndpointStatus::Died),
            }
        }
    }
    match selected {
        Some(vl) => EndpointClassification {
            status: if vl.copies < spec.vl_threshold {
                EndpointStatus::Suppressed
            } else {
                EndpointStatus::Unsuppressed
            },
            endpoint_vl: Some(vl),
        },
        None => none(EndpointStatus::MissingVl),
    }
}

/// Care-engagement indicators derived from clinic contacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngagementIndicators {
    /// Any clinic contact in the 6 months preceding the window start.
    pub engaged_2y: bool,
    /// Contact at least once every 120 days from enrollment to window start.
    pub retained: bool,
    /// Days from enrollment to the end of the first gap exceeding 120 days;
    /// for a still-open trailing gap, the day the gap first exceeds 120.
    pub lapse_time: Option<i64>,
}

/// Engagement and retention from the contact history. Enrollment itself
/// counts as a contact.
pub fn engagement_indicators(
    record: &ParticipantRecord,
    window: &EndpointWindow,
) -> EngagementIndicators {
    let enrollment = record.enrollment_date;
    let horizon = window.start;

    let lookback = plus_days(horizon, -HALF_YEAR_DAYS);
    let engaged_2y = record
        .contact_dates
        .iter()
        .any(|&c| c >= lookback && c < horizon)
        || (enrollment >= lookback && enrollment < horizon);

    // Contact sequence from enrollment to the window start.
    let mut contacts: Vec<NaiveDate> = std::iter::once(enrollment)
        .chain(record.contact_dates.iter().copied())
        .filter(|&c| c >= enrollment && c <= horizon)
        .collect();
    contacts.sort();
    contacts.dedup();

    let mut lapse_time = None;
    for pair in contacts.windows(2) {
        if (pair[1] - pair[0]).num_days() > CONTACT_GAP_DAYS {
            lapse_time = Some((pair[1] - enrollment).num_days());
            break;
        }
    }
    if lapse_time.is_none() {
        let last = *contacts.last().expect("enrollment always present");
        if (horizon - last).num_days() > CONTACT_GAP_DAYS {
            lapse_time = Some((last - enrollment).num_days() + CONTACT_GAP_DAYS + 1);
        }
    }
    EngagementIndicators {
        engaged_2y,
        retained: lapse_time.is_none(),
        lapse_time,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DEFAULT_DATABASE_CLOSURE;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn base_record() -> ParticipantRecord {
        ParticipantRecord {
            participant_id: "p1".into(),
            clinic_id: "c1".into(),
            enrollment_date: date(2019, 6, 1),
            age: 20,
            sex: super::super::Sex::Female,
            country: super::super::Country::Kenya,
            education: "primary".into(),
            employment: "student".into(),
            marital_status: "single".into(),
            n_children: 0,
            alcohol_use: "none".into(),
            mobility: "stable".into(),
            art_regimen_baseline: "nnrti".into(),
            baseline_suppressed: Some(true),
            baseline_care_status: CareStatus::Engaged,
            withdrawal_date: None,
            death_date: None,
            outmigration_date: None,
            transfer_date: None,
            dtg_switch_date: None,
            birth_dates: vec![],
            contact_dates: vec![],
            viral_loads: vec![],
            satisfaction_responses: vec![],
        }
    }

    #[test]
    fn window_calendar_arithmetic() {
        let w = endpoint_window(date(2019, 6, 1), DEFAULT_DATABASE_CLOSURE).unwrap();
        assert_eq!(w.two_year_mark, date(2021, 5, 31));
        assert_eq!(w.start, date(2021, 3, 2));
        assert_eq!(w.end, date(2021, 11, 27));
    }

    #[test]
    fn window_capped_at_closure() {
        let w = endpoint_window(date(2019, 12, 1), DEFAULT_DATABASE_CLOSURE).unwrap();
        assert_eq!(w.end, DEFAULT_DATABASE_CLOSURE);
        assert!(w.start < w.end);
    }

    #[test]
    fn degenerate_window_is_unevaluable() {
        // Start (2023-03-03) falls after closure.
        let err = endpoint_window(date(2021, 6, 1), DEFAULT_DATABASE_CLOSURE).unwrap_err();
        assert!(err.to_string().contains("unevaluable"));
    }

    #[test]
    fn window_start_is_90_days_before_mark() {
        for &d in &[date(2019, 1, 15), date(2019, 7, 4), date(2019, 11, 30)] {
            let w = endpoint_window(d, DEFAULT_DATABASE_CLOSURE).unwrap();
            assert_eq!((w.two_year_mark - w.start).num_days(), 90);
            assert!(w.end <= DEFAULT_DATABASE_CLOSURE);
        }
    }

    #[test]
    fn care_status_rules() {
        let enr = date(2019, 6, 1);
        assert_eq!(
            classify_care_status(date(2019, 3, 3), None, enr),
            CareStatus::RecentlyEngaged
        );
        assert_eq!(
            classify_care_status(date(2018, 4, 27), Some(date(2019, 4, 2)), enr),
            CareStatus::Engaged
        );
        assert_eq!(
            classify_care_status(date(2018, 4, 27), None, enr),
            CareStatus::ReEngaging
        );
        // 183 days is still "within 6 months".
        assert_eq!(
            classify_care_status(plus_days(enr, -183), None, enr),
            CareStatus::RecentlyEngaged
        );
        assert_eq!(
            classify_care_status(plus_days(enr, -184), Some(plus_days(enr, -183)), enr),
            CareStatus::Engaged
        );
    }

    #[test]
    fn suppressed_below_threshold() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        r.viral_loads = vec![ViralLoad {
            date: w.two_year_mark,
            copies: 350.0,
        }];
        let c = classify_endpoint(&r, &PopulationSpec::primary(), &w);
        assert_eq!(c.status, EndpointStatus::Suppressed);
        assert_eq!(c.endpoint_vl.unwrap().copies, 350.0);
    }

    #[test]
    fn exactly_at_threshold_is_unsuppressed() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        r.viral_loads = vec![ViralLoad {
            date: w.two_year_mark,
            copies: 400.0,
        }];
        let c = classify_endpoint(&r, &PopulationSpec::primary(), &w);
        assert_eq!(c.status, EndpointStatus::Unsuppressed);
    }

    #[test]
    fn death_before_endpoint_vl_is_failure() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        r.death_date = Some(plus_days(w.start, 10));
        let c = classify_endpoint(&r, &PopulationSpec::primary(), &w);
        assert_eq!(c.status, EndpointStatus::Died);

        // A load measured before death still classifies the endpoint.
        r.viral_loads = vec![ViralLoad {
            date: plus_days(w.start, 5),
            copies: 100.0,
        }];
        let c = classify_endpoint(&r, &PopulationSpec::primary(), &w);
        assert_eq!(c.status, EndpointStatus::Suppressed);
    }

    #[test]
    fn outmigration_excluded_in_primary_only() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        r.outmigration_date = Some(plus_days(r.enrollment_date, 100));
        let c = classify_endpoint(&r, &PopulationSpec::primary(), &w);
        assert_eq!(c.status, EndpointStatus::ExcludedOutmigrated);
        let c = classify_endpoint(&r, &PopulationSpec::secondary(), &w);
        assert_eq!(c.status, EndpointStatus::MissingVl);
    }

    #[test]
    fn transfer_handling_variants() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        r.transfer_date = Some(plus_days(r.enrollment_date, 200));
        r.viral_loads = vec![ViralLoad {
            date: w.two_year_mark,
            copies: 10_000.0,
        }];

        let mut spec = PopulationSpec::primary();
        assert_eq!(
            classify_endpoint(&r, &spec, &w).status,
            EndpointStatus::ExcludedTransferred
        );
        spec.transfer_handling = TransferHandling::Include;
        assert_eq!(
            classify_endpoint(&r, &spec, &w).status,
            EndpointStatus::Unsuppressed
        );
        spec.transfer_handling = TransferHandling::Success;
        assert_eq!(
            classify_endpoint(&r, &spec, &w).status,
            EndpointStatus::Suppressed
        );
        spec.transfer_handling = TransferHandling::Censor;
        assert_eq!(
            classify_endpoint(&r, &spec, &w).status,
            EndpointStatus::MissingVl
        );
    }

    #[test]
    fn multiple_loads_pick_closest_to_mark_then_earlier() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        r.viral_loads = vec![
            ViralLoad {
                date: plus_days(w.two_year_mark, 20),
                copies: 500.0,
            },
            ViralLoad {
                date: plus_days(w.two_year_mark, -10),
                copies: 100.0,
            },
        ];
        let c = classify_endpoint(&r, &PopulationSpec::primary(), &w);
        assert_eq!(c.endpoint_vl.unwrap().copies, 100.0);

        // Equidistant loads: earlier date wins.
        r.viral_loads = vec![
            ViralLoad {
                date: plus_days(w.two_year_mark, 15),
                copies: 500.0,
            },
            ViralLoad {
                date: plus_days(w.two_year_mark, -15),
                copies: 100.0,
            },
        ];
        let c = classify_endpoint(&r, &PopulationSpec::primary(), &w);
        assert_eq!(c.endpoint_vl.unwrap().copies, 100.0);
    }

    #[test]
    fn threshold_monotonicity() {
        // Suppressed at 50 implies suppressed at 400.
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        for copies in [0.0, 30.0, 49.9, 50.0, 200.0, 399.9, 400.0, 5000.0] {
            r.viral_loads = vec![ViralLoad {
                date: w.two_year_mark,
                copies,
            }];
            let strict = classify_endpoint(&r, &PopulationSpec::primary().with_threshold(50.0), &w);
            let loose = classify_endpoint(&r, &PopulationSpec::primary(), &w);
            if strict.status == EndpointStatus::Suppressed {
                assert_eq!(loose.status, EndpointStatus::Suppressed);
            }
        }
    }

    #[test]
    fn engagement_boundary_rules() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();

        // Gaps of exactly 120 days all the way to the window start.
        let mut d = r.enrollment_date;
        let mut contacts = vec![];
        while d <= w.start {
            d = plus_days(d, 120);
            contacts.push(d);
        }
        r.contact_dates = contacts;
        let e = engagement_indicators(&r, &w);
        assert!(e.retained);
        assert_eq!(e.lapse_time, None);

        // One 121-day gap starting day 100.
        r.contact_dates = vec![plus_days(r.enrollment_date, 100)];
        let mut d = plus_days(r.enrollment_date, 221);
        let mut contacts = vec![plus_days(r.enrollment_date, 100)];
        while d <= w.start {
            contacts.push(d);
            d = plus_days(d, 100);
        }
        r.contact_dates = contacts;
        let e = engagement_indicators(&r, &w);
        assert!(!e.retained);
        assert_eq!(e.lapse_time, Some(221));

        // Contact 150 days before window start counts as engaged.
        r.contact_dates = vec![plus_days(w.start, -150)];
        let e = engagement_indicators(&r, &w);
        assert!(e.engaged_2y);
    }

    #[test]
    fn trailing_gap_lapses_at_first_exceedance() {
        let mut r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        // Single contact at day 60, then nothing: gap exceeds 120 at day 181.
        r.contact_dates = vec![plus_days(r.enrollment_date, 60)];
        let e = engagement_indicators(&r, &w);
        assert!(!e.retained);
        assert_eq!(e.lapse_time, Some(181));
        assert!(!e.engaged_2y);
    }

    #[test]
    fn retained_iff_no_lapse() {
        // Invariant over a grid of synthetic gap patterns.
        let r = base_record();
        let w = endpoint_window(r.enrollment_date, DEFAULT_DATABASE_CLOSURE).unwrap();
        for gap in [30i64, 60, 119, 120, 121, 200, 400] {
            let mut rec = r.clone();
            let mut d = rec.enrollment_date;
            let mut contacts = vec![];
            loop {
                d = plus_days(d, gap);
                if d > w.start {
                    break;
                }
                contacts.push(d);
            }
            rec.contact_dates = contacts;
            let e = engagement_indicators(&rec, &w);
            assert_eq!(e.retained, e.lapse_time.is_none());
            assert_eq!(e.retained, gap <= 120);
        }
    }
}
