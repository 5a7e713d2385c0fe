//! Domain types: enriched pageviews, enriched sessions, and the portal's
//! service universe, plus record-level validation.
//!
//! All types are immutable after construction and safe to share across
//! threads. Numeric fields use signed integers wide enough to represent
//! out-of-domain values, so that invalid rows can be *held* and reported
//! rather than silently clamped.

use serde::{Deserialize, Serialize};

/// The portal's services. Session records carry one pageview counter per
/// service (the `p_`-prefixed columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Service {
    Gate,
    Mail,
    Obis,
    Abis,
    Pbis,
    Menu,
}

/// All services, in column order (`p_gate` .. `p_menu`).
pub const SERVICES: [Service; 6] = [
    Service::Gate,
    Service::Mail,
    Service::Obis,
    Service::Abis,
    Service::Pbis,
    Service::Menu,
];

impl Service {
    /// 1-based service id used in the `Service_ID` CSV column.
    pub fn id(self) -> i64 {
        self as i64 + 1
    }

    pub fn from_id(id: i64) -> Option<Service> {
        match id {
            1 => Some(Service::Gate),
            2 => Some(Service::Mail),
            3 => Some(Service::Obis),
            4 => Some(Service::Abis),
            5 => Some(Service::Pbis),
            6 => Some(Service::Menu),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Service::Gate => "gate",
            Service::Mail => "mail",
            Service::Obis => "obis",
            Service::Abis => "abis",
            Service::Pbis => "pbis",
            Service::Menu => "menu",
        }
    }

    pub fn from_name(name: &str) -> Option<Service> {
        SERVICES.iter().copied().find(|s| s.name() == name)
    }

    /// Index into per-service count arrays (0 = gate .. 5 = menu).
    pub fn index(self) -> usize {
        self as usize
    }
}

/// One enriched page view: the 18 wire fields of the pageview CSV format.
///
/// `detail_date_time` is epoch seconds at minute resolution (the wire format
/// carries minutes; a seconds component is accepted on input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageviewRecord {
    pub detail_id: i64,
    pub session_id: i64,
    pub detail_date_time: i64,
    pub user_id: i64,
    pub current_login_status: i64,
    pub session_login_status: i64,
    pub user_type: i64,
    pub sex: i64,
    pub age: i64,
    pub age_group: i64,
    pub user_language_tr: i64,
    pub user_location: i64,
    pub browser_type: i64,
    pub referer_type: i64,
    pub server_id: i64,
    pub service_id: i64,
    /// Page dwell time, whole seconds.
    pub page_duration: i64,
    /// Page load (generation) time, seconds with 3-decimal resolution.
    pub page_load_time: f64,
}

/// One enriched session: aggregates over the session's pageviews plus the
/// demographics of its user and the exit label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: i64,
    pub user_type: i64,
    pub sex: i64,
    pub age: i64,
    pub user_language_tr: i64,
    pub user_location: i64,
    pub browser_type: i64,
    pub referer_type: i64,
    /// Service of the first pageview (1-based service id).
    pub landing_srv_id: i64,
    /// Service of the last pageview (1-based service id).
    pub exit_srv_id: i64,
    pub session_login_status: i64,
    pub page_count: i64,
    /// Number of distinct services visited.
    pub service_count: i64,
    /// Sum of page dwell times, whole seconds.
    pub total_session_duration: i64,
    /// total_session_duration / page_count, 3-decimal resolution.
    pub avg_page_duration: f64,
    /// Sum of page load times, 3-decimal resolution.
    pub total_page_load: f64,
    /// Pageview counts per service, `SERVICES` order.
    pub service_pages: [i64; 6],
    /// 0 = direct leave, 1 = logout button, 2 = notification window.
    pub exit_method: i64,
    /// Session start timestamp, epoch seconds.
    pub log_date_time: i64,
    /// Midnight of the session start date, epoch seconds.
    pub log_date: i64,
}

impl SessionRecord {
    pub fn pages_for(&self, service: Service) -> i64 {
        self.service_pages[service.index()]
    }
}

/// Exit method codes.
pub const EXIT_DIRECT_LEAVE: i64 = 0;
pub const EXIT_LOGOUT_BUTTON: i64 = 1;
pub const EXIT_NOTIFICATION_WINDOW: i64 = 2;

/// One violated invariant, reported as data rather than as a failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub rule: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.rule)
    }
}

fn check(violations: &mut Vec<Violation>, ok: bool, field: &'static str, rule: &str) {
    if !ok {
        violations.push(Violation {
            field,
            rule: rule.to_string(),
        });
    }
}

/// Checks every record-level invariant of a pageview and returns *all*
/// violations, not just the first. An empty result means the record is ok.
///
/// Dataset-level invariants (detail_id uniqueness) are checked where whole
/// datasets exist: in the CSV reader and in the generator.
pub fn validate_pageview(record: &PageviewRecord) -> Vec<Violation> {
    let mut v = Vec::new();
    check(&mut v, record.detail_id >= 0, "detail_id", "detail_id ≥ 0");
    check(&mut v, record.session_id >= 0, "session_id", "session_id ≥ 0");
    check(
        &mut v,
        record.current_login_status == 0 || record.current_login_status == 1,
        "current_login_status",
        "current_login_status ∈ {0,1}",
    );
    check(
        &mut v,
        record.session_login_status == 0 || record.session_login_status == 1,
        "session_login_status",
        "session_login_status ∈ {0,1}",
    );
    check(&mut v, record.user_id >= 0, "user_id", "user_id ≥ 0");
    check(&mut v, record.user_type >= 0, "user_type", "user_type ≥ 0");
    check(&mut v, record.sex == 1 || record.sex == 2, "sex", "sex ∈ {1,2}");
    check(&mut v, record.age >= 0, "age", "age ≥ 0");
    check(&mut v, record.age_group >= 0, "age_group", "age_group ≥ 0");
    check(
        &mut v,
        record.user_language_tr == 0 || record.user_language_tr == 1,
        "user_language_tr",
        "user_language_tr ∈ {0,1}",
    );
    check(&mut v, record.user_location >= 0, "user_location", "user_location ≥ 0");
    check(&mut v, record.browser_type >= 0, "browser_type", "browser_type ≥ 0");
    check(&mut v, record.referer_type >= 0, "referer_type", "referer_type ≥ 0");
    check(&mut v, record.server_id >= 1, "server_id", "server_id ≥ 1");
    check(
        &mut v,
        Service::from_id(record.service_id).is_some(),
        "service_id",
        "service_id within the configured service set",
    );
    check(&mut v, record.page_duration >= 0, "page_duration", "page_duration ≥ 0");
    check(
        &mut v,
        record.page_load_time >= 0.0 && record.page_load_time.is_finite(),
        "page_load_time",
        "page_load_time ≥ 0",
    );
    v
}

/// Checks every record-level invariant of a session record.
pub fn validate_session(record: &SessionRecord) -> Vec<Violation> {
    let mut v = Vec::new();
    check(&mut v, record.session_id >= 0, "session_id", "session_id ≥ 0");
    check(&mut v, record.page_count >= 1, "page_count", "page_count ≥ 1");
    let page_sum: i64 = record.service_pages.iter().sum();
    check(
        &mut v,
        page_sum == record.page_count,
        "service_pages",
        "p_* sum mismatch",
    );
    let nonzero = record.service_pages.iter().filter(|&&c| c > 0).count() as i64;
    check(
        &mut v,
        record.service_count == nonzero,
        "service_count",
        "service_count = number of p_* fields > 0",
    );
    check(
        &mut v,
        record.service_pages.iter().all(|&c| c >= 0),
        "service_pages",
        "p_* counts ≥ 0",
    );
    check(
        &mut v,
        record.total_session_duration >= 0,
        "total_session_duration",
        "total_session_duration ≥ 0",
    );
    // 0.5 s rounding slack: avg is stored at 3-decimal resolution.
    check(
        &mut v,
        (record.avg_page_duration * record.page_count as f64 - record.total_session_duration as f64)
            .abs()
            <= 0.5,
        "avg_page_duration",
        "avg_page_duration × page_count = total_session_duration within 0.5 s",
    );
    check(
        &mut v,
        record.total_page_load >= 0.0 && record.total_page_load.is_finite(),
        "total_page_load",
        "total_page_load ≥ 0",
    );
    check(
        &mut v,
        matches!(record.exit_method, 0 | 1 | 2),
        "exit_method",
        "exit_method ∈ {0,1,2}",
    );
    check(
        &mut v,
        Service::from_id(record.landing_srv_id).is_some(),
        "landing_srv_id",
        "landing_srv_id within the configured service set",
    );
    check(
        &mut v,
        Service::from_id(record.exit_srv_id).is_some(),
        "exit_srv_id",
        "exit_srv_id within the configured service set",
    );
    check(
        &mut v,
        record.session_login_status == 0 || record.session_login_status == 1,
        "session_login_status",
        "session_login_status ∈ {0,1}",
    );
    check(&mut v, record.sex == 1 || record.sex == 2, "sex", "sex ∈ {1,2}");
    v
}

/// Rounds to 3-decimal resolution, the wire precision of load-time fields.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}
