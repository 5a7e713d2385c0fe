//! Pageview → session aggregation and feature-matrix construction for the
//! three prediction tasks.
//!
//! Sessions are known exactly (every pageview carries its session id), so
//! sessionization is pure aggregation: no timeout heuristics, no session
//! splitting. That is the point of working from enriched application data
//! instead of raw server logs.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matrix::{ColumnKind, FeatureMatrix};
use crate::timefmt;
use crate::types::{round3, PageviewRecord, Service, SessionRecord, SERVICES};

/// Why a session group was skipped during aggregation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionDiagnostic {
    pub session_id: i64,
    pub reason: String,
}

/// Result of [`sessionize`].
#[derive(Debug, Clone)]
pub struct SessionizeOutcome {
    pub sessions: Vec<SessionRecord>,
    pub diagnostics: Vec<SessionDiagnostic>,
}

/// Aggregates pageviews into one session record per distinct session id.
///
/// Pageviews are ordered within a session by timestamp, ties broken by
/// `detail_id`; landing/exit service come from the first/last pageview in
/// that order; demographics are copied from the first pageview. Sessions
/// whose pageviews disagree on `user_id` signal a corrupted join and are
/// skipped with a diagnostic.
///
/// `exit_methods` maps session id → exit label; sessions without an entry
/// get 0 (direct leave). The generator supplies this table; for ingested
/// data it comes from an auxiliary exit-event file.
pub fn sessionize(
    pageviews: &[PageviewRecord],
    exit_methods: Option<&HashMap<i64, i64>>,
) -> SessionizeOutcome {
    // Canonical order first so the result is independent of input order.
    let mut order: Vec<usize> = (0..pageviews.len()).collect();
    order.sort_by_key(|&i| {
        let r = &pageviews[i];
        (r.session_id, r.detail_date_time, r.detail_id)
    });

    let mut sessions = Vec::new();
    let mut diagnostics = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let session_id = pageviews[order[start]].session_id;
        let mut end = start + 1;
        while end < order.len() && pageviews[order[end]].session_id == session_id {
            end += 1;
        }
        let group: Vec<&PageviewRecord> = order[start..end].iter().map(|&i| &pageviews[i]).collect();
        start = end;

        let first = group[0];
        if group.iter().any(|p| p.user_id != first.user_id) {
            diagnostics.push(SessionDiagnostic {
                session_id,
                reason: "pageviews disagree on user_id".to_string(),
            });
            continue;
        }

        let last = group[group.len() - 1];
        let page_count = group.len() as i64;
        let total_session_duration: i64 = group.iter().map(|p| p.page_duration).sum();
        let total_page_load = round3(group.iter().map(|p| p.page_load_time).sum());
        let mut service_pages = [0i64; 6];
        for p in &group {
            if let Some(service) = Service::from_id(p.service_id) {
                service_pages[service.index()] += 1;
            }
        }
        let service_count = service_pages.iter().filter(|&&c| c > 0).count() as i64;
        let exit_method = exit_methods
            .and_then(|m| m.get(&session_id).copied())
            .unwrap_or(0);

        sessions.push(SessionRecord {
            session_id,
            user_type: first.user_type,
            sex: first.sex,
            age: first.age,
            user_language_tr: first.user_language_tr,
            user_location: first.user_location,
            browser_type: first.browser_type,
            referer_type: first.referer_type,
            landing_srv_id: first.service_id,
            exit_srv_id: last.service_id,
            session_login_status: first.session_login_status,
            page_count,
            service_count,
            total_session_duration,
            avg_page_duration: round3(total_session_duration as f64 / page_count as f64),
            total_page_load,
            service_pages,
            exit_method,
            log_date_time: first.detail_date_time,
            log_date: timefmt::parse_date(
                &timefmt::format_date(first.detail_date_time, timefmt::TimestampFormat::Iso8601),
                timefmt::TimestampFormat::Iso8601,
            )
            .expect("date of a valid timestamp"),
        });
    }

    SessionizeOutcome {
        sessions,
        diagnostics,
    }
}

/// Feature source for the matrix builder: either the raw numeric value or a
/// categorical value to one-hot encode.
enum Encoding {
    Numeric,
    OneHot,
}

struct FeatureSpec {
    name: &'static str,
    encoding: Encoding,
    extract: fn(&SessionRecord) -> f64,
}

fn build_matrix(
    sessions: &[SessionRecord],
    specs: &[FeatureSpec],
    labels: Vec<usize>,
    class_names: Vec<String>,
) -> Result<FeatureMatrix> {
    // Collect the domain of every categorical feature first; one-hot width
    // is the number of distinct values present in the data.
    let mut domains: Vec<Vec<i64>> = Vec::with_capacity(specs.len());
    for spec in specs {
        match spec.encoding {
            Encoding::Numeric => domains.push(Vec::new()),
            Encoding::OneHot => {
                let mut values: Vec<i64> =
                    sessions.iter().map(|s| (spec.extract)(s) as i64).collect();
                values.sort_unstable();
                values.dedup();
                domains.push(values);
            }
        }
    }

    let mut column_names = Vec::new();
    let mut column_kinds = Vec::new();
    for (spec, domain) in specs.iter().zip(&domains) {
        match spec.encoding {
            Encoding::Numeric => {
                column_names.push(spec.name.to_string());
                column_kinds.push(ColumnKind::Numeric);
            }
            Encoding::OneHot => {
                for value in domain {
                    column_names.push(format!("{}={}", spec.name, value));
                    column_kinds.push(ColumnKind::CategoricalOneHot);
                }
            }
        }
    }

    let d = column_names.len();
    let mut values = Vec::with_capacity(sessions.len() * d);
    for session in sessions {
        for (spec, domain) in specs.iter().zip(&domains) {
            let v = (spec.extract)(session);
            match spec.encoding {
                Encoding::Numeric => values.push(v),
                Encoding::OneHot => {
                    let v = v as i64;
                    for &candidate in domain {
                        values.push(if candidate == v { 1.0 } else { 0.0 });
                    }
                }
            }
        }
    }

    FeatureMatrix::new(column_names, column_kinds, values, labels, class_names)
}

fn exit_method_specs() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec { name: "User_Type", encoding: Encoding::OneHot, extract: |s| s.user_type as f64 },
        FeatureSpec { name: "Sex", encoding: Encoding::Numeric, extract: |s| s.sex as f64 },
        FeatureSpec { name: "Age", encoding: Encoding::Numeric, extract: |s| s.age as f64 },
        FeatureSpec { name: "User_Language_TR", encoding: Encoding::Numeric, extract: |s| s.user_language_tr as f64 },
        FeatureSpec { name: "User_Location", encoding: Encoding::OneHot, extract: |s| s.user_location as f64 },
        FeatureSpec { name: "Browser_Type", encoding: Encoding::OneHot, extract: |s| s.browser_type as f64 },
        FeatureSpec { name: "Landing_Srv_ID", encoding: Encoding::OneHot, extract: |s| s.landing_srv_id as f64 },
        FeatureSpec { name: "Exit_Srv_ID", encoding: Encoding::OneHot, extract: |s| s.exit_srv_id as f64 },
        FeatureSpec { name: "Session_Login_Status", encoding: Encoding::Numeric, extract: |s| s.session_login_status as f64 },
        FeatureSpec { name: "Page_Count", encoding: Encoding::Numeric, extract: |s| s.page_count as f64 },
        FeatureSpec { name: "Service_Count", encoding: Encoding::Numeric, extract: |s| s.service_count as f64 },
        FeatureSpec { name: "Total_Session_Duration", encoding: Encoding::Numeric, extract: |s| s.total_session_duration as f64 },
        FeatureSpec { name: "Avg_Page_Duration", encoding: Encoding::Numeric, extract: |s| s.avg_page_duration },
        FeatureSpec { name: "Total_Page_Load", encoding: Encoding::Numeric, extract: |s| s.total_page_load },
        FeatureSpec { name: "p_gate", encoding: Encoding::Numeric, extract: |s| s.service_pages[0] as f64 },
        FeatureSpec { name: "p_mail", encoding: Encoding::Numeric, extract: |s| s.service_pages[1] as f64 },
        FeatureSpec { name: "p_obis", encoding: Encoding::Numeric, extract: |s| s.service_pages[2] as f64 },
        FeatureSpec { name: "p_abis", encoding: Encoding::Numeric, extract: |s| s.service_pages[3] as f64 },
        FeatureSpec { name: "p_pbis", encoding: Encoding::Numeric, extract: |s| s.service_pages[4] as f64 },
        FeatureSpec { name: "p_menu", encoding: Encoding::Numeric, extract: |s| s.service_pages[5] as f64 },
    ]
}

/// Exit-method prediction features: the 20 session attributes, with
/// categorical ones (User_Type, User_Location, Browser_Type, landing/exit
/// service) one-hot encoded. Label = exit_method.
///
/// Numeric columns are unscaled; the linear and kernel learners standardize
/// them internally on their training rows, keyed off [`ColumnKind`].
pub fn features_exit_method(sessions: &[SessionRecord]) -> Result<FeatureMatrix> {
    if sessions.is_empty() {
        return Err(Error::input("no sessions to build features from"));
    }
    let mut classes: Vec<i64> = sessions.iter().map(|s| s.exit_method).collect();
    classes.sort_unstable();
    classes.dedup();
    let class_names: Vec<String> = classes.iter().map(|c| c.to_string()).collect();
    let labels = sessions
        .iter()
        .map(|s| classes.binary_search(&s.exit_method).unwrap())
        .collect();
    build_matrix(sessions, &exit_method_specs(), labels, class_names)
}

/// Last-abandoned-service prediction features: the exit-method feature list
/// minus `Exit_Srv_ID` (it is the label). Label = exit service.
pub fn features_last_service(sessions: &[SessionRecord]) -> Result<FeatureMatrix> {
    if sessions.is_empty() {
        return Err(Error::input("no sessions to build features from"));
    }
    let specs: Vec<FeatureSpec> = exit_method_specs()
        .into_iter()
        .filter(|s| s.name != "Exit_Srv_ID")
        .collect();

    let present: Vec<Service> = SERVICES
        .iter()
        .copied()
        .filter(|svc| sessions.iter().any(|s| s.exit_srv_id == svc.id()))
        .collect();
    let class_names: Vec<String> = present.iter().map(|s| s.name().to_string()).collect();
    let labels = sessions
        .iter()
        .map(|s| {
            present
                .iter()
                .position(|svc| svc.id() == s.exit_srv_id)
                .ok_or_else(|| Error::input(format!("exit service id {} out of domain", s.exit_srv_id)))
        })
        .collect::<Result<Vec<usize>>>()?;

    let matrix = build_matrix(sessions, &specs, labels, class_names)?;
    // Leakage guard: the label must never appear among the features.
    if let Some(col) = matrix.column_names.iter().find(|c| c.contains("Exit_Srv_ID")) {
        return Err(Error::input(format!("leakage: feature column {col} is the label")));
    }
    Ok(matrix)
}

/// Service-access prediction features: the 10 session attributes of the
/// binary task. `Log_Date_Time` is encoded as hour-of-day (0-23) and
/// `Log_Date` as day-of-week (0 = Monday), both one-hot. Label = 1 iff the
/// session visited `target_service`.
pub fn features_service_access(
    sessions: &[SessionRecord],
    target_service: &str,
) -> Result<FeatureMatrix> {
    let target = Service::from_name(target_service).ok_or_else(|| {
        Error::input(format!(
            "unknown target service {target_service:?}; known services: {}",
            SERVICES.map(|s| s.name()).join(", ")
        ))
    })?;
    if sessions.is_empty() {
        return Err(Error::input("no sessions to build features from"));
    }

    let specs: Vec<FeatureSpec> = vec![
        FeatureSpec {
            name: "Log_Date_Time",
            encoding: Encoding::OneHot,
            extract: |s| timefmt::hour_of_day(s.log_date_time) as f64,
        },
        FeatureSpec {
            name: "Log_Date",
            encoding: Encoding::OneHot,
            extract: |s| timefmt::day_of_week(s.log_date_time) as f64,
        },
        FeatureSpec { name: "User_Type", encoding: Encoding::OneHot, extract: |s| s.user_type as f64 },
        FeatureSpec { name: "Sex", encoding: Encoding::Numeric, extract: |s| s.sex as f64 },
        FeatureSpec { name: "Age", encoding: Encoding::Numeric, extract: |s| s.age as f64 },
        FeatureSpec { name: "Avg_Page_Duration", encoding: Encoding::Numeric, extract: |s| s.avg_page_duration },
        FeatureSpec { name: "User_Language_TR", encoding: Encoding::Numeric, extract: |s| s.user_language_tr as f64 },
        FeatureSpec { name: "User_Location", encoding: Encoding::OneHot, extract: |s| s.user_location as f64 },
        FeatureSpec { name: "Browser_Type", encoding: Encoding::OneHot, extract: |s| s.browser_type as f64 },
        FeatureSpec { name: "Referer_Type", encoding: Encoding::OneHot, extract: |s| s.referer_type as f64 },
    ];

    let labels = sessions
        .iter()
        .map(|s| usize::from(s.pages_for(target) > 0))
        .collect();
    build_matrix(sessions, &specs, labels, vec!["0".to_string(), "1".to_string()])
}

/// The three prediction tasks, with a stable string tag used in model
/// metadata and on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Task {
    ExitMethod,
    LastService,
    ServiceAccess(String),
}

impl Task {
    pub fn tag(&self) -> String {
        match self {
            Task::ExitMethod => "exit-method".to_string(),
            Task::LastService => "last-service".to_string(),
            Task::ServiceAccess(service) => format!("service-access:{service}"),
        }
    }

    pub fn parse(tag: &str) -> Result<Task> {
        match tag {
            "exit-method" => Ok(Task::ExitMethod),
            "last-service" => Ok(Task::LastService),
            other => match other.strip_prefix("service-access:") {
                Some(service) if Service::from_name(service).is_some() => {
                    Ok(Task::ServiceAccess(service.to_string()))
                }
                _ => Err(Error::input(format!(
                    "unknown task {tag:?}; expected exit-method, last-service, or service-access:<service>"
                ))),
            },
        }
    }

    /// Builds this task's feature matrix.
    pub fn features(&self, sessions: &[SessionRecord]) -> Result<FeatureMatrix> {
        match self {
            Task::ExitMethod => features_exit_method(sessions),
            Task::LastService => features_last_service(sessions),
            Task::ServiceAccess(service) => features_service_access(sessions, service),
        }
    }
}

/// Number of distinct source features (one-hot groups counted once).
pub fn base_feature_count(matrix: &FeatureMatrix) -> usize {
    let mut parents: Vec<&str> = matrix
        .column_names
        .iter()
        .map(|c| c.split('=').next().unwrap())
        .collect();
    parents.dedup();
    let mut sorted = parents.clone();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len()
}
