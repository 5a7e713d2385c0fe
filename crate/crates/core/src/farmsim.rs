//! Deterministic synthetic traffic generator for a load-balanced web farm.
//!
//! Stands in for the real portal's proprietary data: it emits pageview and
//! session records in the exact wire formats, with
//!
//! * a planted behavioral rule behind the exit-method label (logout
//!   probability rises with login status and obis usage; timeouts come from
//!   idle session tails), flipped with a configurable label-noise rate, so
//!   the prediction tasks are learnable and their recovery is testable;
//! * per-server log-normal page load times with multiplicative anomaly
//!   regimes on chosen servers, so anomaly detection can be scored against
//!   ground truth.
//!
//! Generation is deterministic for a fixed seed regardless of the parallel
//! schedule: every (user, day, session) unit draws from its own derived RNG
//! stream, and output is canonically sorted before ids are assigned.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use rayon::prelude::*;

use crate::enrich;
use crate::error::{Error, Result};
use crate::seed;
use crate::timefmt::{epoch_for, truncate_to_minute};
use crate::types::{round3, PageviewRecord, Service, SessionRecord, SERVICES};

const TAG_USER: u64 = 0x55;
const TAG_DAY: u64 = 0xDA;
const TAG_SESSION: u64 = 0x5E;

const SESSION_ID_BASE: i64 = 50_000_001;
const DETAIL_ID_BASE: i64 = 10_000_001;
const USER_ID_BASE: i64 = 100_001;

/// Per-server page load time distribution (log-normal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProfile {
    pub mu: f64,
    pub sigma: f64,
}

/// A window on one server where load times are multiplied by `magnitude`
/// with probability `rate` per pageview. Affected pageviews are flagged in
/// the ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyRegime {
    pub server_id: i64,
    pub window_start: i64,
    pub window_end: i64,
    pub magnitude: f64,
    pub rate: f64,
}

/// Parameters of the planted exit-method rule.
///
/// A session is designated a timeout (class 2) with probability
/// `timeout_rate`, in which case its final dwell is drawn from the idle
/// range. Otherwise the logout-button probability is
/// `sigmoid(logit_bias + logit_login·login + logit_obis·p_obis)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitRule {
    pub timeout_rate: f64,
    pub idle_dwell_min: i64,
    pub idle_dwell_max: i64,
    pub logit_bias: f64,
    pub logit_login: f64,
    pub logit_obis: f64,
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub user_count: u32,
    pub day_count: u32,
    /// Servers behind the load balancer; pageviews are spread uniformly.
    pub server_count: u8,
    /// Service universe the navigation chain runs over.
    pub services: Vec<Service>,
    /// Poisson mean of sessions per user per day.
    pub sessions_per_user_day: f64,
    pub login_prob: f64,
    /// First-service distribution, indexed like `services`.
    pub start_probs: Vec<f64>,
    /// Navigation chain: `transition[from][to]` over `services`, with one
    /// extra trailing column for the absorbing exit. Rows sum to 1.
    pub transition: Vec<Vec<f64>>,
    /// Dwell time distribution (log-normal, whole seconds, clamped).
    pub dwell_log_mean: f64,
    pub dwell_log_sd: f64,
    pub dwell_max: i64,
    pub max_pages_per_session: usize,
    /// Per-server load time profiles, indexed by server id − 1.
    pub server_load: Vec<LoadProfile>,
    pub anomaly_regimes: Vec<AnomalyRegime>,
    pub exit_rule: ExitRule,
    /// Label-noise rate ε ∈ [0, 0.5): each exit label is replaced by a
    /// uniformly random *different* class with this probability.
    pub label_noise: f64,
    /// Midnight starting the first simulated day, epoch seconds.
    pub start_epoch: i64,
}

impl SimConfig {
    /// Configuration with calibrated defaults for the given scale:
    /// 7 servers, the six services, anomaly regimes on servers 3 and 6,
    /// label noise 0.05.
    pub fn new(user_count: u32, day_count: u32) -> SimConfig {
        let start_epoch = epoch_for(2022, 11, 21, 0, 0);
        let window_end = start_epoch + i64::from(day_count) * 86_400;
        let server_count = 7u8;
        SimConfig {
            seed: 42,
            user_count,
            day_count,
            server_count,
            services: SERVICES.to_vec(),
            sessions_per_user_day: 1.2,
            login_prob: 0.75,
            //                 gate  mail  obis  abis  pbis  menu
            start_probs: vec![0.30, 0.15, 0.30, 0.05, 0.05, 0.15],
            transition: vec![
                //       gate  mail  obis  abis  pbis  menu  exit
                vec![0.05, 0.15, 0.40, 0.05, 0.05, 0.15, 0.15], // gate
                vec![0.05, 0.35, 0.20, 0.03, 0.02, 0.10, 0.25], // mail
                vec![0.03, 0.10, 0.45, 0.04, 0.03, 0.10, 0.25], // obis
                vec![0.05, 0.10, 0.20, 0.30, 0.05, 0.10, 0.20], // abis
                vec![0.05, 0.10, 0.20, 0.05, 0.30, 0.10, 0.20], // pbis
                vec![0.10, 0.15, 0.30, 0.05, 0.05, 0.10, 0.25], // menu
            ],
            dwell_log_mean: 3.3,
            dwell_log_sd: 0.8,
            dwell_max: 600,
            max_pages_per_session: 50,
            server_load: (0..server_count)
                .map(|s| LoadProfile {
                    mu: -2.2 + 0.06 * f64::from(s),
                    sigma: 0.55,
                })
                .collect(),
            anomaly_regimes: [3i64, 6]
                .iter()
                .map(|&server_id| AnomalyRegime {
                    server_id,
                    window_start: start_epoch,
                    window_end,
                    magnitude: 10.0,
                    rate: 0.02,
                })
                .collect(),
            exit_rule: ExitRule {
                timeout_rate: 0.028,
                idle_dwell_min: 900,
                idle_dwell_max: 3600,
                logit_bias: -54.0,
                logit_login: 48.0,
                logit_obis: 12.0,
            },
            label_noise: 0.05,
            start_epoch,
        }
    }

    /// Resizes the farm, rebuilding per-server load profiles with the
    /// default recipe and dropping anomaly regimes that target servers
    /// beyond the new count.
    pub fn with_server_count(mut self, server_count: u8) -> SimConfig {
        self.server_count = server_count;
        self.server_load = (0..server_count)
            .map(|s| LoadProfile {
                mu: -2.2 + 0.06 * f64::from(s),
                sigma: 0.55,
            })
            .collect();
        self.anomaly_regimes
            .retain(|r| r.server_id <= i64::from(server_count));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.user_count == 0 {
            return Err(Error::config("user_count", "must be ≥ 1"));
        }
        if self.day_count == 0 {
            return Err(Error::config("day_count", "must be ≥ 1"));
        }
        if !(1..=10).contains(&self.server_count) {
            return Err(Error::config("server_count", "must be in [1, 10]"));
        }
        if self.services.is_empty() {
            return Err(Error::config("services", "must not be empty"));
        }
        let s = self.services.len();
        if self.start_probs.len() != s {
            return Err(Error::config("start_probs", "length must match services"));
        }
        if (self.start_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || self.start_probs.iter().any(|&p| p < 0.0)
        {
            return Err(Error::config("start_probs", "must be non-negative and sum to 1 ± 1e-9"));
        }
        if self.transition.len() != s {
            return Err(Error::config("transition", "row count must match services"));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != s + 1 {
                return Err(Error::config(
                    "transition",
                    format!("row {i} must have services+1 columns (trailing exit)"),
                ));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > 1e-9 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::config(
                    "transition",
                    format!("row {i} must be non-negative and sum to 1 ± 1e-9"),
                ));
            }
        }
        if !(self.sessions_per_user_day > 0.0) {
            return Err(Error::config("sessions_per_user_day", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.login_prob) {
            return Err(Error::config("login_prob", "must be in [0, 1]"));
        }
        if self.server_load.len() != usize::from(self.server_count) {
            return Err(Error::config("server_load", "length must match server_count"));
        }
        if self.server_load.iter().any(|p| p.sigma < 0.0 || !p.mu.is_finite()) {
            return Err(Error::config("server_load", "sigma must be ≥ 0 and mu finite"));
        }
        for (i, regime) in self.anomaly_regimes.iter().enumerate() {
            if !(0.0..=1.0).contains(&regime.rate) {
                return Err(Error::config("anomaly_regimes", format!("regime {i}: rate must be in [0, 1]")));
            }
            if regime.magnitude <= 0.0 {
                return Err(Error::config("anomaly_regimes", format!("regime {i}: magnitude must be > 0")));
            }
            if !(1..=i64::from(self.server_count)).contains(&regime.server_id) {
                return Err(Error::config("anomaly_regimes", format!("regime {i}: server_id out of range")));
            }
            if regime.window_end < regime.window_start {
                return Err(Error::config("anomaly_regimes", format!("regime {i}: empty window")));
            }
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::config("label_noise", "must be in [0, 0.5)"));
        }
        if !(0.0..1.0).contains(&self.exit_rule.timeout_rate) {
            return Err(Error::config("exit_rule.timeout_rate", "must be in [0, 1)"));
        }
        if self.exit_rule.idle_dwell_min < 1 || self.exit_rule.idle_dwell_max < self.exit_rule.idle_dwell_min {
            return Err(Error::config("exit_rule.idle_dwell", "need 1 ≤ min ≤ max"));
        }
        if self.dwell_max < 1 || self.dwell_log_sd < 0.0 {
            return Err(Error::config("dwell", "need dwell_max ≥ 1 and dwell_log_sd ≥ 0"));
        }
        if self.max_pages_per_session == 0 {
            return Err(Error::config("max_pages_per_session", "must be ≥ 1"));
        }
        Ok(())
    }

    /// Expected pageviews per session under the navigation chain (ignoring
    /// the per-session page cap, whose truncated mass is negligible at the
    /// default scale). Solves (I − Q)·u = Q·1 for the expected continuation
    /// counts u, then averages over the start distribution.
    pub fn expected_pages_per_session(&self) -> f64 {
        let s = self.services.len();
        // Build the augmented system [(I − Q) | Q·1].
        let mut m = vec![vec![0.0f64; s + 1]; s];
        for i in 0..s {
            for j in 0..s {
                m[i][j] = f64::from(u8::from(i == j)) - self.transition[i][j];
            }
            m[i][s] = self.transition[i][..s].iter().sum::<f64>();
        }
        // Gaussian elimination with partial pivoting.
        for col in 0..s {
            let pivot = (col..s)
                .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
                .unwrap();
            m.swap(col, pivot);
            let diag = m[col][col];
            for row in 0..s {
                if row != col && m[row][col] != 0.0 {
                    let factor = m[row][col] / diag;
                    for k in col..=s {
                        m[row][k] -= factor * m[col][k];
                    }
                }
            }
        }
        let u: Vec<f64> = (0..s).map(|i| m[i][s] / m[i][i]).collect();
        1.0 + self
            .start_probs
            .iter()
            .zip(&u)
            .map(|(p, ui)| p * ui)
            .sum::<f64>()
    }

    pub fn expected_sessions(&self) -> f64 {
        f64::from(self.user_count) * f64::from(self.day_count) * self.sessions_per_user_day
    }

    pub fn expected_pageviews(&self) -> f64 {
        self.expected_sessions() * self.expected_pages_per_session()
    }
}

/// Why a session ended, before label noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCause {
    DirectLeave,
    LogoutButton,
    Timeout,
}

impl ExitCause {
    pub fn label(self) -> i64 {
        match self {
            ExitCause::DirectLeave => 0,
            ExitCause::LogoutButton => 1,
            ExitCause::Timeout => 2,
        }
    }
}

/// Generative truth for one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionTruth {
    pub session_id: i64,
    pub exit_cause: ExitCause,
    pub true_last_service: Service,
}

/// Ground truth covering every emitted record exactly once.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Parallel to the pageview vector: 1 = load time was in an anomaly
    /// regime and multiplied.
    pub anomaly_flags: Vec<u8>,
    /// Parallel to the session vector.
    pub sessions: Vec<SessionTruth>,
}

/// Generator output. `sessions[i]` corresponds to `truth.sessions[i]`, and
/// `pageviews[i]` to `truth.anomaly_flags[i]`.
#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub pageviews: Vec<PageviewRecord>,
    pub sessions: Vec<SessionRecord>,
    pub truth: GroundTruth,
}

struct UserProfile {
    user_type: i64,
    sex: i64,
    age: i64,
    age_group: i64,
    user_language_tr: i64,
    user_location: i64,
    browser_type: i64,
}

fn pick_weighted(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut draw = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        draw -= w;
        if draw < 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Age-group bins used by the generator (the coding of the original portal
/// is not public; these bins are documented, not claimed):
/// 1: ≤20, 2: 21–25, 3: 26–35, 4: 36–50, 5: ≥51.
fn age_group_of(age: i64) -> i64 {
    match age {
        ..=20 => 1,
        21..=25 => 2,
        26..=35 => 3,
        36..=50 => 4,
        _ => 5,
    }
}

fn user_profile(config: &SimConfig, user: u32) -> UserProfile {
    let mut rng = seed::stream(config.seed, &[TAG_USER, u64::from(user)]);
    let user_type = pick_weighted(&mut rng, &[0.35, 0.20, 0.15, 0.12, 0.10, 0.08]) as i64 + 1;
    let sex = i64::from(rng.random::<f64>() < 0.5) + 1;
    let age = rng.random_range(17..=65);
    let user_language_tr = i64::from(rng.random::<f64>() < 0.9);
    let user_location = pick_weighted(&mut rng, &[0.55, 0.25, 0.12, 0.08]) as i64 + 1;
    let browser_type = pick_weighted(&mut rng, &[0.40, 0.30, 0.15, 0.10, 0.05]) as i64 + 1;
    UserProfile {
        user_type,
        sex,
        age,
        age_group: age_group_of(age),
        user_language_tr,
        user_location,
        browser_type,
    }
}

struct ProtoPageview {
    timestamp: i64,
    service: Service,
    server_id: i64,
    dwell: i64,
    load_time: f64,
    anomaly: bool,
}

struct ProtoSession {
    user: u32,
    day: u32,
    index_in_day: u32,
    start: i64,
    login: i64,
    referer: i64,
    exit_cause: ExitCause,
    exit_label: i64,
    pageviews: Vec<ProtoPageview>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn generate_session(config: &SimConfig, user: u32, day: u32, index_in_day: u32) -> ProtoSession {
    let mut rng = seed::stream(
        config.seed,
        &[TAG_SESSION, u64::from(user), u64::from(day), u64::from(index_in_day)],
    );

    let start_minute = rng.random_range(0..1440i64);
    let start = config.start_epoch + i64::from(day) * 86_400 + start_minute * 60;
    let login = i64::from(rng.random::<f64>() < config.login_prob);
    let referer = pick_weighted(&mut rng, &[0.25, 0.15, 0.10, 0.10, 0.10, 0.30]) as i64 + 1;
    let timeout = rng.random::<f64>() < config.exit_rule.timeout_rate;

    let dwell_dist = LogNormal::new(config.dwell_log_mean, config.dwell_log_sd)
        .expect("validated dwell parameters");

    let mut pageviews: Vec<ProtoPageview> = Vec::new();
    let mut clock = start;
    let mut state = pick_weighted(&mut rng, &config.start_probs);
    loop {
        let service = config.services[state];
        let server_id = rng.random_range(1..=i64::from(config.server_count));
        let profile = config.server_load[(server_id - 1) as usize];
        let mut load_time = LogNormal::new(profile.mu, profile.sigma)
            .expect("validated load parameters")
            .sample(&mut rng);
        let mut anomaly = false;
        for regime in &config.anomaly_regimes {
            if regime.server_id == server_id
                && (regime.window_start..regime.window_end).contains(&clock)
                && rng.random::<f64>() < regime.rate
            {
                load_time *= regime.magnitude;
                anomaly = true;
                break;
            }
        }
        let dwell = (dwell_dist.sample(&mut rng).round() as i64).clamp(1, config.dwell_max);
        pageviews.push(ProtoPageview {
            timestamp: truncate_to_minute(clock),
            service,
            server_id,
            dwell,
            load_time: round3(load_time).max(0.001),
            anomaly,
        });
        clock += dwell;
        if pageviews.len() >= config.max_pages_per_session {
            break;
        }
        let next = pick_weighted(&mut rng, &config.transition[state]);
        if next == config.services.len() {
            break;
        }
        state = next;
    }

    // Idle tail for designated timeout sessions: the final dwell is drawn
    // from the idle range, which inflates the duration aggregates.
    if timeout {
        let idle = rng.random_range(config.exit_rule.idle_dwell_min..=config.exit_rule.idle_dwell_max);
        pageviews.last_mut().expect("session has ≥ 1 pageview").dwell = idle;
    }

    let p_obis = pageviews.iter().filter(|p| p.service == Service::Obis).count() as f64;
    let exit_cause = if timeout {
        ExitCause::Timeout
    } else {
        let rule = &config.exit_rule;
        let p_logout = sigmoid(rule.logit_bias + rule.logit_login * login as f64 + rule.logit_obis * p_obis);
        if rng.random::<f64>() < p_logout {
            ExitCause::LogoutButton
        } else {
            ExitCause::DirectLeave
        }
    };

    // Label noise: flip to a different class drawn with the target prior
    // weights, so the label distribution stays near the plant's priors
    // instead of pumping mass into the rare timeout class.
    let mut exit_label = exit_cause.label();
    if config.label_noise > 0.0 && rng.random::<f64>() < config.label_noise {
        let mut weights = [0.445, 0.527, 0.028];
        weights[exit_label as usize] = 0.0;
        exit_label = pick_weighted(&mut rng, &weights) as i64;
    }

    ProtoSession {
        user,
        day,
        index_in_day,
        start,
        login,
        referer,
        exit_cause,
        exit_label,
        pageviews,
    }
}

/// Generates the full dataset for `config`. Deterministic for a fixed seed
/// regardless of thread count.
pub fn generate(config: &SimConfig) -> Result<GenerateOutput> {
    config.validate()?;

    let mut proto: Vec<ProtoSession> = (0..config.user_count)
        .into_par_iter()
        .flat_map_iter(|user| {
            let config = &config;
            (0..config.day_count).flat_map(move |day| {
                let mut day_rng = seed::stream(config.seed, &[TAG_DAY, u64::from(user), u64::from(day)]);
                let n_sessions = Poisson::new(config.sessions_per_user_day)
                    .expect("validated session rate")
                    .sample(&mut day_rng) as u32;
                (0..n_sessions).map(move |k| generate_session(config, user, day, k))
            })
        })
        .collect();

    // Canonical order before id assignment makes output independent of the
    // parallel schedule.
    proto.sort_by_key(|s| (s.start, s.user, s.day, s.index_in_day));

    let mut pageviews = Vec::with_capacity(proto.iter().map(|s| s.pageviews.len()).sum());
    let mut anomaly_flags = Vec::with_capacity(pageviews.capacity());
    let mut exits = std::collections::HashMap::with_capacity(proto.len());
    let mut session_truth = Vec::with_capacity(proto.len());
    let mut detail_id = DETAIL_ID_BASE;

    for (i, session) in proto.iter().enumerate() {
        let session_id = SESSION_ID_BASE + i as i64;
        let profile = user_profile(config, session.user);
        let user_id = if session.login == 1 {
            USER_ID_BASE + i64::from(session.user)
        } else {
            0
        };
        for pv in &session.pageviews {
            pageviews.push(PageviewRecord {
                detail_id,
                session_id,
                detail_date_time: pv.timestamp,
                user_id,
                current_login_status: session.login,
                session_login_status: session.login,
                user_type: profile.user_type,
                sex: profile.sex,
                age: profile.age,
                age_group: profile.age_group,
                user_language_tr: profile.user_language_tr,
                user_location: profile.user_location,
                browser_type: profile.browser_type,
                referer_type: session.referer,
                server_id: pv.server_id,
                service_id: pv.service.id(),
                page_duration: pv.dwell,
                page_load_time: pv.load_time,
            });
            anomaly_flags.push(u8::from(pv.anomaly));
            detail_id += 1;
        }
        exits.insert(session_id, session.exit_label);
        session_truth.push(SessionTruth {
            session_id,
            exit_cause: session.exit_cause,
            true_last_service: session.pageviews.last().expect("non-empty session").service,
        });
    }

    let enriched = enrich::sessionize(&pageviews, Some(&exits));
    debug_assert!(enriched.diagnostics.is_empty());
    debug_assert!(enriched
        .sessions
        .iter()
        .zip(&session_truth)
        .all(|(s, t)| s.session_id == t.session_id));

    Ok(GenerateOutput {
        pageviews,
        sessions: enriched.sessions,
        truth: GroundTruth {
            anomaly_flags,
            sessions: session_truth,
        },
    })
}

/// Named scale presets.
///
/// The `paper-*` presets target the published dataset sizes (±5% expected):
/// one day of pageviews, one week of sessions, one month of sessions. The
/// `desk` preset targets 50 000 sessions over a week, small enough for a
/// workstation run of the whole pipeline.
pub const PRESET_NAMES: [&str; 4] = ["paper-day", "paper-week", "paper-month", "desk"];

pub fn scale_preset(name: &str) -> Result<SimConfig> {
    let probe = SimConfig::new(1, 1);
    let pages_per_session = probe.expected_pages_per_session();
    let spd = probe.sessions_per_user_day;
    let users_for_sessions = |target: f64, days: u32| -> u32 {
        (target / (f64::from(days) * spd)).round() as u32
    };
    let (users, days) = match name {
        "paper-day" => (
            (787_637.0 / (spd * pages_per_session)).round() as u32,
            1,
        ),
        "paper-week" => (users_for_sessions(514_879.0, 7), 7),
        "paper-month" => (users_for_sessions(1_220_916.0, 30), 30),
        "desk" => (users_for_sessions(50_000.0, 7), 7),
        other => {
            return Err(Error::input(format!(
                "unknown preset {other:?}; valid presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    Ok(SimConfig::new(users, days))
}
