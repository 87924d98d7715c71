//! Contract logic: identities, ACL evaluation, and single-use access codes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::Digest256;

pub const UID_DIGITS: usize = 39;
pub const CODE_DIGITS: usize = 18;
const UID_ATTEMPTS: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("role must be nonempty")]
    EmptyRole,
    #[error("role and storage names must be nonempty")]
    EmptyName,
    #[error("RegistryCollision: no fresh UID after 8 attempts")]
    RegistryCollision,
    #[error("CodeAlreadyConsumed: {0}")]
    CodeAlreadyConsumed(String),
    #[error("invalid date {0:?}, expected YYYY-MM-DD")]
    InvalidDate(String),
    #[error("invalid time {0:?}, expected HH:MM")]
    InvalidTime(String),
    #[error("range start must precede its end")]
    InvalidRange,
    #[error("a request names at least one camera")]
    NoCameras,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Court,
    Police,
    LawEnforcer,
    SocOperator,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Court, Role::Police, Role::LawEnforcer, Role::SocOperator];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Court => "court",
            Role::Police => "police",
            Role::LawEnforcer => "law_enforcer",
            Role::SocOperator => "soc_operator",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Proleptic Gregorian calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: i32,
    month: u8,
    day: u8,
}

fn is_leap(y: i32) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn month_len(y: i32, m: u8) -> u8 {
    match m {
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(y) => 29,
        2 => 28,
        _ => 31,
    }
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Option<Self> {
        ((1..=12).contains(&month) && day >= 1 && day <= month_len(year, month)).then_some(Date { year, month, day })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    pub fn day(self) -> u8 {
        self.day
    }

    /// Days since 1970-01-01 (negative before it).
    pub fn days_since_epoch(self) -> i64 {
        // Hinnant's days_from_civil.
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let era = y.div_euclid(400);
        let yoe = y - era * 400;
        let m = i64::from(self.month);
        let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + i64::from(self.day) - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    pub fn from_days_since_epoch(days: i64) -> Self {
        let z = days + 719_468;
        let era = z.div_euclid(146_097);
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146_096) / 365;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let day = (doy - (153 * mp + 2) / 5 + 1) as u8;
        let month = if mp < 10 { mp + 3 } else { mp - 9 } as u8;
        let year = (yoe + era * 400 + i64::from(month <= 2)) as i32;
        Date { year, month, day }
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

fn digits<T: FromStr>(s: &str, n: usize) -> Option<T> {
    (s.len() == n && s.bytes().all(|b| b.is_ascii_digit())).then(|| s.parse().ok()).flatten()
}

impl FromStr for Date {
    type Err = ContractError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ContractError::InvalidDate(s.to_string());
        let mut it = s.split('-');
        let (y, m, d) = (it.next().ok_or_else(bad)?, it.next().ok_or_else(bad)?, it.next().ok_or_else(bad)?);
        if it.next().is_some() {
            return Err(bad());
        }
        let (y, m, d) = (digits(y, 4).ok_or_else(bad)?, digits(m, 2).ok_or_else(bad)?, digits(d, 2).ok_or_else(bad)?);
        Date::new(y, m, d).ok_or_else(bad)
    }
}

/// Minutes after midnight, `00:00`..=`23:59`; `24:00` is accepted as the end
/// of the day so a range can cover the last minute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay(u16);

impl TimeOfDay {
    pub const END_OF_DAY: TimeOfDay = TimeOfDay(24 * 60);

    pub fn hm(h: u8, m: u8) -> Option<Self> {
        let t = u16::from(h) * 60 + u16::from(m);
        (m < 60 && t <= 24 * 60).then_some(TimeOfDay(t))
    }

    pub fn minutes(self) -> u16 {
        self.0
    }

    pub fn seconds(self) -> u32 {
        u32::from(self.0) * 60
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.0 / 60, self.0 % 60)
    }
}

impl FromStr for TimeOfDay {
    type Err = ContractError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ContractError::InvalidTime(s.to_string());
        let (h, m) = s.split_once(':').ok_or_else(bad)?;
        TimeOfDay::hm(digits(h, 2).ok_or_else(bad)?, digits(m, 2).ok_or_else(bad)?).ok_or_else(bad)
    }
}

macro_rules! serde_via_str {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

serde_via_str!(Date);
serde_via_str!(TimeOfDay);

/// Half-open `[start, end)` time-of-day range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TimeRange {
    start: TimeOfDay,
    end: TimeOfDay,
}

impl TimeRange {
    pub fn new(start: TimeOfDay, end: TimeOfDay) -> Result<Self, ContractError> {
        if start < end {
            Ok(TimeRange { start, end })
        } else {
            Err(ContractError::InvalidRange)
        }
    }

    pub fn start(self) -> TimeOfDay {
        self.start
    }

    pub fn end(self) -> TimeOfDay {
        self.end
    }

    pub fn duration_minutes(self) -> u32 {
        u32::from(self.end.0 - self.start.0)
    }
}

impl<'de> Deserialize<'de> for TimeRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            start: TimeOfDay,
            end: TimeOfDay,
        }
        let r = Raw::deserialize(d)?;
        TimeRange::new(r.start, r.end).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestType {
    WholeContext,
    Activities,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub uid: String,
    pub camera_ids: Vec<String>,
    pub date: Date,
    pub range: TimeRange,
    #[serde(rename = "type")]
    pub kind: RequestType,
    pub storage_name: String,
    pub storage_address: String,
}

impl AccessRequest {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("requests serialize")
    }

    /// Parses and enforces the nonempty-camera invariant.
    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        let r: AccessRequest = serde_json::from_slice(bytes)?;
        if r.camera_ids.is_empty() {
            return Err(serde::de::Error::custom(ContractError::NoCameras));
        }
        Ok(r)
    }

    pub fn with_code(&self, access_code: &str) -> UpdatedRequest {
        UpdatedRequest { request: self.clone(), access_code: access_code.to_string() }
    }
}

/// An [`AccessRequest`] carrying the access code issued by consensus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdatedRequest {
    #[serde(flatten)]
    pub request: AccessRequest,
    pub access_code: String,
}

impl UpdatedRequest {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("requests serialize")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

/// Inclusive date window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub from: Date,
    pub to: Date,
}

impl DateWindow {
    pub fn contains(&self, d: Date) -> bool {
        self.from <= d && d <= self.to
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AclEntry {
    pub uid: String,
    pub role: Role,
    pub allowed_cameras: BTreeSet<String>,
    pub allowed_date_window: DateWindow,
    pub max_range_minutes: u32,
    pub allowed_types: BTreeSet<RequestType>,
    pub allowed_storage_sites: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    Approved,
    UnknownUser,
    CameraDenied,
    DateDenied,
    RangeExceeded,
    TypeDenied,
    SiteDenied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub approved: bool,
    pub reason: Reason,
}

impl From<Reason> for Decision {
    fn from(reason: Reason) -> Self {
        Decision { approved: reason == Reason::Approved, reason }
    }
}

/// Evaluates `req` against the entry for its UID. Checks run in a fixed
/// order and the first failure decides.
pub fn validate_request(req: &AccessRequest, acl: &[AclEntry]) -> Decision {
    let Some(entry) = acl.iter().find(|e| e.uid == req.uid) else {
        return Reason::UnknownUser.into();
    };
    let reason = if req.camera_ids.is_empty() || !req.camera_ids.iter().all(|c| entry.allowed_cameras.contains(c)) {
        Reason::CameraDenied
    } else if !entry.allowed_date_window.contains(req.date) {
        Reason::DateDenied
    } else if req.range.duration_minutes() > entry.max_range_minutes {
        Reason::RangeExceeded
    } else if !entry.allowed_types.contains(&req.kind) {
        Reason::TypeDenied
    } else if !entry.allowed_storage_sites.contains(&req.storage_name) {
        Reason::SiteDenied
    } else {
        Reason::Approved
    };
    reason.into()
}

/// `n` uniformly distributed decimal digits drawn from a hash stream over
/// `parts`. Bytes ≥ 250 are skipped so every digit is unbiased.
fn seeded_digits(domain: &[u8], parts: &[&[u8]], n: usize) -> String {
    let mut out = String::with_capacity(n);
    for block in 0u32.. {
        let mut all: Vec<&[u8]> = Vec::with_capacity(parts.len() + 2);
        let counter = block.to_le_bytes();
        all.push(domain);
        all.push(&counter);
        all.extend_from_slice(parts);
        for b in Digest256::of_parts(&all).0 {
            if b < 250 {
                out.push(char::from(b'0' + b % 10));
                if out.len() == n {
                    return out;
                }
            }
        }
    }
    unreachable!()
}

/// Issued UIDs, to keep them unique.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UidRegistry {
    issued: BTreeSet<String>,
}

impl UidRegistry {
    pub fn contains(&self, uid: &str) -> bool {
        self.issued.contains(uid)
    }

    pub fn len(&self) -> usize {
        self.issued.len()
    }

    pub fn is_empty(&self) -> bool {
        self.issued.is_empty()
    }
}

/// `role` followed by 39 seeded digits, unique within `registry`.
pub fn issue_uid(role: &str, entropy: &[u8], registry: &mut UidRegistry) -> Result<String, ContractError> {
    if role.is_empty() {
        return Err(ContractError::EmptyRole);
    }
    for attempt in 0..UID_ATTEMPTS {
        let uid = format!("{role}{}", seeded_digits(b"sepris/uid/v1", &[&attempt.to_le_bytes(), role.as_bytes(), &[0], entropy], UID_DIGITS));
        if registry.issued.insert(uid.clone()) {
            return Ok(uid);
        }
    }
    Err(ContractError::RegistryCollision)
}

/// `role + "To" + storage_name` followed by 18 seeded digits.
pub fn generate_access_code(role: &str, storage_name: &str, entropy: &[u8]) -> Result<String, ContractError> {
    if role.is_empty() || storage_name.is_empty() {
        return Err(ContractError::EmptyName);
    }
    let d = seeded_digits(b"sepris/access-code/v1", &[role.as_bytes(), &[0], storage_name.as_bytes(), &[0], entropy], CODE_DIGITS);
    Ok(format!("{role}To{storage_name}{d}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodeState {
    Unconsumed,
    Consumed,
}

/// Access codes known to a storage site and whether each has been used.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeRegistry {
    codes: BTreeMap<String, CodeState>,
}

impl CodeRegistry {
    /// Registers a fresh code; re-registering keeps the existing state.
    pub fn register(&mut self, code: &str) {
        self.codes.entry(code.to_string()).or_insert(CodeState::Unconsumed);
    }

    pub fn state(&self, code: &str) -> Option<CodeState> {
        self.codes.get(code).copied()
    }

    /// Field-by-field comparison that consumes the code on success.
    pub fn match_requests(&mut self, presented: &UpdatedRequest, forwarded: &UpdatedRequest) -> Result<bool, ContractError> {
        match self.codes.get_mut(&presented.access_code) {
            Some(CodeState::Consumed) => Err(ContractError::CodeAlreadyConsumed(presented.access_code.clone())),
            Some(state) if presented == forwarded => {
                *state = CodeState::Consumed;
                Ok(true)
            }
            _ => Ok(false),
        }
    }
}
