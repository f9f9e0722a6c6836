//! User records, a single-directory JSON store and the enroll/verify service.
//!
//! Layout: `<root>/index.json` lists user ids; `<root>/users/<id>.json` holds
//! one [`UserRecord`]. Only feature vectors and templates are written.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::features::{extract_features, FeatureError, FeatureVector};
use crate::matcher::{
    state_hash, DriftStatus, EuclideanTemplate, HammingTemplate, MatchError, Method,
};
use crate::trace::{compute_state, PasswordTrace, Task};
use crate::wavelet::MotherWavelet;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown user '{0}'")]
    UnknownUser(String),
    #[error("user '{0}' already exists")]
    UserExists(String),
    #[error("invalid user id '{0}': use 1-64 characters from [A-Za-z0-9_-]")]
    InvalidUserId(String),
    #[error("user '{0}' is already enrolled")]
    AlreadyEnrolled(String),
    #[error("user '{user}' is not enrolled ({collected}/{required} traces)")]
    NotEnrolled { user: String, collected: usize, required: usize },
    #[error("user '{user}' has no {method} template")]
    MethodMismatch { user: String, method: Method },
    #[error("trace task {trace} does not match user task {user}")]
    TaskMismatch { user: Task, trace: Task },
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaMismatch { found: u64, expected: u32 },
    #[error("feature layout '{found}' needs migration to '{expected}'; re-enroll the user")]
    LayoutMigration { found: String, expected: String },
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt record {path}: {message}")]
    Corrupt { path: String, message: String },
}

impl ServiceError {
    /// True for errors caused by the request rather than the service.
    pub fn is_client_error(&self) -> bool {
        !matches!(self, ServiceError::Io(_) | ServiceError::Corrupt { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum EnrollmentStatus {
    Pending { collected: usize, required: usize },
    Enrolled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub method: Method,
    pub distance: f64,
    pub threshold: f64,
    pub accepted: bool,
    pub adapted: bool,
    pub drift: DriftStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub schema_version: u32,
    pub user_id: String,
    pub task: Option<Task>,
    pub method: Method,
    pub status: EnrollmentStatus,
    /// Enrollment traces captured without pressure (constant force channel).
    pub no_pressure_entries: usize,
    /// Features of accepted enrollment traces, cleared once templates are fit.
    pub staged_euclidean: Vec<FeatureVector>,
    pub staged_hamming: Vec<FeatureVector>,
    pub euclidean: Option<EuclideanTemplate>,
    pub hamming: Option<HammingTemplate>,
    pub audit: Vec<AuditEntry>,
}

impl UserRecord {
    fn new(user_id: &str, task: Option<Task>, method: Method, required: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            user_id: user_id.to_string(),
            task,
            method,
            status: EnrollmentStatus::Pending { collected: 0, required },
            no_pressure_entries: 0,
            staged_euclidean: Vec::new(),
            staged_hamming: Vec::new(),
            euclidean: None,
            hamming: None,
            audit: Vec::new(),
        }
    }

    pub fn is_enrolled(&self) -> bool {
        matches!(self.status, EnrollmentStatus::Enrolled)
    }

    pub fn template_hash(&self, method: Method) -> Option<String> {
        match method {
            Method::Euclidean => self.euclidean.as_ref().map(state_hash),
            Method::Hamming => self.hamming.as_ref().map(state_hash),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    /// Parses and validates an exported record.
    pub fn from_json(document: &str) -> Result<Self, ServiceError> {
        let value: serde_json::Value =
            serde_json::from_str(document).map_err(|e| ServiceError::InvalidDocument(e.to_string()))?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| ServiceError::InvalidDocument("missing schema_version".into()))?;
        if found != u64::from(SCHEMA_VERSION) {
            return Err(ServiceError::SchemaMismatch { found, expected: SCHEMA_VERSION });
        }
        let record: UserRecord =
            serde_json::from_value(value).map_err(|e| ServiceError::InvalidDocument(e.to_string()))?;
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if !valid_user_id(&self.user_id) {
            return Err(ServiceError::InvalidUserId(self.user_id.clone()));
        }
        let layouts = self
            .euclidean
            .iter()
            .map(|t| &t.layout)
            .chain(self.hamming.iter().map(|t| &t.layout))
            .chain(self.staged_euclidean.iter().chain(&self.staged_hamming).map(|f| &f.layout));
        for layout in layouts {
            if layout != crate::features::LAYOUT_VERSION {
                return Err(ServiceError::LayoutMigration {
                    found: layout.clone(),
                    expected: crate::features::LAYOUT_VERSION.to_string(),
                });
            }
        }
        for fv in self.staged_euclidean.iter().chain(&self.staged_hamming) {
            fv.validate()?;
        }
        if let Some(t) = &self.euclidean {
            t.validate()?;
        }
        if let Some(t) = &self.hamming {
            t.validate()?;
        }
        let has_templates = self.euclidean.is_some() && self.hamming.is_some();
        match &self.status {
            EnrollmentStatus::Enrolled if !has_templates => {
                Err(ServiceError::InvalidDocument("enrolled record without both templates".into()))
            }
            EnrollmentStatus::Pending { .. } if self.euclidean.is_some() || self.hamming.is_some() => {
                Err(ServiceError::InvalidDocument("pending record carries a template".into()))
            }
            EnrollmentStatus::Pending { collected, .. }
                if *collected != self.staged_euclidean.len()
                    || *collected != self.staged_hamming.len() =>
            {
                Err(ServiceError::InvalidDocument("staged count does not match status".into()))
            }
            _ => Ok(()),
        }
    }
}

pub fn valid_user_id(id: &str) -> bool {
    (1..=64).contains(&id.len())
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Index {
    schema_version: u32,
    users: BTreeSet<String>,
}

/// One JSON document per user plus an index, written by atomic rename.
#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    tmp_counter: AtomicU64,
}

impl Store {
    pub fn open(root: &Path) -> Result<Self, ServiceError> {
        fs::create_dir_all(root.join("users"))?;
        let store = Self { root: root.to_path_buf(), tmp_counter: AtomicU64::new(0) };
        if !store.index_path().exists() {
            store.write_index(&Index { schema_version: SCHEMA_VERSION, users: BTreeSet::new() })?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    fn user_path(&self, id: &str) -> PathBuf {
        self.root.join("users").join(format!("{id}.json"))
    }

    fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<(), ServiceError> {
        let n = self.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = path.with_extension(format!("tmp.{}.{n}", std::process::id()));
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    fn read_index(&self) -> Result<Index, ServiceError> {
        let path = self.index_path();
        let bytes = fs::read(&path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| ServiceError::Corrupt { path: path.display().to_string(), message: e.to_string() })
    }

    fn write_index(&self, index: &Index) -> Result<(), ServiceError> {
        let json = serde_json::to_string_pretty(index).expect("index serializes");
        self.write_atomic(&self.index_path(), json.as_bytes())
    }

    pub fn users(&self) -> Result<Vec<String>, ServiceError> {
        Ok(self.read_index()?.users.into_iter().collect())
    }

    pub fn contains(&self, id: &str) -> Result<bool, ServiceError> {
        Ok(self.read_index()?.users.contains(id))
    }

    pub fn load(&self, id: &str) -> Result<UserRecord, ServiceError> {
        if !valid_user_id(id) {
            return Err(ServiceError::UnknownUser(id.to_string()));
        }
        let path = self.user_path(id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ServiceError::UnknownUser(id.to_string()))
            }
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text)
            .map_err(|e| ServiceError::Corrupt { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn save(&self, record: &UserRecord) -> Result<(), ServiceError> {
        self.write_atomic(&self.user_path(&record.user_id), record.to_json().as_bytes())
    }

    /// Writes a new record and registers it in the index. The caller holds
    /// the index lock.
    fn insert(&self, record: &UserRecord) -> Result<(), ServiceError> {
        let mut index = self.read_index()?;
        if index.users.contains(&record.user_id) {
            return Err(ServiceError::UserExists(record.user_id.clone()));
        }
        self.save(record)?;
        index.users.insert(record.user_id.clone());
        self.write_index(&index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollProgress {
    pub user_id: String,
    pub collected: usize,
    pub required: usize,
    pub enrolled: bool,
    /// Set once any enrollment trace was captured without pressure.
    pub reduced_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub user_id: String,
    pub method: Method,
    pub accepted: bool,
    pub distance: f64,
    pub threshold: f64,
    pub adapted: bool,
    pub drift: DriftStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStatus {
    pub user_id: String,
    pub task: Option<Task>,
    pub method: Method,
    pub status: EnrollmentStatus,
    pub verify_count: usize,
    pub reduced_confidence: bool,
    pub euclidean_drift: Option<DriftStatus>,
    pub hamming_drift: Option<DriftStatus>,
}

impl From<&UserRecord> for UserStatus {
    fn from(r: &UserRecord) -> Self {
        Self {
            user_id: r.user_id.clone(),
            task: r.task,
            method: r.method,
            status: r.status.clone(),
            verify_count: r.audit.len(),
            reduced_confidence: r.no_pressure_entries > 0,
            euclidean_drift: r.euclidean.as_ref().map(EuclideanTemplate::drift_check),
            hamming_drift: r.hamming.as_ref().map(HammingTemplate::drift_check),
        }
    }
}

/// Enroll/verify service over a [`Store`]. Requests for one user serialize
/// through a per-user lock; different users proceed in parallel.
#[derive(Debug)]
pub struct Service {
    store: Store,
    config: Config,
    index_lock: Mutex<()>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl Service {
    pub fn open(root: &Path, config: Config) -> Result<Self, ServiceError> {
        Ok(Self {
            store: Store::open(root)?,
            config,
            index_lock: Mutex::new(()),
            locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    fn user_lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    fn with_user<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut UserRecord) -> Result<(T, bool), ServiceError>,
    ) -> Result<T, ServiceError> {
        let lock = self.user_lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut record = self.store.load(id)?;
        let (out, dirty) = f(&mut record)?;
        if dirty {
            self.store.save(&record)?;
        }
        Ok(out)
    }

    fn euclidean_wavelet(&self, task: Option<Task>) -> MotherWavelet {
        self.config.euclidean.for_task(task).wavelet
    }

    pub fn create_user(
        &self,
        id: &str,
        task: Option<Task>,
        method: Option<Method>,
    ) -> Result<UserStatus, ServiceError> {
        if !valid_user_id(id) {
            return Err(ServiceError::InvalidUserId(id.to_string()));
        }
        let method = method.unwrap_or(self.config.enrollment.default_method);
        let record = UserRecord::new(id, task, method, self.config.enrollment.count);
        let _guard = self.index_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.store.insert(&record)?;
        Ok(UserStatus::from(&record))
    }

    pub fn status(&self, id: &str) -> Result<UserStatus, ServiceError> {
        self.with_user(id, |r| Ok((UserStatus::from(&*r), false)))
    }

    pub fn record(&self, id: &str) -> Result<UserRecord, ServiceError> {
        self.with_user(id, |r| Ok((r.clone(), false)))
    }

    pub fn users(&self) -> Result<Vec<String>, ServiceError> {
        self.store.users()
    }

    /// Extracts and stages one enrollment trace. The trace that completes the
    /// set fits and calibrates both templates.
    pub fn enroll(&self, id: &str, trace: &PasswordTrace) -> Result<EnrollProgress, ServiceError> {
        // Imposter pool is read before taking this user's lock so that two
        // users finishing enrollment at once cannot wait on each other.
        let pool = self.imposter_pool(id)?;
        self.with_user(id, |r| {
            let (collected, required) = match r.status {
                EnrollmentStatus::Enrolled => return Err(ServiceError::AlreadyEnrolled(id.to_string())),
                EnrollmentStatus::Pending { collected, required } => (collected, required),
            };
            if let (Some(user), Some(trace)) = (r.task, trace.metadata.task) {
                if user != trace {
                    return Err(ServiceError::TaskMismatch { user, trace });
                }
            }
            if r.task.is_none() {
                r.task = trace.metadata.task;
            }
            let state = compute_state(trace);
            let ew = self.euclidean_wavelet(r.task);
            let hw = self.config.hamming.wavelet;
            let fe = extract_features(&state, ew)?;
            let fh = if hw == ew { fe.clone() } else { extract_features(&state, hw)? };
            if trace.metadata.pressure_supported == Some(false) {
                r.no_pressure_entries += 1;
            }
            let reduced_confidence = r.no_pressure_entries > 0;
            r.staged_euclidean.push(fe);
            r.staged_hamming.push(fh);
            let collected = collected + 1;
            if collected < required {
                r.status = EnrollmentStatus::Pending { collected, required };
                let progress =
                    EnrollProgress { user_id: id.into(), collected, required, enrolled: false, reduced_confidence };
                return Ok((progress, true));
            }
            self.fit_templates(r, &pool)?;
            let progress =
                EnrollProgress { user_id: id.into(), collected, required, enrolled: true, reduced_confidence };
            Ok((progress, true))
        })
    }

    /// Enrollment templates of every other enrolled user.
    fn imposter_pool(&self, id: &str) -> Result<Vec<FeatureVector>, ServiceError> {
        let mut pool = Vec::new();
        for other in self.store.users()? {
            if other == id {
                continue;
            }
            let record = match self.store.load(&other) {
                Ok(r) => r,
                Err(ServiceError::UnknownUser(_)) => continue,
                Err(e) => return Err(e),
            };
            if let Some(t) = record.euclidean {
                for values in t.initial_templates {
                    pool.push(FeatureVector { layout: t.layout.clone(), wavelet: t.wavelet, values });
                }
            }
        }
        Ok(pool)
    }

    fn fit_templates(&self, r: &mut UserRecord, pool: &[FeatureVector]) -> Result<(), ServiceError> {
        let cfg = &self.config;
        let fmr = cfg.evaluation.fmr_target;
        let mut euclidean =
            EuclideanTemplate::enroll(&r.user_id, &r.staged_euclidean, &cfg.euclidean.for_task(r.task))?;
        let e_pool: Vec<FeatureVector> =
            pool.iter().filter(|f| f.wavelet == euclidean.wavelet).cloned().collect();
        euclidean.calibrate(&e_pool, fmr, cfg.euclidean.genuine_margin);
        let mut hamming = HammingTemplate::enroll(&r.user_id, &r.staged_hamming, &cfg.hamming)?;
        let h_pool: Vec<FeatureVector> =
            pool.iter().filter(|f| f.wavelet == hamming.wavelet).cloned().collect();
        hamming.calibrate(&r.staged_hamming, &h_pool, fmr, cfg.hamming.genuine_margin);
        r.euclidean = Some(euclidean);
        r.hamming = Some(hamming);
        r.staged_euclidean.clear();
        r.staged_hamming.clear();
        r.status = EnrollmentStatus::Enrolled;
        Ok(())
    }

    /// Scores a probe, optionally adapts on acceptance, and appends an audit
    /// entry. Decision, update and audit are persisted together.
    pub fn verify(
        &self,
        id: &str,
        trace: &PasswordTrace,
        method: Option<Method>,
        adapt: bool,
    ) -> Result<VerifyOutcome, ServiceError> {
        self.with_user(id, |r| {
            if let EnrollmentStatus::Pending { collected, required } = r.status {
                return Err(ServiceError::NotEnrolled { user: id.into(), collected, required });
            }
            let method = method.unwrap_or(r.method);
            let state = compute_state(trace);
            let (accepted, distance, threshold, adapted, drift) = match method {
                Method::Euclidean => {
                    let tpl = r
                        .euclidean
                        .as_mut()
                        .ok_or(ServiceError::MethodMismatch { user: id.into(), method })?;
                    let probe = extract_features(&state, tpl.wavelet)?;
                    let res = tpl.matching_distance(&probe)?;
                    let adapted = res.accepted && adapt;
                    if adapted {
                        tpl.adaptive_update(&probe)?;
                    }
                    (res.accepted, res.distance, tpl.threshold, adapted, tpl.drift_check())
                }
                Method::Hamming => {
                    let tpl = r
                        .hamming
                        .as_mut()
                        .ok_or(ServiceError::MethodMismatch { user: id.into(), method })?;
                    let probe = extract_features(&state, tpl.wavelet)?;
                    let res = tpl.hamming_distance(&probe)?;
                    let adapted = res.accepted && adapt;
                    if adapted {
                        tpl.adaptive_mean_update(&probe)?;
                    }
                    let threshold = tpl.distance_threshold as f64;
                    (res.accepted, res.distance as f64, threshold, adapted, tpl.drift_check())
                }
            };
            r.audit.push(AuditEntry {
                seq: r.audit.len() as u64,
                timestamp_ms: now_ms(),
                method,
                distance,
                threshold,
                accepted,
                adapted,
                drift,
            });
            let outcome = VerifyOutcome { user_id: id.into(), method, accepted, distance, threshold, adapted, drift };
            Ok((outcome, true))
        })
    }

    pub fn export_user(&self, id: &str) -> Result<String, ServiceError> {
        self.with_user(id, |r| Ok((r.to_json(), false)))
    }

    /// Validates an exported record and registers it as a new user.
    pub fn import_user(&self, document: &str) -> Result<UserStatus, ServiceError> {
        let record = UserRecord::from_json(document)?;
        let _guard = self.index_lock.lock().unwrap_or_else(|e| e.into_inner());
        self.store.insert(&record)?;
        Ok(UserStatus::from(&record))
    }
}
