//! Labeling sessions backed by an append-only event log.
//!
//! Every state change is first appended to `<data_dir>/<session_id>.jsonl`
//! as one JSON event, then applied. Reopening a store replays each log from
//! the start, which reconstructs the exact session state. Events are
//! `created`, `labels_submitted` and `retrained`.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::active::{AlError, AlRoundLog, AlState, FeatureQuery, Instance, LabeledInstance, RoundAnswers};
use crate::corpus::{write_records, ClassCounts, Provenance, RaterLabel, SentenceRecord};
use crate::eval::PointMetrics;
use crate::guidelines::{GuidelineError, Guidelines};
use crate::label::Label;
use crate::nb::{Feature, NbConfig};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {0:?} already exists")]
    SessionExists(String),
    #[error("invalid session id {0:?}: use letters, digits, '-' or '_'")]
    InvalidSessionId(String),
    #[error("{0}")]
    Labels(#[from] AlError),
    #[error("{0}")]
    Guidelines(#[from] GuidelineError),
    #[error("event log {path}: line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    #[serde(default)]
    pub nb: NbConfig,
    #[serde(default)]
    pub seed: u64,
    /// Leave retraining to explicit `retrain` calls instead of every submission.
    #[serde(default)]
    pub defer_retrain: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            nb: NbConfig::default(),
            seed: 42,
            defer_retrain: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceLabel {
    pub id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_ids: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLabel {
    pub feature: String,
    pub label: Label,
}

/// One batch of oracle decisions. Resubmitting a token is a no-op that
/// returns the original round log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub token: String,
    #[serde(default)]
    pub rater_id: String,
    #[serde(default)]
    pub instances: Vec<InstanceLabel>,
    #[serde(default)]
    pub features: Vec<FeatureLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        session_id: String,
        config: SessionConfig,
        guideline_version: String,
        corpus: Vec<SentenceRecord>,
        #[serde(default)]
        evaluation: Vec<SentenceRecord>,
    },
    LabelsSubmitted(Submission),
    Retrained { round: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceView {
    pub sentence_id: String,
    pub text: String,
    pub entropy: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub session_id: String,
    pub round: u32,
    pub model_trained: bool,
    pub instances: Vec<InstanceView>,
    pub features: Vec<FeatureQuery>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub session_id: String,
    pub round: u32,
    pub labeled: usize,
    pub unlabeled: usize,
    pub labeled_features: usize,
    pub label_counts: ClassCounts,
    pub model_trained: bool,
    pub guideline_version: String,
    /// Point metrics on the session's evaluation set, if it has one.
    pub evaluation: Option<PointMetrics>,
    pub last_round: Option<AlRoundLog>,
}

#[derive(Debug, Clone)]
struct ExportEntry {
    id: String,
    label: Label,
    rater_id: String,
    rule_ids: Option<Vec<String>>,
}

/// In-memory state of one session, driven purely by events.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    config: SessionConfig,
    guideline_version: String,
    records: BTreeMap<String, SentenceRecord>,
    state: AlState,
    exported: Vec<ExportEntry>,
    tokens: HashMap<String, AlRoundLog>,
    last_round: Option<AlRoundLog>,
}

impl Session {
    /// Validates a corpus and returns the `created` event for it. Records
    /// that already carry a label seed the initial model.
    pub fn create_event(
        session_id: &str,
        corpus: Vec<SentenceRecord>,
        evaluation: Vec<SentenceRecord>,
        config: SessionConfig,
    ) -> Result<Event, SessionError> {
        if corpus.is_empty() {
            return Err(SessionError::EmptyCorpus);
        }
        let event = Event::Created {
            session_id: session_id.to_string(),
            config,
            guideline_version: Guidelines::bundled().version,
            corpus,
            evaluation,
        };
        // surfaces duplicate ids before anything is persisted
        Session::from_created(&event)?;
        Ok(event)
    }

    fn from_created(event: &Event) -> Result<Session, SessionError> {
        let Event::Created {
            session_id,
            config,
            guideline_version,
            corpus,
            evaluation,
        } = event
        else {
            return Err(SessionError::EmptyCorpus);
        };
        let mut unlabeled = Vec::new();
        let mut seeds = Vec::new();
        for r in corpus {
            match r.label {
                Some(label) => seeds.push(LabeledInstance {
                    id: r.id.clone(),
                    text: r.text.clone(),
                    label,
                }),
                None => unlabeled.push(Instance {
                    id: r.id.clone(),
                    text: r.text.clone(),
                }),
            }
        }
        let gold = evaluation
            .iter()
            .filter_map(|r| r.label.map(|l| (r.text.clone(), l)))
            .collect();
        let state = AlState::new(unlabeled, seeds, config.nb, config.seed)?.with_evaluation(gold);
        Ok(Session {
            id: session_id.clone(),
            config: *config,
            guideline_version: guideline_version.clone(),
            records: corpus.iter().map(|r| (r.id.clone(), r.clone())).collect(),
            state,
            exported: Vec::new(),
            tokens: HashMap::new(),
            last_round: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state(&self) -> &AlState {
        &self.state
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    fn answers(submission: &Submission) -> RoundAnswers {
        RoundAnswers {
            instances: submission.instances.iter().map(|l| (l.id.clone(), l.label)).collect(),
            features: submission
                .features
                .iter()
                .map(|f| (Feature::new(&f.feature), f.label))
                .collect(),
        }
    }

    /// `Ok(Some(log))` when the token was already applied.
    pub fn check(&self, submission: &Submission) -> Result<Option<AlRoundLog>, SessionError> {
        if let Some(log) = self.tokens.get(&submission.token) {
            return Ok(Some(log.clone()));
        }
        let guidelines = Guidelines::bundled();
        for l in &submission.instances {
            guidelines.check_citations(l.rule_ids.iter().flatten().map(String::as_str))?;
        }
        self.state.validate(&Self::answers(submission))?;
        Ok(None)
    }

    /// Applies a logged event. Events after `created` only.
    pub fn apply(&mut self, event: &Event) -> Result<Option<AlRoundLog>, SessionError> {
        match event {
            Event::Created { .. } => Err(SessionError::SessionExists(self.id.clone())),
            Event::LabelsSubmitted(sub) => {
                if let Some(log) = self.tokens.get(&sub.token) {
                    return Ok(Some(log.clone()));
                }
                let log = self.state.apply(&Self::answers(sub), !self.config.defer_retrain)?;
                for l in &sub.instances {
                    self.exported.push(ExportEntry {
                        id: l.id.clone(),
                        label: l.label,
                        rater_id: sub.rater_id.clone(),
                        rule_ids: l.rule_ids.clone(),
                    });
                }
                self.tokens.insert(sub.token.clone(), log.clone());
                self.last_round = Some(log.clone());
                Ok(Some(log))
            }
            Event::Retrained { .. } => {
                self.state.retrain();
                Ok(None)
            }
        }
    }

    pub fn queries(&self, k_instances: usize, m_features: usize) -> QueryView {
        let q = self.state.queries(k_instances, m_features);
        QueryView {
            session_id: self.id.clone(),
            round: self.state.round(),
            model_trained: self.state.model().is_some(),
            instances: q
                .instances
                .into_iter()
                .map(|iq| InstanceView {
                    text: self.records.get(&iq.sentence_id).map(|r| r.text.clone()).unwrap_or_default(),
                    sentence_id: iq.sentence_id,
                    entropy: iq.entropy,
                    rank: iq.rank,
                })
                .collect(),
            features: q.features,
        }
    }

    pub fn metrics(&self) -> SessionMetrics {
        let mut counts = ClassCounts::default();
        for l in self.state.labeled() {
            match l.label {
                Label::Positive => counts.positive += 1,
                Label::Negative => counts.negative += 1,
            }
        }
        SessionMetrics {
            session_id: self.id.clone(),
            round: self.state.round(),
            labeled: self.state.labeled().len(),
            unlabeled: self.state.unlabeled_len(),
            labeled_features: self.state.labeled_features().len(),
            label_counts: counts,
            model_trained: self.state.model().is_some(),
            guideline_version: self.guideline_version.clone(),
            evaluation: self.state.evaluate(),
            last_round: self.last_round.clone(),
        }
    }

    /// Records labeled in this session, in labeling order.
    pub fn export(&self) -> Vec<SentenceRecord> {
        self.exported
            .iter()
            .map(|e| {
                let mut r = self.records[&e.id].clone();
                r.label = Some(e.label);
                r.provenance = Provenance::ActiveLearning;
                r.rater_labels = Some(vec![RaterLabel {
                    rater_id: e.rater_id.clone(),
                    label: e.label,
                }]);
                r.rule_ids = e.rule_ids.clone();
                r
            })
            .collect()
    }

    pub fn export_jsonl(&self) -> String {
        let mut buf = Vec::new();
        write_records(&mut buf, &self.export()).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

struct Handle {
    session: Session,
    log: Option<File>,
}

impl Handle {
    fn append(&mut self, event: &Event) -> Result<(), SessionError> {
        if let Some(file) = &mut self.log {
            append_event(file, event)?;
        }
        Ok(())
    }
}

fn append_event(file: &mut File, event: &Event) -> Result<(), SessionError> {
    let mut line = serde_json::to_vec(event).map_err(io::Error::from)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

/// All sessions of one service. Each session is guarded by its own lock, so
/// mutations of one session apply in a single total order while different
/// sessions proceed independently.
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Handle>>>>,
}

impl SessionStore {
    /// A store that keeps nothing on disk.
    pub fn in_memory() -> SessionStore {
        SessionStore {
            dir: None,
            sessions: Mutex::new(BTreeMap::new()),
        }
    }

    /// Opens `dir`, replaying every `*.jsonl` event log in it.
    pub fn open(dir: impl AsRef<Path>) -> Result<SessionStore, SessionError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut sessions = BTreeMap::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            if let Some(session) = replay(&path)? {
                let log = OpenOptions::new().append(true).open(&path)?;
                sessions.insert(
                    session.id.clone(),
                    Arc::new(Mutex::new(Handle {
                        session,
                        log: Some(log),
                    })),
                );
            }
        }
        Ok(SessionStore {
            dir: Some(dir),
            sessions: Mutex::new(sessions),
        })
    }

    fn registry(&self) -> MutexGuard<'_, BTreeMap<String, Arc<Mutex<Handle>>>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<Handle>>, SessionError> {
        self.registry()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    fn with<T>(&self, id: &str, f: impl FnOnce(&mut Handle) -> Result<T, SessionError>) -> Result<T, SessionError> {
        let handle = self.handle(id)?;
        let mut guard = handle.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut guard)
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.registry().keys().cloned().collect()
    }

    /// Creates a session. Without an explicit id, the next free `sNNNNNN`
    /// id is used.
    pub fn create(
        &self,
        session_id: Option<&str>,
        corpus: Vec<SentenceRecord>,
        evaluation: Vec<SentenceRecord>,
        config: SessionConfig,
    ) -> Result<String, SessionError> {
        let mut registry = self.registry();
        let id = match session_id {
            Some(id) => {
                let valid = !id.is_empty()
                    && id.len() <= 64
                    && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
                if !valid {
                    return Err(SessionError::InvalidSessionId(id.to_string()));
                }
                if registry.contains_key(id) {
                    return Err(SessionError::SessionExists(id.to_string()));
                }
                id.to_string()
            }
            None => (registry.len() + 1..)
                .map(|n| format!("s{n:06}"))
                .find(|id| !registry.contains_key(id))
                .expect("unbounded range"),
        };
        let event = Session::create_event(&id, corpus, evaluation, config)?;
        let session = Session::from_created(&event)?;
        let log = match &self.dir {
            Some(dir) => {
                let path = dir.join(format!("{id}.jsonl"));
                let mut file = OpenOptions::new().create_new(true).append(true).open(&path).map_err(|e| {
                    if e.kind() == io::ErrorKind::AlreadyExists {
                        SessionError::SessionExists(id.clone())
                    } else {
                        e.into()
                    }
                })?;
                append_event(&mut file, &event)?;
                Some(file)
            }
            None => None,
        };
        registry.insert(id.clone(), Arc::new(Mutex::new(Handle { session, log })));
        Ok(id)
    }

    pub fn queries(&self, id: &str, k_instances: usize, m_features: usize) -> Result<QueryView, SessionError> {
        self.with(id, |h| Ok(h.session.queries(k_instances, m_features)))
    }

    pub fn submit(&self, id: &str, submission: Submission) -> Result<AlRoundLog, SessionError> {
        self.with(id, |h| {
            if let Some(log) = h.session.check(&submission)? {
                return Ok(log);
            }
            let event = Event::LabelsSubmitted(submission);
            h.append(&event)?;
            Ok(h.session.apply(&event)?.expect("submissions produce a log"))
        })
    }

    pub fn retrain(&self, id: &str) -> Result<SessionMetrics, SessionError> {
        self.with(id, |h| {
            let event = Event::Retrained {
                round: h.session.state.round(),
            };
            h.append(&event)?;
            h.session.apply(&event)?;
            Ok(h.session.metrics())
        })
    }

    pub fn metrics(&self, id: &str) -> Result<SessionMetrics, SessionError> {
        self.with(id, |h| Ok(h.session.metrics()))
    }

    pub fn export(&self, id: &str) -> Result<Vec<SentenceRecord>, SessionError> {
        self.with(id, |h| Ok(h.session.export()))
    }

    pub fn export_jsonl(&self, id: &str) -> Result<String, SessionError> {
        self.with(id, |h| Ok(h.session.export_jsonl()))
    }

    /// A copy of the session's current state.
    pub fn snapshot(&self, id: &str) -> Result<Session, SessionError> {
        self.with(id, |h| Ok(h.session.clone()))
    }
}

/// Rebuilds a session from its event log. A final line without a newline is
/// a torn write from an interrupted append; it is dropped from the file.
pub fn replay(path: &Path) -> Result<Option<Session>, SessionError> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut session: Option<Session> = None;
    let mut line = String::new();
    let mut lineno = 0;
    let mut valid_len: u64 = 0;
    let corrupt = |line: usize, message: String| SessionError::CorruptLog {
        path: path.to_path_buf(),
        line,
        message,
    };
    loop {
        line.clear();
        let read = reader.read_line(&mut line)?;
        if read == 0 {
            break;
        }
        lineno += 1;
        if !line.ends_with('\n') {
            OpenOptions::new().write(true).open(path)?.set_len(valid_len)?;
            break;
        }
        valid_len += read as u64;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| corrupt(lineno, e.to_string()))?;
        match (&mut session, &event) {
            (None, Event::Created { .. }) => session = Some(Session::from_created(&event)?),
            (None, _) => return Err(corrupt(lineno, "log does not start with a created event".into())),
            (Some(s), _) => {
                s.apply(&event).map_err(|e| corrupt(lineno, e.to_string()))?;
            }
        }
    }
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<SentenceRecord> {
        let texts = [
            ("c1", "Carbon emissions warm the planet", Some(Label::Positive)),
            ("c2", "The cafe sells cold beer", Some(Label::Negative)),
            ("u1", "A carbon tax was proposed", None),
            ("u2", "The match ended in a draw", None),
            ("u3", "Sea levels rise as glaciers melt", None),
            ("u4", "Bread prices went up", None),
            ("u5", "Warming oceans bleach coral", None),
        ];
        texts
            .iter()
            .map(|(id, t, l)| {
                let mut r = SentenceRecord::new(*id, *t, Provenance::Manual);
                r.label = *l;
                r
            })
            .collect()
    }

    fn submission(token: &str, ids: &[(&str, Label)]) -> Submission {
        Submission {
            token: token.into(),
            rater_id: "r1".into(),
            instances: ids
                .iter()
                .map(|(id, l)| InstanceLabel {
                    id: id.to_string(),
                    label: *l,
                    rule_ids: None,
                })
                .collect(),
            features: vec![],
        }
    }

    #[test]
    fn create_rejects_empty_and_duplicates() {
        let store = SessionStore::in_memory();
        assert!(matches!(
            store.create(None, vec![], vec![], SessionConfig::default()),
            Err(SessionError::EmptyCorpus)
        ));
        let mut dup = corpus();
        dup.push(dup[0].clone());
        assert!(matches!(
            store.create(None, dup, vec![], SessionConfig::default()),
            Err(SessionError::Labels(AlError::DuplicateId(_)))
        ));
        assert!(matches!(
            store.create(Some("../x"), corpus(), vec![], SessionConfig::default()),
            Err(SessionError::InvalidSessionId(_))
        ));
    }

    #[test]
    fn unlabeled_corpus_starts_untrained() {
        let store = SessionStore::in_memory();
        let recs: Vec<_> = (0..100)
            .map(|i| SentenceRecord::new(format!("u{i}"), format!("sentence number {i}"), Provenance::Manual))
            .collect();
        let id = store.create(None, recs, vec![], SessionConfig::default()).unwrap();
        let m = store.metrics(&id).unwrap();
        assert_eq!((m.round, m.model_trained, m.unlabeled), (0, false, 100));
        let q = store.queries(&id, 10, 5).unwrap();
        assert_eq!(q.instances.len(), 10);
        assert!(q.features.is_empty());
    }

    #[test]
    fn submit_is_idempotent_per_token() {
        let store = SessionStore::in_memory();
        let id = store.create(Some("t1"), corpus(), vec![], SessionConfig::default()).unwrap();
        assert!(store.metrics(&id).unwrap().model_trained);
        let sub = submission("tok-1", &[("u1", Label::Positive), ("u2", Label::Negative)]);
        let log = store.submit(&id, sub.clone()).unwrap();
        assert_eq!(log.unlabeled, 3);
        let again = store.submit(&id, sub).unwrap();
        assert_eq!(again, log);
        assert_eq!(store.metrics(&id).unwrap().unlabeled, 3);
        assert_eq!(store.export(&id).unwrap().len(), 2);
    }

    #[test]
    fn submit_validates() {
        let store = SessionStore::in_memory();
        let id = store.create(None, corpus(), vec![], SessionConfig::default()).unwrap();
        assert!(matches!(
            store.submit(&id, submission("a", &[("zzz", Label::Positive)])),
            Err(SessionError::Labels(AlError::UnknownInstance(_)))
        ));
        let mut bad_rule = submission("b", &[("u1", Label::Negative)]);
        bad_rule.instances[0].rule_ids = Some(vec!["99".into()]);
        assert!(matches!(store.submit(&id, bad_rule), Err(SessionError::Guidelines(_))));
        assert!(matches!(
            store.submit("nope", submission("c", &[])),
            Err(SessionError::UnknownSession(_))
        ));
        assert_eq!(store.metrics(&id).unwrap().unlabeled, 5);
    }

    #[test]
    fn export_carries_provenance_and_rules() {
        let store = SessionStore::in_memory();
        let id = store.create(None, corpus(), vec![], SessionConfig::default()).unwrap();
        assert!(store.export(&id).unwrap().is_empty());
        let mut sub = submission("x", &[("u4", Label::Negative), ("u3", Label::Positive), ("u5", Label::Positive)]);
        sub.instances[0].rule_ids = Some(vec!["4".into()]);
        store.submit(&id, sub).unwrap();
        let out = store.export(&id).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|r| r.provenance == Provenance::ActiveLearning));
        assert_eq!(out[0].rule_ids, Some(vec!["4".to_string()]));
        assert_eq!(out[1].rule_ids, None);
        assert_eq!(store.export_jsonl(&id).unwrap(), store.export_jsonl(&id).unwrap());
    }

    #[test]
    fn deferred_retrain() {
        let store = SessionStore::in_memory();
        let cfg = SessionConfig {
            defer_retrain: true,
            ..SessionConfig::default()
        };
        let id = store.create(None, corpus(), vec![], cfg).unwrap();
        let before = store.snapshot(&id).unwrap().state().model().cloned();
        store.submit(&id, submission("a", &[("u1", Label::Positive)])).unwrap();
        assert_eq!(store.snapshot(&id).unwrap().state().model().cloned(), before);
        store.retrain(&id).unwrap();
        assert_ne!(store.snapshot(&id).unwrap().state().model().cloned(), before);
    }

    #[test]
    fn replay_restores_state_and_drops_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let id = {
            let store = SessionStore::open(dir.path()).unwrap();
            let id = store.create(None, corpus(), vec![], SessionConfig::default()).unwrap();
            store.submit(&id, submission("a", &[("u1", Label::Positive)])).unwrap();
            id
        };
        let path = dir.path().join(format!("{id}.jsonl"));
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"event\":\"labels_sub").unwrap();
        drop(f);
        let store = SessionStore::open(dir.path()).unwrap();
        assert_eq!(store.metrics(&id).unwrap().unlabeled, 4);
        store.submit(&id, submission("b", &[("u2", Label::Negative)])).unwrap();
        let reopened = SessionStore::open(dir.path()).unwrap();
        assert_eq!(reopened.metrics(&id).unwrap().unlabeled, 3);
        assert_eq!(reopened.session_ids(), vec![id]);
    }
}
