//! Project persistence: one `<id>.xa11y.json` per project plus an
//! append-only `<id>.mutations.jsonl` of every effective mutation.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use thiserror::Error;
use tokio::sync::Mutex;
use xa11y_core::project::{load_project, save_project, MutationRecord, Project, ProjectError, PROJECT_FILE_SUFFIX};
use xa11y_core::{analyze, AnalysisConfig, PipelineError};

pub const MUTATION_LOG_SUFFIX: &str = ".mutations.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown project `{0}`")]
    UnknownProject(String),
    #[error("revision {expected} is stale; project is at revision {current}")]
    StaleRevision { expected: u64, current: u64 },
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error("mutation log: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_millis() as u64)
    })
}

/// Outcome of one mutation.
#[derive(Debug, Clone)]
pub struct Applied {
    pub project: Arc<Project>,
    pub record: MutationRecord,
    pub changed: bool,
}

pub struct Store {
    dir: PathBuf,
    clock: Clock,
    // the outer lock only guards the map; each project has its own writer lock
    projects: RwLock<HashMap<String, Arc<Mutex<Arc<Project>>>>>,
}

impl Store {
    /// Opens `dir`, loading every project file already in it.
    pub fn open(dir: &Path, clock: Clock) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let mut projects = HashMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let is_project = path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(PROJECT_FILE_SUFFIX) && !n.starts_with('.'));
            if !is_project {
                continue;
            }
            match load_project(&path) {
                Ok(p) => {
                    projects.insert(p.project_id.clone(), Arc::new(Mutex::new(Arc::new(p))));
                }
                Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(Self { dir: dir.to_path_buf(), clock, projects: RwLock::new(projects) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn project_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{PROJECT_FILE_SUFFIX}"))
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}{MUTATION_LOG_SUFFIX}"))
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Arc<Project>>>, StoreError> {
        self.projects
            .read()
            .expect("project map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownProject(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.projects.read().expect("project map poisoned").keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Current snapshot of a project.
    pub async fn get(&self, id: &str) -> Result<Arc<Project>, StoreError> {
        let slot = self.slot(id)?;
        let snapshot = slot.lock().await.clone();
        Ok(snapshot)
    }

    /// Registers a freshly analyzed project. If the id is already known the
    /// stored project (with its edits) wins and `false` is returned.
    pub async fn insert(&self, project: Project) -> Result<(Arc<Project>, bool), StoreError> {
        let existing = {
            let mut map = self.projects.write().expect("project map poisoned");
            match map.get(&project.project_id) {
                Some(slot) => slot.clone(),
                None => {
                    save_project(&self.project_path(&project.project_id), &project)?;
                    std::fs::write(self.log_path(&project.project_id), "")?;
                    let project = Arc::new(project);
                    map.insert(project.project_id.clone(), Arc::new(Mutex::new(project.clone())));
                    return Ok((project, true));
                }
            }
        };
        let current = existing.lock().await.clone();
        Ok((current, false))
    }

    /// Applies `mutation` if `expected` is the current revision. The project
    /// file is rewritten before the in-memory copy changes, so a failed write
    /// leaves both at the old revision.
    pub async fn mutate(
        &self,
        id: &str,
        expected: u64,
        mutation: xa11y_core::project::Mutation,
    ) -> Result<Applied, StoreError> {
        let slot = self.slot(id)?;
        let mut guard = slot.lock().await;
        if guard.revision != expected {
            return Err(StoreError::StaleRevision { expected, current: guard.revision });
        }
        let record = MutationRecord { at_ms: (self.clock)(), mutation };
        let mut next = (**guard).clone();
        let changed = next.apply(&record)?;
        if !changed {
            return Ok(Applied { project: guard.clone(), record, changed });
        }
        save_project(&self.project_path(id), &next)?;
        append_log(&self.log_path(id), &record)?;
        *guard = Arc::new(next);
        Ok(Applied { project: guard.clone(), record, changed })
    }

    pub fn mutations(&self, id: &str) -> Result<Vec<MutationRecord>, StoreError> {
        self.slot(id)?;
        read_log(&self.log_path(id))
    }
}

fn append_log(path: &Path, record: &MutationRecord) -> Result<(), StoreError> {
    let mut line = serde_json::to_string(record).map_err(|e| StoreError::Log(e.to_string()))?;
    line.push('\n');
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())?;
    f.sync_data()?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<MutationRecord>, StoreError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| StoreError::Log(format!("line {}: {e}", n + 1))))
        .collect()
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Analysis(#[from] PipelineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("log entry {index}: {source}")]
    Mutation { index: usize, source: ProjectError },
}

/// Re-analyzes the bundle recorded in `base`'s provenance with the same
/// settings and applies `log` on top.
pub fn replay(base: &Project, log: &[MutationRecord]) -> Result<Project, ReplayError> {
    let mut config = AnalysisConfig::from_provenance(&base.provenance);
    config.load.decoder = xa11y_core::ingest::DecoderConfig::from_env();
    let mut project = analyze(Path::new(&base.provenance.bundle_path), &config)?;
    for (index, record) in log.iter().enumerate() {
        project.apply(record).map_err(|source| ReplayError::Mutation { index, source })?;
    }
    Ok(project)
}
