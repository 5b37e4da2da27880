//! Task assignment and judgment collection state shared by all requests.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::Utc;
use serde::Serialize;

use newsbias_core::eval::{
    append_judgment, metrics_json, metrics_report, read_judgments, AnnotationTask, AnnotatorGroup, Answer, Judgment,
    TaskKind, TaskPayload,
};

use crate::error::{Result, ServiceError};

type QueueKey = (String, TaskKind);

#[derive(Debug, Default)]
struct Progress {
    /// Number of tasks handed out, per (annotator, kind).
    cursors: HashMap<QueueKey, usize>,
    assigned: HashSet<usize>,
    answered: HashSet<usize>,
    groups: HashMap<String, AnnotatorGroup>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Health {
    pub tasks: usize,
    pub assigned: usize,
    pub answered: usize,
}

/// Precomputed tasks plus the mutable assignment state. All mutation goes
/// through one lock, which also serializes appends to the judgment log.
#[derive(Debug)]
pub struct Session {
    tasks: Vec<AnnotationTask>,
    by_id: HashMap<String, usize>,
    queues: HashMap<QueueKey, Vec<usize>>,
    log_path: PathBuf,
    progress: Mutex<Progress>,
}

impl Session {
    /// Builds the session and replays any judgments already in the log, so a
    /// restarted service resumes where it stopped. Creates the log if absent.
    pub fn new(tasks: Vec<AnnotationTask>, log_path: impl Into<PathBuf>) -> Result<Self> {
        let log_path = log_path.into();
        let mut by_id = HashMap::new();
        let mut queues: HashMap<QueueKey, Vec<usize>> = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if by_id.insert(t.id().to_string(), i).is_some() {
                return Err(ServiceError::BadRequest(format!("duplicate task id {:?}", t.id())));
            }
            queues.entry((t.payload.annotator.clone(), t.payload.kind)).or_default().push(i);
        }
        for q in queues.values_mut() {
            q.sort_by_key(|&i| tasks[i].payload.position);
        }
        std::fs::OpenOptions::new().create(true).append(true).open(&log_path)?;

        let existing = read_judgments(&log_path)?;
        // rejects logs that do not fit the task file
        metrics_report(&existing, &tasks)?;
        let mut progress = Progress::default();
        for j in &existing {
            let i = by_id[&j.task_id];
            let t = &tasks[i];
            let key = (t.payload.annotator.clone(), t.payload.kind);
            let pos = queues[&key].iter().position(|&q| q == i).expect("task is in its queue");
            let cursor = progress.cursors.entry(key).or_default();
            *cursor = (*cursor).max(pos + 1);
            progress.assigned.insert(i);
            progress.answered.insert(i);
            progress.groups.insert(j.annotator.clone(), j.group);
        }
        Ok(Self { tasks, by_id, queues, log_path, progress: Mutex::new(progress) })
    }

    pub fn load(tasks_path: &Path, log_path: impl Into<PathBuf>) -> Result<Self> {
        Self::new(newsbias_core::eval::load_tasks(tasks_path)?, log_path)
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Progress> {
        self.progress.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn is_known(&self, annotator: &str) -> bool {
        self.queues.keys().any(|(a, _)| a == annotator)
    }

    /// The annotator's current task of `kind`: the last one handed out if it
    /// is still unanswered, otherwise the next one in sequence. `None` once
    /// every task of that kind has been answered.
    pub fn next_task(&self, annotator: &str, group: AnnotatorGroup, kind: TaskKind) -> Result<Option<TaskPayload>> {
        if !self.is_known(annotator) {
            return Err(ServiceError::UnknownAnnotator(annotator.to_string()));
        }
        let mut p = self.lock();
        match p.groups.get(annotator) {
            Some(&g) if g != group => {
                return Err(ServiceError::GroupConflict {
                    annotator: annotator.to_string(),
                    existing: g.as_str().to_string(),
                })
            }
            Some(_) => {}
            None => {
                p.groups.insert(annotator.to_string(), group);
            }
        }
        let key = (annotator.to_string(), kind);
        let Some(queue) = self.queues.get(&key) else {
            return Ok(None);
        };
        let cursor = p.cursors.get(&key).copied().unwrap_or(0);
        if cursor > 0 && !p.answered.contains(&queue[cursor - 1]) {
            return Ok(Some(self.tasks[queue[cursor - 1]].payload.clone()));
        }
        let Some(&next) = queue.get(cursor) else {
            return Ok(None);
        };
        p.cursors.insert(key, cursor + 1);
        p.assigned.insert(next);
        Ok(Some(self.tasks[next].payload.clone()))
    }

    /// Records a judgment for a task previously handed to `annotator`.
    pub fn submit(&self, task_id: &str, annotator: &str, answer: Answer) -> Result<Judgment> {
        let &i = self.by_id.get(task_id).ok_or_else(|| ServiceError::UnknownTask(task_id.to_string()))?;
        let task = &self.tasks[i];
        let mut p = self.lock();
        if task.payload.annotator != annotator || !p.assigned.contains(&i) {
            return Err(ServiceError::NotAssigned { task: task_id.to_string(), annotator: annotator.to_string() });
        }
        if p.answered.contains(&i) {
            return Err(ServiceError::Duplicate(task_id.to_string()));
        }
        if !answer.valid_for(task.payload.kind) {
            return Err(ServiceError::InvalidAnswer {
                task: task_id.to_string(),
                kind: format!("{:?}", task.payload.kind).to_lowercase(),
                answer: serde_json::to_string(&answer).unwrap_or_default(),
            });
        }
        let group = *p.groups.get(annotator).expect("assignment registers the group");
        let judgment = Judgment {
            task_id: task_id.to_string(),
            annotator: annotator.to_string(),
            group,
            answer,
            timestamp: Utc::now(),
        };
        append_judgment(&self.log_path, &judgment)?;
        p.answered.insert(i);
        Ok(judgment)
    }

    /// Metrics recomputed from the log file, serialized exactly as the
    /// offline `metrics` computation does.
    pub fn metrics(&self) -> Result<String> {
        let _guard = self.lock();
        let judgments = read_judgments(&self.log_path)?;
        Ok(metrics_json(&metrics_report(&judgments, &self.tasks)?)?)
    }

    pub fn health(&self) -> Health {
        let p = self.lock();
        Health { tasks: self.tasks.len(), assigned: p.assigned.len(), answered: p.answered.len() }
    }
}
