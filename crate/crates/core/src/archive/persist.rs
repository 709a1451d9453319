//! Directory persistence: per entry `<task>/<seed>.png`, `<seed>.traj.txt`
//! and a `<seed>.json` metadata record.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Archive, ArchiveEntry, ArchiveError, PerceptualMetric, Stored};
use crate::codec::{encode_trajectory_text, parse_trajectory_text};
use crate::image::Image;
use crate::types::{SeedId, TaskId};
use crate::InitialState;

#[derive(Debug, Serialize, Deserialize)]
struct Metadata {
    task: TaskId,
    seed: SeedId,
    inserted_at: u64,
    demonstration: bool,
    initial_state: InitialState,
}

impl Archive {
    pub fn save_dir(&self, dir: &Path) -> Result<(), ArchiveError> {
        for (task, list) in &self.tasks {
            let task_dir = dir.join(task.as_str());
            fs::create_dir_all(&task_dir)?;
            for s in list {
                let e = &s.entry;
                let stem = task_dir.join(e.seed.to_string());
                fs::write(stem.with_extension("png"), e.observation.to_png()?)?;
                fs::write(
                    stem.with_extension("traj.txt"),
                    encode_trajectory_text(&e.trajectory),
                )?;
                let meta = Metadata {
                    task: e.task.clone(),
                    seed: e.seed,
                    inserted_at: e.inserted_at,
                    demonstration: e.demonstration,
                    initial_state: e.initial.clone(),
                };
                fs::write(
                    stem.with_extension("json"),
                    serde_json::to_string_pretty(&meta)?,
                )?;
            }
        }
        Ok(())
    }

    /// Reloads an archive written by [`Archive::save_dir`]. Every trajectory
    /// is re-verified; insertion order and counters are restored.
    pub fn load_dir(dir: &Path, metric: Arc<dyn PerceptualMetric>) -> Result<Self, ArchiveError> {
        let mut entries = Vec::new();
        let mut task_dirs: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        task_dirs.sort_by_key(|d| d.path());
        for task_dir in task_dirs {
            if !task_dir.file_type()?.is_dir() {
                continue;
            }
            let mut files: Vec<_> = fs::read_dir(task_dir.path())?.collect::<Result<_, _>>()?;
            files.sort_by_key(|f| f.path());
            for f in files {
                let path = f.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let meta: Metadata = serde_json::from_str(&fs::read_to_string(&path)?)?;
                let observation = Image::from_png(&fs::read(path.with_extension("png"))?)?;
                let trajectory =
                    parse_trajectory_text(&fs::read_to_string(path.with_extension("traj.txt"))?)?;
                entries.push(ArchiveEntry {
                    observation,
                    trajectory,
                    initial: meta.initial_state,
                    task: meta.task,
                    seed: meta.seed,
                    inserted_at: meta.inserted_at,
                    demonstration: meta.demonstration,
                });
            }
        }
        entries.sort_by_key(|e| e.inserted_at);
        let mut archive = Archive::new(metric);
        for e in entries {
            let state = archive.verifier.spawn(&e.task, e.seed)?;
            if !archive.verifier.execute(&state, &e.trajectory).verified_success {
                return Err(ArchiveError::Unverified {
                    task: e.task,
                    seed: e.seed,
                });
            }
            archive.counter = archive.counter.max(e.inserted_at);
            let features = Arc::new(archive.metric.embed(&e.observation));
            let list = archive.tasks.entry(e.task.clone()).or_default();
            list.retain(|s| s.entry.seed != e.seed);
            list.push(Stored {
                entry: Arc::new(e),
                features,
            });
        }
        Ok(archive)
    }
}
