//! Directory polling for frames dropped by a camera uploader.
//!
//! A file is handed out once its size has been observed unchanged on two
//! consecutive polls, and never again under the same name.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

const FRAME_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "pgm"];

pub fn is_frame_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| FRAME_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

#[derive(Debug, Default)]
pub struct DirPoller {
    dir: PathBuf,
    last_size: HashMap<String, u64>,
    done: HashSet<String>,
}

impl DirPoller {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            ..Default::default()
        }
    }

    /// Files that became stable since the previous poll, in name order.
    pub fn poll(&mut self) -> io::Result<Vec<PathBuf>> {
        let mut current = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let path = entry.path();
            if !is_frame_file(&path) {
                continue;
            }
            let Ok(meta) = entry.metadata() else { continue };
            if !meta.is_file() {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            if !self.done.contains(&name) {
                current.push((name, meta.len()));
            }
        }
        current.sort();

        let mut ready = Vec::new();
        let mut sizes = HashMap::with_capacity(current.len());
        for (name, size) in current {
            if self.last_size.get(&name) == Some(&size) {
                self.done.insert(name.clone());
                ready.push(self.dir.join(&name));
            } else {
                sizes.insert(name, size);
            }
        }
        self.last_size = sizes;
        Ok(ready)
    }

    pub fn processed(&self) -> usize {
        self.done.len()
    }
}
