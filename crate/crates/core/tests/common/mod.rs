#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use kwrank::pipeline::{ConfigOverrides, PipelineConfig};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures().join(name)
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A scratch copy of the fixture tree, so runs never write into the sources.
pub fn scratch_fixtures() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_tree(&fixtures(), dir.path());
    dir
}

pub fn config(dir: &Path, name: &str) -> PipelineConfig {
    ConfigOverrides::load(&dir.join(name))
        .unwrap()
        .finish()
        .unwrap()
}
