#![allow(dead_code)]

use std::path::{Path, PathBuf};

use sofos::ntriples::format_triple;
use sofos_core::fixture::{fix_pop_triples, FIX_POP_FACET};

pub struct Files {
    pub dir: tempfile::TempDir,
    pub graph: PathBuf,
    pub facet: PathBuf,
}

impl Files {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

pub fn fixture_nt() -> String {
    fix_pop_triples()
        .iter()
        .map(|(s, p, o)| format_triple(s, p, o) + "\n")
        .collect()
}

/// The population fixture and its facet written to a temp dir.
pub fn fixture_files() -> Files {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("fix.nt");
    let facet = dir.path().join("f.sparql");
    std::fs::write(&graph, fixture_nt()).unwrap();
    std::fs::write(&facet, FIX_POP_FACET).unwrap();
    Files { dir, graph, facet }
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}
