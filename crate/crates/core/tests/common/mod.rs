#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mmtss::io::{Range, SimulationManifest};
use mmtss::room::synth::{write_synthetic_corpus, CorpusSpec};

/// Small synthetic corpus under `dir` with short utterances, and a
/// manifest whose audio paths are absolute.
pub fn small_manifest(dir: &Path, count: usize, seconds: (f64, f64)) -> SimulationManifest {
    let spec = CorpusSpec {
        seed: 3,
        sources: 8,
        noises: 2,
        min_seconds: seconds.0,
        max_seconds: seconds.1,
        noise_seconds: seconds.1 + 1.0,
        ..CorpusSpec::default()
    };
    let mut m = write_synthetic_corpus(dir, &spec, count).unwrap();
    m.resolve_paths(dir);
    m
}

/// Keeps RIRs short so debug-profile tests stay quick.
pub fn fast(mut m: SimulationManifest) -> SimulationManifest {
    m.t60 = Range::new(0.1, 0.3);
    m.max_image_order = 6;
    m
}

/// Every file below `root`, relative, sorted, with contents.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
