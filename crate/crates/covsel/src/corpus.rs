//! Summary generation over a test corpus, and the on-disk summary
//! store.
//!
//! `summarize_corpus` instruments the canonical solution once, runs
//! every test (in parallel when enabled), and produces one payload per
//! (measure, test). The store lays summaries out as
//! `<measure>/<test_id>.json` next to a `summaries.json` index that
//! records each test's run status; tests on which the canonical
//! solution faulted stay in the index but are excluded from selection.
//! Writes are deterministic: re-running produces byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::Program;
use crate::instrument::{instrument, InstrumentError};
use crate::interp::{execute, ExecError, ProgramRef, TestInput};
use crate::measures::SummaryBundle;
use crate::parallel::par_map;
use crate::summary::{MeasureKind, Payload};

pub const INDEX_FILE: &str = "summaries.json";

/// Default interpreter step budget per test.
pub const DEFAULT_STEP_LIMIT: u64 = 100_000_000;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Instrument(#[from] InstrumentError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("no tests provided")]
    NoTests,
    #[error("duplicate test id `{0}`")]
    DuplicateTestId(String),
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("failed to {action} `{path}`: {source}")]
    Io {
        action: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed JSON in `{path}`: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("payload in `{path}` does not match its measure schema: {source}")]
    Payload {
        path: PathBuf,
        source: crate::summary::PayloadError,
    },
}

/// Per-test record in the index file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestRecord {
    pub id: String,
    /// `ok`, or the fault kind that excluded the test.
    pub status: String,
    pub included: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub program: String,
    pub measures: Vec<MeasureKind>,
    pub step_limit: u64,
    pub tests: Vec<TestRecord>,
}

/// In-memory result of summarizing one corpus.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub index: CorpusIndex,
    /// One bundle per test, in index order (excluded tests included,
    /// with whatever partial coverage the run produced).
    pub bundles: Vec<SummaryBundle>,
}

impl Corpus {
    /// Bundles usable for selection, with their test ids.
    pub fn included_bundles(&self) -> Vec<SummaryBundle> {
        self.index
            .tests
            .iter()
            .zip(&self.bundles)
            .filter(|(record, _)| record.included)
            .map(|(_, bundle)| bundle.clone())
            .collect()
    }
}

/// Instrument `program` once and run every test, building one payload
/// per (measure, test).
pub fn summarize_corpus(
    program: &Program,
    tests: &[TestInput],
    kinds: &[MeasureKind],
    step_limit: u64,
) -> Result<Corpus, CorpusError> {
    if tests.is_empty() {
        return Err(CorpusError::NoTests);
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for test in tests {
            if !seen.insert(&test.id) {
                return Err(CorpusError::DuplicateTestId(test.id.clone()));
            }
        }
    }
    let instrumented = instrument(program)?;

    let runs = par_map(tests, |test| {
        let mut builders: Vec<_> = kinds.iter().map(|&k| crate::summary::builder_for(k)).collect();
        execute(
            ProgramRef::Instrumented(&instrumented),
            test,
            &mut builders,
            step_limit,
        )
    });

    let mut records = Vec::with_capacity(tests.len());
    let mut bundles = Vec::with_capacity(tests.len());
    for (test, run) in tests.iter().zip(runs) {
        let (result, summaries) = run?;
        let payloads: BTreeMap<MeasureKind, Payload> = summaries
            .into_iter()
            .map(|s| (s.measure, s.payload))
            .collect();
        records.push(TestRecord {
            id: test.id.clone(),
            status: result.status.label().to_string(),
            included: result.status.is_ok(),
        });
        bundles.push(SummaryBundle {
            test_id: test.id.clone(),
            payloads,
        });
    }

    Ok(Corpus {
        index: CorpusIndex {
            program: program.source_name.clone(),
            measures: kinds.to_vec(),
            step_limit,
            tests: records,
        },
        bundles,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| StoreError::Io {
        action: "write",
        path: path.to_path_buf(),
        source,
    })
}

/// Write the summary store: `<measure>/<test_id>.json` payload files
/// plus the index.
pub fn write_store(dir: &Path, corpus: &Corpus) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        action: "create",
        path: dir.to_path_buf(),
        source,
    })?;
    for kind in &corpus.index.measures {
        let measure_dir = dir.join(kind.name());
        fs::create_dir_all(&measure_dir).map_err(|source| StoreError::Io {
            action: "create",
            path: measure_dir.clone(),
            source,
        })?;
        for bundle in &corpus.bundles {
            let payload = &bundle.payloads[kind];
            let path = measure_dir.join(format!("{}.json", bundle.test_id));
            write_json(&path, &payload.to_json())?;
        }
    }
    let index =
        serde_json::to_value(&corpus.index).expect("index serializes");
    write_json(&dir.join(INDEX_FILE), &index)
}

fn read_json(path: &Path) -> Result<serde_json::Value, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Load a summary store written by [`write_store`].
pub fn load_store(dir: &Path) -> Result<Corpus, StoreError> {
    let index_value = read_json(&dir.join(INDEX_FILE))?;
    let index: CorpusIndex =
        serde_json::from_value(index_value).map_err(|source| StoreError::Json {
            path: dir.join(INDEX_FILE),
            source,
        })?;
    let mut bundles = Vec::with_capacity(index.tests.len());
    for record in &index.tests {
        let mut payloads = BTreeMap::new();
        for kind in &index.measures {
            let path = dir.join(kind.name()).join(format!("{}.json", record.id));
            let value = read_json(&path)?;
            let payload = Payload::from_json(*kind, &value)
                .map_err(|source| StoreError::Payload { path, source })?;
            payloads.insert(*kind, payload);
        }
        bundles.push(SummaryBundle {
            test_id: record.id.clone(),
            payloads,
        });
    }
    Ok(Corpus { index, bundles })
}

/// Load test inputs from a directory of `<id>.json` files, sorted by
/// id for a deterministic order.
pub fn load_tests(dir: &Path) -> Result<Vec<TestInput>, StoreError> {
    let entries = fs::read_dir(dir).map_err(|source| StoreError::Io {
        action: "read",
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "json").unwrap_or(false))
        .collect();
    paths.sort();
    let mut tests = Vec::with_capacity(paths.len());
    for path in paths {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let value = read_json(&path)?;
        let bindings = serde_json::from_value(value).map_err(|source| StoreError::Json {
            path: path.clone(),
            source,
        })?;
        tests.push(TestInput { id, bindings });
    }
    Ok(tests)
}

/// Write test inputs as `<id>.json` files.
pub fn write_tests(dir: &Path, tests: &[TestInput]) -> Result<(), StoreError> {
    fs::create_dir_all(dir).map_err(|source| StoreError::Io {
        action: "create",
        path: dir.to_path_buf(),
        source,
    })?;
    for test in tests {
        let path = dir.join(format!("{}.json", test.id));
        let value = serde_json::to_value(&test.bindings).expect("bindings serialize");
        write_json(&path, &value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::InputValue;
    use crate::parser::parse;

    fn while_example() -> Program {
        parse("input x;\ninput a[];\nwhile ((x--) > 0) { aux = a[0]; a[0] = aux + x; }").unwrap()
    }

    fn input_x(id: &str, x: i64) -> TestInput {
        TestInput {
            id: id.into(),
            bindings: BTreeMap::from([
                ("x".to_string(), InputValue::Int(x)),
                ("a".to_string(), InputValue::Array(vec![0])),
            ]),
        }
    }

    #[test]
    fn one_file_per_measure_and_test() {
        let corpus = summarize_corpus(
            &while_example(),
            &[input_x("t1", 4)],
            &[MeasureKind::Block, MeasureKind::Loop],
            10_000,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_store(dir.path(), &corpus).unwrap();
        assert!(dir.path().join("block/t1.json").exists());
        assert!(dir.path().join("loop/t1.json").exists());
        assert!(dir.path().join(INDEX_FILE).exists());
        let loaded = load_store(dir.path()).unwrap();
        assert_eq!(loaded.bundles, corpus.bundles);
    }

    #[test]
    fn paper_corpus_loop_summaries() {
        // x in {0, 4}: loop summaries {"0": 1} and {"4": 1}
        let corpus = summarize_corpus(
            &while_example(),
            &[input_x("x0", 0), input_x("x4", 4)],
            &[MeasureKind::Loop],
            10_000,
        )
        .unwrap();
        let zero = &corpus.bundles[0].payloads[&MeasureKind::Loop];
        let four = &corpus.bundles[1].payloads[&MeasureKind::Loop];
        assert_eq!(
            zero.to_json(),
            serde_json::json!({"1": {"0": 1}})
        );
        assert_eq!(
            four.to_json(),
            serde_json::json!({"1": {"4": 1}})
        );
    }

    #[test]
    fn rerun_is_byte_identical() {
        let tests = vec![input_x("t1", 4), input_x("t2", 0)];
        let kinds = MeasureKind::ALL;
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for dir in [&dir_a, &dir_b] {
            let corpus =
                summarize_corpus(&while_example(), &tests, &kinds, 10_000).unwrap();
            write_store(dir.path(), &corpus).unwrap();
        }
        for kind in kinds {
            for test in ["t1", "t2"] {
                let rel = format!("{}/{}.json", kind.name(), test);
                let a = fs::read(dir_a.path().join(&rel)).unwrap();
                let b = fs::read(dir_b.path().join(&rel)).unwrap();
                assert_eq!(a, b, "{rel} differs between runs");
            }
        }
        let a = fs::read(dir_a.path().join(INDEX_FILE)).unwrap();
        let b = fs::read(dir_b.path().join(INDEX_FILE)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn faulting_test_is_excluded_with_partial_coverage() {
        // x = 2 reads a[0] out of bounds on an empty array after two
        // healthy iterations of nothing: make the fault immediate
        let program = parse(
            "input x;\ninput a[];\nwhile (x > 0) { y = a[x]; x = x - 1; }\nprint(x);",
        )
        .unwrap();
        let bad = TestInput {
            id: "bad".into(),
            bindings: BTreeMap::from([
                ("x".to_string(), InputValue::Int(3)),
                ("a".to_string(), InputValue::Array(vec![5])),
            ]),
        };
        let good = TestInput {
            id: "good".into(),
            bindings: BTreeMap::from([
                ("x".to_string(), InputValue::Int(0)),
                ("a".to_string(), InputValue::Array(vec![5])),
            ]),
        };
        let corpus = summarize_corpus(
            &program,
            &[bad, good],
            &[MeasureKind::Block],
            10_000,
        )
        .unwrap();
        assert_eq!(corpus.index.tests[0].status, "oob_read");
        assert!(!corpus.index.tests[0].included);
        assert!(corpus.index.tests[1].included);
        // partial coverage before the fault is kept
        assert_eq!(
            corpus.bundles[0].payloads[&MeasureKind::Block]
                .to_json()
                .as_object()
                .unwrap()
                .len(),
            1
        );
        let included = corpus.included_bundles();
        assert_eq!(included.len(), 1);
        assert_eq!(included[0].test_id, "good");
    }

    #[test]
    fn duplicate_test_ids_rejected() {
        let err = summarize_corpus(
            &while_example(),
            &[input_x("t", 1), input_x("t", 2)],
            &[MeasureKind::Block],
            10_000,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateTestId(_)));
    }
}
