//! Corpora, query sets and their on-disk formats.
//!
//! Passages are the retrieval unit. Multi-hop QA dumps (HotpotQA and
//! 2WikiMultiHopQA distractor layout) are flattened so that every
//! `(record, context title)` pair becomes one passage, deduplicated across
//! records on `(title, text)`.

mod synthetic;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub use synthetic::{generate_synthetic, SyntheticParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub question: String,
    pub gold_ids: BTreeSet<String>,
}

/// An ordered, immutable passage collection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    passages: Vec<Passage>,
    index_of: HashMap<String, u32>,
}

impl Corpus {
    /// Builds a corpus, rejecting empty or duplicate ids and empty text.
    pub fn new(passages: Vec<Passage>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for p in passages {
            corpus.push(p)?;
        }
        Ok(corpus)
    }

    fn push(&mut self, mut passage: Passage) -> Result<u32> {
        passage.text = normalize_text(&passage.text);
        passage.title = normalize_text(&passage.title);
        if passage.id.is_empty() {
            return Err(Error::param("passage id must be nonempty"));
        }
        if passage.text.is_empty() {
            return Err(Error::param(format!(
                "passage {} has empty text after normalization",
                passage.id
            )));
        }
        if self.index_of.contains_key(&passage.id) {
            return Err(Error::param(format!("duplicate passage id {}", passage.id)));
        }
        let ordinal = self.passages.len() as u32;
        self.index_of.insert(passage.id.clone(), ordinal);
        self.passages.push(passage);
        Ok(ordinal)
    }

    pub fn len(&self) -> usize {
        self.passages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn get(&self, ordinal: u32) -> Option<&Passage> {
        self.passages.get(ordinal as usize)
    }

    pub fn ordinal(&self, id: &str) -> Option<u32> {
        self.index_of.get(id).copied()
    }

    pub fn id(&self, ordinal: u32) -> &str {
        &self.passages[ordinal as usize].id
    }

    /// Takes the first `n` passages, dropping queries whose gold set is not
    /// fully contained in the slice.
    pub fn slice(&self, n: usize, queries: &[Query]) -> (Corpus, Vec<Query>) {
        let passages = self.passages[..n.min(self.len())].to_vec();
        let corpus = Corpus::new(passages).expect("prefix of a valid corpus is valid");
        let queries = queries
            .iter()
            .filter(|q| q.gold_ids.iter().all(|g| corpus.ordinal(g).is_some()))
            .cloned()
            .collect();
        (corpus, queries)
    }
}

/// Collapses whitespace runs to one space and trims. Case is preserved.
pub fn normalize_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    HotpotJson,
    Wiki2Json,
    GenericJsonl,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hotpot_json" => Ok(DatasetFormat::HotpotJson),
            "wiki2_json" => Ok(DatasetFormat::Wiki2Json),
            "generic_jsonl" => Ok(DatasetFormat::GenericJsonl),
            other => Err(Error::param(format!("unknown dataset format {other}"))),
        }
    }
}

/// Non-fatal conditions met while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Supporting-fact titles that had no matching context passage.
    pub missing_support_titles: usize,
    /// Queries left with no gold passage.
    pub empty_gold_queries: usize,
    /// Context passages merged into an earlier identical `(title, text)`.
    pub merged_duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub corpus: Corpus,
    pub queries: Vec<Query>,
    pub report: LoadReport,
}

pub fn load_corpus(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    match format {
        DatasetFormat::HotpotJson | DatasetFormat::Wiki2Json => load_multihop_json(path),
        DatasetFormat::GenericJsonl => load_generic_jsonl(path),
    }
}

#[derive(Deserialize)]
struct MultiHopRecord {
    #[serde(alias = "id")]
    _id: String,
    question: String,
    context: Vec<(String, Vec<String>)>,
    #[serde(default)]
    supporting_facts: Vec<(String, Value)>,
}

fn load_multihop_json(path: &Path) -> Result<Dataset> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<Value> = serde_json::from_str(&raw).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        record: 0,
        message: format!("expected a JSON array of records: {e}"),
    })?;

    let mut corpus = Corpus::default();
    let mut by_content: HashMap<(String, String), u32> = HashMap::new();
    let mut queries = Vec::with_capacity(records.len());
    let mut report = LoadReport::default();

    for (i, value) in records.into_iter().enumerate() {
        let record: MultiHopRecord = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            record: i,
            message: e.to_string(),
        })?;

        let mut title_to_ids: HashMap<String, Vec<u32>> = HashMap::new();
        for (title, sentences) in &record.context {
            let title = normalize_text(title);
            let text = normalize_text(&sentences.join(" "));
            if text.is_empty() {
                continue;
            }
            let key = (title.clone(), text.clone());
            let ordinal = match by_content.get(&key) {
                Some(&o) => {
                    report.merged_duplicates += 1;
                    o
                }
                None => {
                    let mut id = format!("{}::{}", record._id, title);
                    let mut n = 2;
                    while corpus.ordinal(&id).is_some() {
                        id = format!("{}::{}#{}", record._id, title, n);
                        n += 1;
                    }
                    let o = corpus.push(Passage {
                        id,
                        title: title.clone(),
                        text,
                    })?;
                    by_content.insert(key, o);
                    o
                }
            };
            title_to_ids.entry(title).or_default().push(ordinal);
        }

        let mut gold_ids = BTreeSet::new();
        let mut seen_titles = BTreeSet::new();
        for (title, _) in &record.supporting_facts {
            let title = normalize_text(title);
            if !seen_titles.insert(title.clone()) {
                continue;
            }
            match title_to_ids.get(&title) {
                Some(ids) => gold_ids.extend(ids.iter().map(|&o| corpus.id(o).to_string())),
                None => report.missing_support_titles += 1,
            }
        }
        if gold_ids.is_empty() {
            report.empty_gold_queries += 1;
        }
        queries.push(Query {
            id: record._id,
            question: normalize_text(&record.question),
            gold_ids,
        });
    }

    Ok(Dataset {
        corpus,
        queries,
        report,
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PassageLine {
    id: String,
    title: String,
    text: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct QueryLine {
    id: String,
    question: String,
    #[serde(default)]
    gold_ids: Vec<String>,
}

/// Reads `{"id","title","text"}` and `{"id","question","gold_ids"}` lines.
/// Both kinds may share a file; gold ids must name passages in it.
fn load_generic_jsonl(path: &Path) -> Result<Dataset> {
    let mut passages = Vec::new();
    let mut pending_queries = Vec::new();
    for_each_json_line(path, |line_no, value| {
        if value.get("question").is_some() {
            let q: QueryLine = parse_line(path, line_no, value)?;
            pending_queries.push((line_no, q));
        } else {
            let p: PassageLine = parse_line(path, line_no, value)?;
            passages.push((line_no, p));
        }
        Ok(())
    })?;

    let mut corpus = Corpus::default();
    for (line_no, p) in passages {
        corpus
            .push(Passage {
                id: p.id,
                title: p.title,
                text: p.text,
            })
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                record: line_no,
                message: e.to_string(),
            })?;
    }
    let mut report = LoadReport::default();
    let queries = resolve_queries(path, &corpus, pending_queries, &mut report)?;
    Ok(Dataset {
        corpus,
        queries,
        report,
    })
}

/// Loads a query-only JSONL file against an existing corpus.
pub fn load_queries_jsonl(path: &Path, corpus: &Corpus) -> Result<(Vec<Query>, LoadReport)> {
    let mut pending = Vec::new();
    for_each_json_line(path, |line_no, value| {
        pending.push((line_no, parse_line(path, line_no, value)?));
        Ok(())
    })?;
    let mut report = LoadReport::default();
    let queries = resolve_queries(path, corpus, pending, &mut report)?;
    Ok((queries, report))
}

fn resolve_queries(
    path: &Path,
    corpus: &Corpus,
    pending: Vec<(usize, QueryLine)>,
    report: &mut LoadReport,
) -> Result<Vec<Query>> {
    let mut out = Vec::with_capacity(pending.len());
    for (line_no, q) in pending {
        if let Some(missing) = q.gold_ids.iter().find(|g| corpus.ordinal(g).is_none()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                record: line_no,
                message: format!("gold id {missing} is not a corpus passage"),
            });
        }
        if q.gold_ids.is_empty() {
            report.empty_gold_queries += 1;
        }
        out.push(Query {
            id: q.id,
            question: normalize_text(&q.question),
            gold_ids: q.gold_ids.into_iter().collect(),
        });
    }
    Ok(out)
}

/// Calls `f(line_number, value)` for each non-blank line (1-based numbers).
pub(crate) fn for_each_json_line<F>(path: &Path, mut f: F) -> Result<()>
where
    F: FnMut(usize, Value) -> Result<()>,
{
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            record: i + 1,
            message: e.to_string(),
        })?;
        f(i + 1, value)?;
    }
    Ok(())
}

pub(crate) fn parse_line<T: serde::de::DeserializeOwned>(
    path: &Path,
    line_no: usize,
    value: Value,
) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        record: line_no,
        message: e.to_string(),
    })
}

/// Writes passages then queries in the generic JSONL schema.
pub fn write_generic_jsonl(path: &Path, corpus: &Corpus, queries: &[Query]) -> Result<()> {
    let mut buf = Vec::new();
    write_generic_jsonl_to(&mut buf, corpus, queries).expect("writing to a Vec cannot fail");
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_generic_jsonl_to<W: Write>(
    mut w: W,
    corpus: &Corpus,
    queries: &[Query],
) -> std::io::Result<()> {
    for p in corpus.passages() {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    for q in queries {
        serde_json::to_writer(&mut w, q)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Per-passage entity lists produced by an external NER system.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntitiesLine {
    id: String,
    entities: Vec<String>,
}

/// Reads `{"id","entities"}` lines into id → surface strings.
pub fn load_external_entities(path: &Path) -> Result<HashMap<String, Vec<String>>> {
    let mut out = HashMap::new();
    for_each_json_line(path, |line_no, value| {
        let line: EntitiesLine = parse_line(path, line_no, value)?;
        out.insert(line.id, line.entities);
        Ok(())
    })?;
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_hotpot_record() {
        let f = write_tmp(
            r#"[{"_id":"q1","question":"Where?","context":[["A",["s1","s2"]]],"supporting_facts":[["A",0]]}]"#,
        );
        let ds = load_corpus(f.path(), DatasetFormat::HotpotJson).unwrap();
        assert_eq!(ds.corpus.len(), 1);
        let p = &ds.corpus.passages()[0];
        assert_eq!(p.id, "q1::A");
        assert_eq!(p.text, "s1 s2");
        assert_eq!(ds.queries.len(), 1);
        assert_eq!(
            ds.queries[0].gold_ids,
            BTreeSet::from(["q1::A".to_string()])
        );
    }

    #[test]
    fn duplicate_context_merges_first_wins() {
        let f = write_tmp(
            r#"[
            {"_id":"q1","question":"a","context":[["A",["x"]],["B",["y"]]],"supporting_facts":[["A",0]]},
            {"_id":"q2","question":"b","context":[["A",["x"]],["A",["other text"]]],"supporting_facts":[["A",0]]}
            ]"#,
        );
        let ds = load_corpus(f.path(), DatasetFormat::Wiki2Json).unwrap();
        let ids: Vec<_> = ds.corpus.passages().iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, vec!["q1::A", "q1::B", "q2::A"]);
        assert_eq!(ds.report.merged_duplicates, 1);
        assert_eq!(
            ds.queries[1].gold_ids,
            BTreeSet::from(["q1::A".to_string(), "q2::A".to_string()])
        );
    }

    #[test]
    fn missing_support_title_is_counted() {
        let f = write_tmp(
            r#"[{"_id":"q1","question":"?","context":[["A",["s"]]],"supporting_facts":[["Z",0],["A",0]]}]"#,
        );
        let ds = load_corpus(f.path(), DatasetFormat::HotpotJson).unwrap();
        assert_eq!(ds.report.missing_support_titles, 1);
        assert_eq!(ds.queries[0].gold_ids.len(), 1);
    }

    #[test]
    fn malformed_record_names_index() {
        let f = write_tmp(r#"[{"_id":"q1","question":"?","context":[]},{"_id":"q2"}]"#);
        let err = load_corpus(f.path(), DatasetFormat::HotpotJson).unwrap_err();
        match err {
            Error::Parse { record, .. } => assert_eq!(record, 1),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn generic_jsonl_mixed_file() {
        let f = write_tmp(
            "{\"id\":\"p1\",\"title\":\"T\",\"text\":\"  hello   world \"}\n\n{\"id\":\"q\",\"question\":\"hi\",\"gold_ids\":[\"p1\"]}\n",
        );
        let ds = load_corpus(f.path(), DatasetFormat::GenericJsonl).unwrap();
        assert_eq!(ds.corpus.passages()[0].text, "hello world");
        assert_eq!(ds.queries[0].gold_ids.len(), 1);
    }

    #[test]
    fn generic_jsonl_unknown_gold_is_error_with_line() {
        let f = write_tmp(
            "{\"id\":\"p1\",\"title\":\"T\",\"text\":\"x\"}\n{\"id\":\"q\",\"question\":\"hi\",\"gold_ids\":[\"nope\"]}\n",
        );
        match load_corpus(f.path(), DatasetFormat::GenericJsonl).unwrap_err() {
            Error::Parse { record, .. } => assert_eq!(record, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn empty_text_rejected() {
        assert!(Corpus::new(vec![Passage {
            id: "a".into(),
            title: "t".into(),
            text: "   ".into()
        }])
        .is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_text("  A \t b\n\nC "), "A b C");
        assert_eq!(normalize_text(""), "");
    }

    proptest::proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,40}") {
            let once = normalize_text(&s);
            proptest::prop_assert_eq!(normalize_text(&once), once);
        }
    }
}
