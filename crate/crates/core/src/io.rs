//! Plain-text file formats.
//!
//! Matrices are a `rows cols` header followed by whitespace-separated
//! rows. Lines starting with `#` are comments everywhere. Numbers are
//! written in the shortest form that parses back to the same `f64`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::metrics::EvalResult;
use crate::model::{LabelSpace, ModelParams};
use crate::scoring::{prediction_from_scores, Prediction};
use crate::similarity::{HierarchyGraph, HitCounts, SimilarityMatrix};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Largest `|UᵀU − I|` entry accepted when loading a model.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-8;

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest round-trip decimal, switching to exponent form for very large
/// or very small magnitudes.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn parse_value(token: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(path, line, format!("'{token}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value '{token}'")));
    }
    Ok(v)
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim_start();
            !t.is_empty() && !t.starts_with('#')
        })
}

pub fn format_matrix(m: &Array2<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.outer_iter() {
        let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out += &cells.join(" ");
        out.push('\n');
    }
    out
}

fn parse_matrix_lines<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    path: &Path,
    header_line_hint: usize,
) -> Result<Array2<f64>> {
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, header_line_hint, "missing 'rows cols' header"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| parse_err(path, hl, format!("header expects 'rows cols', got '{}'", header.trim())))
    };
    if dims.len() != 2 {
        return Err(parse_err(path, hl, format!("header expects 'rows cols', got '{}'", header.trim())));
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut data = Vec::with_capacity(rows * cols);
    let mut last = hl;
    for r in 0..rows {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, last, format!("expected {rows} rows, found {r}")))?;
        last = ln;
        let before = data.len();
        for token in line.split_whitespace() {
            data.push(parse_value(token, path, ln)?);
        }
        let got = data.len() - before;
        if got != cols {
            return Err(parse_err(path, ln, format!("expected {cols} values, found {got}")));
        }
    }
    Ok(Array2::from_shape_vec((rows, cols), data).expect("row lengths checked"))
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Array2<f64>> {
    let mut lines = content_lines(text);
    let m = parse_matrix_lines(&mut lines, path, 1)?;
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(path, ln, format!("unexpected data after {} rows", m.nrows())));
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    parse_matrix(&read_text(path)?, path)
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    write_text(path, &format_matrix(m))
}

/// Word-vector text layout: `name v1 … vm` per line.
pub fn parse_embeddings(text: &str, path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut names = Vec::new();
    let mut seen = HashSet::new();
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    for (ln, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        let name = tokens.next().expect("content lines are non-blank");
        let before = data.len();
        for t in tokens {
            data.push(parse_value(t, path, ln)?);
        }
        let got = data.len() - before;
        if got == 0 {
            return Err(parse_err(path, ln, format!("label '{name}' has no embedding values")));
        }
        match dim {
            None => dim = Some(got),
            Some(m) if m != got => {
                return Err(parse_err(path, ln, format!("label '{name}' has {got} values, expected {m}")));
            }
            _ => {}
        }
        if !seen.insert(name.to_owned()) {
            return Err(parse_err(path, ln, format!("duplicate label '{name}'")));
        }
        names.push(name.to_owned());
    }
    let m = dim.ok_or_else(|| parse_err(path, 1, "no embeddings found"))?;
    let matrix = Array2::from_shape_vec((names.len(), m), data).expect("row lengths checked");
    Ok((names, matrix))
}

pub fn read_embeddings(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    parse_embeddings(&read_text(path)?, path)
}

pub fn format_embeddings(names: &[String], m: &Array2<f64>) -> String {
    let mut out = String::new();
    for (name, row) in names.iter().zip(m.outer_iter()) {
        out += name;
        for &v in row {
            out.push(' ');
            out += &format_value(v);
        }
        out.push('\n');
    }
    out
}

/// Label space from an embedding file whose first `seen_count` lines are
/// the seen labels. Embeddings are row-normalized.
pub fn read_label_space(path: &Path, seen_count: usize) -> Result<LabelSpace> {
    let (names, m) = read_embeddings(path)?;
    if seen_count == 0 || seen_count > names.len() {
        return Err(Error::Config(format!(
            "seen count {seen_count} is outside 1..={} for {}",
            names.len(),
            path.display()
        )));
    }
    Ok(LabelSpace::new(names, seen_count, m).normalized())
}

/// One label name per line.
pub fn parse_label_names(text: &str, path: &Path) -> Result<Vec<String>> {
    let mut seen = HashSet::new();
    let mut names = Vec::new();
    for (ln, line) in content_lines(text) {
        let name = line.trim().to_owned();
        if !seen.insert(name.clone()) {
            return Err(parse_err(path, ln, format!("duplicate label '{name}'")));
        }
        names.push(name);
    }
    Ok(names)
}

pub fn read_label_names(path: &Path) -> Result<Vec<String>> {
    parse_label_names(&read_text(path)?, path)
}

/// `child<TAB>parent` edges; `=<TAB>label<TAB>node` maps a label name
/// onto a hierarchy node.
pub fn parse_hierarchy(text: &str, path: &Path) -> Result<HierarchyGraph> {
    let mut graph = HierarchyGraph::new();
    for (ln, line) in content_lines(text) {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match fields.as_slice() {
            ["=", label, node] if !label.is_empty() && !node.is_empty() => graph.add_synonym(label, node),
            [child, parent] if !child.is_empty() && !parent.is_empty() => graph.add_edge(child, parent),
            _ => {
                return Err(parse_err(
                    path,
                    ln,
                    "expected 'child<TAB>parent' or '=<TAB>label<TAB>node'",
                ))
            }
        }
    }
    Ok(graph)
}

pub fn read_hierarchy(path: &Path) -> Result<HierarchyGraph> {
    parse_hierarchy(&read_text(path)?, path)
}

/// `label<TAB>count` singles and `label<TAB>label<TAB>count` pairs.
pub fn parse_counts(text: &str, path: &Path) -> Result<HitCounts> {
    let mut counts = HitCounts::new();
    for (ln, line) in content_lines(text) {
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let result = match fields.as_slice() {
            [label, c] => counts.set_single(label, parse_value(c, path, ln)?),
            [a, b, c] => counts.set_pair(a, b, parse_value(c, path, ln)?),
            _ => return Err(parse_err(path, ln, "expected 'label<TAB>count' or 'label<TAB>label<TAB>count'")),
        };
        result.map_err(|e| parse_err(path, ln, e.to_string()))?;
    }
    Ok(counts)
}

pub fn read_counts(path: &Path) -> Result<HitCounts> {
    parse_counts(&read_text(path)?, path)
}

const LABELS_HEADER: &str = "# labels:";

/// Similarity matrix with its label names in a tab-separated comment
/// header.
pub fn format_similarity(sim: &SimilarityMatrix) -> String {
    let mut out = String::from(LABELS_HEADER);
    for name in &sim.names {
        out.push('\t');
        out += name;
    }
    out.push('\n');
    out + &format_matrix(&sim.values)
}

pub fn parse_similarity(text: &str, path: &Path) -> Result<SimilarityMatrix> {
    let values = parse_matrix(text, path)?;
    let names: Vec<String> = text
        .lines()
        .find_map(|l| l.strip_prefix(LABELS_HEADER))
        .map(|rest| rest.split('\t').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
        .unwrap_or_default();
    if values.nrows() != values.ncols() {
        return Err(parse_err(path, 1, format!("similarity matrix must be square, got {:?}", values.dim())));
    }
    if !names.is_empty() && names.len() != values.nrows() {
        return Err(parse_err(
            path,
            1,
            format!("{} label names for a {}×{} matrix", names.len(), values.nrows(), values.ncols()),
        ));
    }
    Ok(SimilarityMatrix { names, values })
}

pub fn read_similarity(path: &Path) -> Result<SimilarityMatrix> {
    parse_similarity(&read_text(path)?, path)
}

/// Checks a loaded similarity against the label order. A file without a
/// name header is taken to be in label order already.
pub fn align_similarity(sim: SimilarityMatrix, labels: &LabelSpace) -> Result<SimilarityMatrix> {
    if sim.values.nrows() != labels.len() {
        return Err(Error::shape("similarity matrix", (labels.len(), labels.len()), sim.values.dim()));
    }
    if sim.names.is_empty() {
        return Ok(SimilarityMatrix {
            names: labels.names.clone(),
            values: sim.values,
        });
    }
    if sim.names != labels.names {
        return Err(Error::Config("similarity label names do not match the embedding labels in order".into()));
    }
    Ok(sim)
}

/// A trained model with the label space it scores.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub params: ModelParams,
    pub labels: LabelSpace,
}

pub fn format_model(model: &SavedModel) -> String {
    let p = &model.params;
    let l = &model.labels;
    let mut out = String::from("[meta]\n");
    let _ = writeln!(out, "format_version = {MODEL_FORMAT_VERSION}");
    let _ = writeln!(out, "beta = {}", format_value(p.beta));
    let _ = writeln!(out, "gamma = {}", format_value(p.gamma));
    let _ = writeln!(out, "lambda = {}", format_value(p.lambda));
    let _ = writeln!(out, "r = {}", p.r);
    let _ = writeln!(out, "d = {}", p.d());
    let _ = writeln!(out, "m = {}", p.m());
    let _ = writeln!(out, "seen_count = {}", l.seen_count);
    let _ = writeln!(out, "unseen_count = {}", l.unseen_count());
    let _ = writeln!(out, "normalized = {}", l.normalized);
    let _ = writeln!(out, "labels = {}", l.names.join(" "));
    out += "[W]\n";
    out += &format_matrix(&p.w);
    out += "[W0]\n";
    out += &format_matrix(&p.w0.clone().insert_axis(ndarray::Axis(0)));
    out += "[U]\n";
    out += &format_matrix(&p.u);
    out += "[M]\n";
    out += &format_matrix(&l.embeddings);
    out
}

pub fn parse_model(text: &str, path: &Path) -> Result<SavedModel> {
    let mut sections: Vec<(String, usize, Vec<(usize, &str)>)> = Vec::new();
    for (ln, line) in content_lines(text) {
        let t = line.trim();
        if t.starts_with('[') && t.ends_with(']') {
            sections.push((t[1..t.len() - 1].to_owned(), ln, Vec::new()));
        } else if let Some(last) = sections.last_mut() {
            last.2.push((ln, line));
        } else {
            return Err(parse_err(path, ln, "content before the first [section]"));
        }
    }
    let find = |name: &str| {
        sections
            .iter()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| parse_err(path, 1, format!("missing [{name}] section")))
    };

    let (_, _, meta_lines) = find("meta")?;
    let mut meta = std::collections::HashMap::new();
    for &(ln, line) in meta_lines {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(path, ln, "expected 'key = value'"))?;
        meta.insert(k.trim().to_owned(), (ln, v.trim().to_owned()));
    }
    let get = |key: &str| meta.get(key).ok_or_else(|| parse_err(path, 1, format!("[meta] lacks '{key}'")));
    let num = |key: &str| -> Result<f64> {
        let (ln, v) = get(key)?;
        parse_value(v, path, *ln)
    };
    let int = |key: &str| -> Result<usize> {
        let (ln, v) = get(key)?;
        v.parse::<usize>()
            .map_err(|_| parse_err(path, *ln, format!("'{key}' must be a nonnegative integer, got '{v}'")))
    };
    let version = int("format_version")?;
    if version != MODEL_FORMAT_VERSION as usize {
        return Err(parse_err(path, get("format_version")?.0, format!("unsupported model format version {version}")));
    }
    let (r, d, m, ls, lu) = (int("r")?, int("d")?, int("m")?, int("seen_count")?, int("unseen_count")?);
    let names: Vec<String> = get("labels")?.1.split_whitespace().map(String::from).collect();
    let normalized = meta.get("normalized").map_or(true, |(_, v)| v == "true");

    let matrix = |name: &str| -> Result<(usize, Array2<f64>)> {
        let (_, ln, lines) = find(name)?;
        let mut it = lines.iter().copied();
        let mat = parse_matrix_lines(&mut it, path, *ln)?;
        if let Some((extra, _)) = it.next() {
            return Err(parse_err(path, extra, format!("unexpected data in [{name}]")));
        }
        Ok((*ln, mat))
    };
    let (wl, w) = matrix("W")?;
    let (w0l, w0) = matrix("W0")?;
    let (ul, u) = matrix("U")?;
    let (ml, emb) = matrix("M")?;
    let expect = |ln: usize, name: &str, got: (usize, usize), want: (usize, usize)| {
        if got != want {
            Err(parse_err(path, ln, format!("[{name}] is {}×{}, [meta] implies {}×{}", got.0, got.1, want.0, want.1)))
        } else {
            Ok(())
        }
    };
    expect(wl, "W", w.dim(), (d, r))?;
    expect(w0l, "W0", w0.dim(), (1, d))?;
    expect(ul, "U", u.dim(), (m, r))?;
    expect(ml, "M", emb.dim(), (ls + lu, m))?;
    if names.len() != ls + lu {
        return Err(parse_err(path, get("labels")?.0, format!("{} label names, expected {}", names.len(), ls + lu)));
    }
    let params = ModelParams {
        w,
        w0: Array1::from_iter(w0.iter().copied()),
        u,
        beta: num("beta")?,
        gamma: num("gamma")?,
        lambda: num("lambda")?,
        r,
    };
    let err = params.orthonormality_error();
    if err > ORTHONORMALITY_TOLERANCE {
        return Err(parse_err(path, ul, format!("U does not have orthonormal columns (max |UᵀU − I| = {err:e})")));
    }
    let mut labels = LabelSpace::new(names, ls, emb);
    labels.normalized = normalized;
    Ok(SavedModel { params, labels })
}

pub fn read_model(path: &Path) -> Result<SavedModel> {
    parse_model(&read_text(path)?, path)
}

pub fn write_model(path: &Path, model: &SavedModel) -> Result<()> {
    write_text(path, &format_model(model))
}

const CANDIDATES_HEADER: &str = "# candidates:";

/// A predictions file read back into memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionsFile {
    /// Every label of the model's label space, in order.
    pub labels: Vec<String>,
    pub predictions: Vec<Prediction>,
}

impl PredictionsFile {
    /// Label-space indices of the candidates (shared by all instances).
    pub fn candidates(&self) -> Vec<usize> {
        self.predictions.first().map(|p| p.candidates.clone()).unwrap_or_default()
    }

    /// Truth columns for the candidates, from either a candidate-only or
    /// a full-label truth matrix.
    pub fn truth_columns(&self, truth: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let candidates = self.candidates();
        if truth.ncols() == candidates.len() {
            Ok(truth.to_owned())
        } else if truth.ncols() == self.labels.len() {
            Ok(truth.select(Axis(1), &candidates))
        } else {
            Err(Error::shape("truth columns", candidates.len(), truth.ncols()))
        }
    }
}

/// One line per instance: threshold, comma-separated positive labels (`-`
/// when empty), then `label=score` cells by descending score. Comment
/// headers record the label space and the candidate labels.
pub fn format_predictions(predictions: &[Prediction], labels: &LabelSpace) -> String {
    let mut out = String::from(LABELS_HEADER);
    for name in &labels.names {
        out.push('\t');
        out += name;
    }
    out.push('\n');
    out += CANDIDATES_HEADER;
    if let Some(first) = predictions.first() {
        for &c in &first.candidates {
            out.push('\t');
            out += &labels.names[c];
        }
    }
    out.push('\n');
    for p in predictions {
        out += &format_value(p.threshold);
        out.push('\t');
        let positives: Vec<&str> = p.positives.iter().map(|&k| labels.names[p.candidates[k]].as_str()).collect();
        out += if positives.is_empty() { "-".to_owned() } else { positives.join(",") }.as_str();
        for &k in &p.ranking {
            let _ = write!(out, "\t{}={}", labels.names[p.candidates[k]], format_value(p.scores[k]));
        }
        out.push('\n');
    }
    out
}

fn header_names(text: &str, prefix: &str, path: &Path) -> Result<Vec<String>> {
    Ok(text
        .lines()
        .find_map(|l| l.strip_prefix(prefix))
        .ok_or_else(|| parse_err(path, 1, format!("missing '{prefix}' header")))?
        .split('\t')
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect())
}

pub fn parse_predictions(text: &str, path: &Path) -> Result<PredictionsFile> {
    let labels = header_names(text, LABELS_HEADER, path)?;
    let index: std::collections::HashMap<&str, usize> =
        labels.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let candidates = header_names(text, CANDIDATES_HEADER, path)?
        .iter()
        .map(|n| index.get(n.as_str()).copied().ok_or_else(|| parse_err(path, 2, format!("candidate '{n}' is not a label"))))
        .collect::<Result<Vec<usize>>>()?;
    let mut slot = vec![usize::MAX; labels.len()];
    for (k, &c) in candidates.iter().enumerate() {
        slot[c] = k;
    }
    let mut predictions = Vec::new();
    for (ln, line) in content_lines(text) {
        let mut fields = line.split('\t');
        let threshold = parse_value(fields.next().unwrap_or(""), path, ln)?;
        fields.next().ok_or_else(|| parse_err(path, ln, "missing positive-set field"))?;
        let mut scores = vec![f64::NAN; candidates.len()];
        for cell in fields {
            let (name, v) = cell
                .rsplit_once('=')
                .ok_or_else(|| parse_err(path, ln, format!("expected 'label=score', got '{cell}'")))?;
            let k = index
                .get(name)
                .map(|&c| slot[c])
                .filter(|&k| k != usize::MAX)
                .ok_or_else(|| parse_err(path, ln, format!("label '{name}' is not a candidate")))?;
            scores[k] = parse_value(v, path, ln)?;
        }
        if let Some(k) = scores.iter().position(|v| v.is_nan()) {
            return Err(parse_err(path, ln, format!("no score for '{}'", labels[candidates[k]])));
        }
        predictions.push(prediction_from_scores(candidates.clone(), scores, threshold));
    }
    Ok(PredictionsFile { labels, predictions })
}

pub fn read_predictions(path: &Path) -> Result<PredictionsFile> {
    parse_predictions(&read_text(path)?, path)
}

/// Human-readable percentages followed by a `key=value` block.
pub fn format_eval_report(e: &EvalResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MiAP      {:6.2}", e.miap * 100.0);
    let _ = writeln!(out, "micro-F1  {:6.2}", e.micro_f1 * 100.0);
    let _ = writeln!(out, "macro-F1  {:6.2}", e.macro_f1 * 100.0);
    let _ = writeln!(out, "Hamming   {:6.2}", e.hamming * 100.0);
    let _ = writeln!(out, "skipped instances (no positive label): {}", e.skipped);
    let _ = writeln!(out);
    let _ = writeln!(out, "miap={:.2}", e.miap * 100.0);
    let _ = writeln!(out, "micro_f1={:.2}", e.micro_f1 * 100.0);
    let _ = writeln!(out, "macro_f1={:.2}", e.macro_f1 * 100.0);
    let _ = writeln!(out, "hamming={:.2}", e.hamming * 100.0);
    let _ = writeln!(out, "evaluated={}", e.evaluated);
    let _ = writeln!(out, "skipped={}", e.skipped);
    out
}

/// Path helper for error messages on in-memory text.
pub fn memory_path(name: &str) -> PathBuf {
    PathBuf::from(format!("<{name}>"))
}
