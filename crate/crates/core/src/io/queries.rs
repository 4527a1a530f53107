use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::semantics::TextQuery;

/// Writes one tab-separated line per prompt: `category`, `prompt`, and the
/// space-separated embedding values.
pub fn write_queries(path: &Path, queries: &[TextQuery]) -> Result<()> {
    let mut out = String::from("# category\tprompt\tembedding\n");
    for q in queries {
        for (prompt, emb) in q.prompts.iter().zip(q.embeddings()) {
            if prompt.contains(['\t', '\n']) || q.category.contains(['\t', '\n']) {
                return Err(Error::InvalidParameter(format!("prompt `{prompt}` contains a tab or newline")));
            }
            let values: Vec<String> = emb.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}\t{}\t{}", q.category, prompt, values.join(" ")).expect("write to string");
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a query file, grouping prompts by category in order of first
/// appearance. All embeddings must share one dimension.
pub fn read_queries(path: &Path) -> Result<Vec<TextQuery>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut groups: Vec<(String, Vec<String>, Vec<Vec<f32>>)> = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let err = |m: String| Error::format(path, format!("line {}: {m}", lineno + 1));
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", parts.len())));
        }
        let emb = parts[2]
            .split_whitespace()
            .map(|v| v.parse::<f32>().map_err(|_| err(format!("bad value `{v}`"))))
            .collect::<Result<Vec<f32>>>()?;
        match dim {
            None => dim = Some(emb.len()),
            Some(d) if d != emb.len() => {
                return Err(err(format!("embedding has {} values, earlier lines have {d}", emb.len())))
            }
            _ => {}
        }
        let category = parts[0].trim();
        match groups.iter_mut().find(|g| g.0 == category) {
            Some(g) => {
                g.1.push(parts[1].to_string());
                g.2.push(emb);
            }
            None => groups.push((category.to_string(), vec![parts[1].to_string()], vec![emb])),
        }
    }
    groups
        .into_iter()
        .map(|(c, p, e)| TextQuery::new(c, p, e).map_err(|e| Error::format(path, e.to_string())))
        .collect()
}
