//! Delimiter-separated triple files and type-map sidecars.
//!
//! Accepted row shapes (UTF-8, tab- or comma-delimited, no header unless
//! requested): `head<sep>relation<sep>tail` or
//! `head<sep>relation<sep>tail<sep>view`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{KgBuilder, KgError, KnowledgeGraph, TypeSource, ViewTag};

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Column separator; `None` auto-detects per file (tab wins over comma).
    pub delimiter: Option<char>,
    /// Skip the first line.
    pub header: bool,
    /// View assigned to rows without a fourth column.
    pub default_view: ViewTag,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { delimiter: None, header: false, default_view: ViewTag::Instance }
    }
}

fn detect_delimiter(line: &str) -> char {
    if line.contains('\t') {
        '\t'
    } else {
        ','
    }
}

/// Parse a two-column sidecar mapping entity labels to node-type names.
pub fn load_type_map(path: &Path) -> Result<TypeSource, KgError> {
    let text = fs::read_to_string(path).map_err(|e| KgError::Io { path: path.to_path_buf(), source: e })?;
    let mut map = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sep = detect_delimiter(line);
        let cols: Vec<&str> = line.split(sep).map(str::trim).collect();
        if cols.len() != 2 {
            return Err(KgError::MalformedRow { path: path.to_path_buf(), line: n + 1, found: cols.len() });
        }
        map.insert(cols[0].to_string(), cols[1].to_string());
    }
    Ok(TypeSource::Sidecar { map, prefix_delimiter: ':' })
}

fn load_into(
    builder: &mut KgBuilder,
    path: &Path,
    opts: &LoadOptions,
    file_view: Option<ViewTag>,
) -> Result<usize, KgError> {
    let text = fs::read_to_string(path).map_err(|e| KgError::Io { path: path.to_path_buf(), source: e })?;
    let mut rows = 0usize;
    for (n, line) in text.lines().enumerate() {
        if opts.header && n == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let sep = opts.delimiter.unwrap_or_else(|| detect_delimiter(line));
        let cols: Vec<&str> = line.split(sep).map(str::trim).collect();
        let view = match cols.len() {
            3 => file_view.unwrap_or(opts.default_view),
            4 => ViewTag::parse(cols[3]).ok_or_else(|| KgError::UnknownView {
                path: path.to_path_buf(),
                line: n + 1,
                token: cols[3].to_string(),
            })?,
            found => {
                return Err(KgError::MalformedRow { path: path.to_path_buf(), line: n + 1, found })
            }
        };
        let view = if view == ViewTag::Whole { opts.default_view } else { view };
        builder.add(cols[0], cols[1], cols[2], view)?;
        rows += 1;
    }
    if rows == 0 {
        return Err(KgError::EmptyFile { path: path.to_path_buf() });
    }
    Ok(rows)
}

/// Load a single triple file.
pub fn load_triples(path: &Path, type_source: TypeSource, opts: &LoadOptions) -> Result<KnowledgeGraph, KgError> {
    let mut b = KgBuilder::new(type_source);
    load_into(&mut b, path, opts, None)?;
    Ok(b.finish())
}

/// Load one graph from several files, tagging each file's rows with its view
/// (mirrors datasets released as separate ontology/instance/bridge files).
/// A file tagged `Whole` keeps per-row tags from the fourth column.
pub fn load_view_files(
    files: &[(std::path::PathBuf, ViewTag)],
    type_source: TypeSource,
    opts: &LoadOptions,
) -> Result<KnowledgeGraph, KgError> {
    let mut b = KgBuilder::new(type_source);
    for (path, view) in files {
        let file_view = if *view == ViewTag::Whole { None } else { Some(*view) };
        load_into(&mut b, path, opts, file_view)?;
    }
    Ok(b.finish())
}
