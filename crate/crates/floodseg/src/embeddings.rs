//! The embedding CSV format.
//!
//! ```text
//! path,f0,f1,...,f{d-1}
//! flood/img001.png,0.0,1.25,...
//! ```
//!
//! UTF-8, LF line endings, `.` as decimal separator. Paths are
//! dataset-relative, may not contain commas, and are matched
//! case-sensitively.

use std::fmt::Write as _;
use std::path::Path;

use floodseg_core::features::EmbeddingTable;

use crate::{Error, Result};

fn invalid(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Validation(format!("embedding file line {line}: {msg}"))
}

pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable> {
    let mut lines = text.split('\n').enumerate();
    let header = match lines.next() {
        Some((_, h)) if !h.is_empty() => h,
        _ => return Err(invalid(1, "missing header")),
    };
    let mut cols = header.split(',');
    if cols.next() != Some("path") {
        return Err(invalid(1, "header must start with `path`"));
    }
    let mut dim = 0;
    for (i, name) in cols.enumerate() {
        if name != format!("f{i}") {
            return Err(invalid(
                1,
                format!("expected column `f{i}`, found `{name}`"),
            ));
        }
        dim += 1;
    }
    let mut table =
        EmbeddingTable::new(dim).map_err(|_| invalid(1, "header has no feature columns"))?;
    let mut lines = lines.peekable();
    while let Some((idx, line)) = lines.next() {
        let lineno = idx + 1;
        if line.is_empty() {
            if lines.peek().is_none() {
                break;
            }
            return Err(invalid(lineno, "empty line"));
        }
        let mut cells = line.split(',');
        let id = cells.next().unwrap_or_default();
        if id.is_empty() {
            return Err(invalid(lineno, "empty path"));
        }
        let values = cells
            .map(|c| {
                c.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| invalid(lineno, format!("non-numeric cell `{c}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(invalid(
                lineno,
                format!(
                    "ragged row: {} values under a {dim}-feature header",
                    values.len()
                ),
            ));
        }
        if table.get(id).is_some() {
            return Err(invalid(lineno, format!("duplicate path `{id}`")));
        }
        table
            .insert(id.to_owned(), values)
            .map_err(|e| invalid(lineno, e))?;
    }
    Ok(table)
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
}

/// Serializes a table in the same format, rows sorted by path.
pub fn format_embeddings(table: &EmbeddingTable) -> String {
    let mut out = String::from("path");
    for i in 0..table.dim() {
        let _ = write!(out, ",f{i}");
    }
    out.push('\n');
    for (id, v) in table.iter() {
        out.push_str(id);
        for x in v.values() {
            let _ = write!(out, ",{x:?}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_file() {
        let t = parse_embeddings("path,f0,f1\na.png,1.0,2.0\n").unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.len(), 1);
        assert_eq!(t.get("a.png").unwrap().values(), &[1.0, 2.0]);
        // header only: an exporter run over an empty directory
        assert_eq!(parse_embeddings("path,f0\n").unwrap().len(), 0);
    }

    #[test]
    fn malformed_files() {
        for bad in [
            "",
            "name,f0\na,1\n",
            "path,f1\na,1\n",
            "path\n",
            "path,f0,f1\na.png,1.0,2.0,3.0\n",
            "path,f0\na.png,1\na.png,2\n",
            "path,f0\na.png,abc\n",
            "path,f0\na.png,NaN\n",
            "path,f0\na.png,1\r\n",
            "path,f0\na.png,1\n\nb.png,2\n",
        ] {
            assert!(parse_embeddings(bad).is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn format_then_parse_is_exact(
            rows in proptest::collection::btree_map("[a-z]{1,6}/[a-z0-9]{1,8}\\.png", proptest::collection::vec(-1e6f64..1e6, 3), 0..8)
        ) {
            let mut t = EmbeddingTable::new(3).unwrap();
            for (k, v) in &rows {
                t.insert(k.clone(), v.clone()).unwrap();
            }
            let back = parse_embeddings(&format_embeddings(&t)).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
