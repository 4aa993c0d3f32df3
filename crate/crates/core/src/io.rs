//! Readers and writers for the on-disk formats.
//!
//! * segmented documents: one sentence per line, LF endings
//! * link files: one `src:tgt` link per line
//! * pair files: `src<TAB>tgt<LF>`
//! * embeddings: whitespace-separated floats, one row per line, or raw
//!   little-endian binary32 with a `<file>.meta` sidecar holding
//!   `dim=<d> rows=<n>`
//!
//! Every reader rejects invalid UTF-8 with the line and byte offset of the
//! first bad byte.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::corpus::{parse_link_line, sanitize_line, AlignmentLink, Document, SentencePair};
use crate::error::{Error, Result};
use crate::filter::EmbeddingMatrix;

pub fn read_utf8(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_utf8(bytes, path)
}

fn decode_utf8(bytes: Vec<u8>, path: &Path) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| {
        let offset = e.utf8_error().valid_up_to();
        let line = 1 + e.as_bytes()[..offset].iter().filter(|&&b| b == b'\n').count();
        Error::Utf8 {
            path: path.to_path_buf(),
            line,
            byte_offset: offset,
        }
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Non-blank lines of a file with `#` comment lines dropped and each line
/// trimmed.
pub fn read_list(path: impl AsRef<Path>) -> Result<Vec<(usize, String)>> {
    let text = read_utf8(path)?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.to_owned()))
        .collect())
}

/// Reads a segmented document: one sentence per line. Blank lines are
/// skipped; TABs inside a line become spaces.
pub fn read_sentences(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = read_utf8(path)?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(sanitize_line)
        .collect())
}

pub fn read_document(
    path: impl AsRef<Path>,
    doc_id: impl Into<String>,
    lang: impl Into<String>,
) -> Result<Document> {
    Document::new(doc_id, lang, read_sentences(path)?)
}

pub fn write_sentences<S: AsRef<str>>(path: impl AsRef<Path>, sentences: &[S]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for s in sentences {
        writeln!(w, "{}", sanitize_line(s.as_ref())).map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_links(path: impl AsRef<Path>) -> Result<Vec<AlignmentLink>> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            parse_link_line(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

pub fn write_links(path: impl AsRef<Path>, links: &[AlignmentLink]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for l in links {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

/// Reads a `src<TAB>tgt` file. Each non-empty line must contain exactly one
/// TAB with text on both sides.
pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<SentencePair>> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let mut cols = line.split('\t');
        let (Some(src), Some(tgt), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(parse_err("expected exactly one TAB".into()));
        };
        out.push(SentencePair::new(src, tgt).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[SentencePair]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for p in pairs {
        writeln!(w, "{}\t{}", sanitize_line(&p.src), sanitize_line(&p.tgt))
            .map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_string(path: impl AsRef<Path>, content: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(content.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

/// `<path>.meta`, the sidecar describing a binary embedding file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Reads an embedding file, choosing the binary reader when a sidecar
/// exists next to it.
pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    if sidecar_path(path).exists() {
        read_embeddings_binary(path)
    } else {
        read_embeddings_text(path)
    }
}

pub fn read_embeddings_text(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let text = read_utf8(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason: e.to_string(),
            })?;
        rows.push(row);
    }
    EmbeddingMatrix::from_rows(rows).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })
}

fn parse_sidecar(path: &Path) -> Result<(usize, usize)> {
    let meta = sidecar_path(path);
    let text = read_utf8(&meta)?;
    let bad = |reason: &str| Error::Parse {
        path: meta.clone(),
        line: 1,
        reason: reason.to_owned(),
    };
    let (mut dim, mut rows) = (None, None);
    for field in text.split_whitespace() {
        match field.split_once('=') {
            Some(("dim", v)) => dim = Some(v.parse::<usize>().map_err(|_| bad("bad dim"))?),
            Some(("rows", v)) => rows = Some(v.parse::<usize>().map_err(|_| bad("bad rows"))?),
            _ => return Err(bad("expected `dim=<d> rows=<n>`")),
        }
    }
    match (dim, rows) {
        (Some(d), Some(n)) => Ok((d, n)),
        _ => Err(bad("expected `dim=<d> rows=<n>`")),
    }
}

pub fn read_embeddings_binary(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let (dim, rows) = parse_sidecar(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != dim * rows * 4 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            reason: format!(
                "expected {} bytes for {rows} rows of dim {dim}, found {}",
                dim * rows * 4,
                bytes.len()
            ),
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmbeddingMatrix::from_flat(dim, data).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })
}

pub fn write_embeddings_text(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for row in m.rows() {
        let line = row.iter().map(f32::to_string).collect::<Vec<_>>().join(" ");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_embeddings_binary(path: impl AsRef<Path>, m: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    for row in m.rows() {
        for v in row {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    finish(w, path)?;
    write_string(
        sidecar_path(path),
        &format!("dim={} rows={}\n", m.dim(), m.len()),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_utf8_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.txt");
        fs::write(&p, b"ok line\nsecond \xff line\n").unwrap();
        match read_sentences(&p) {
            Err(Error::Utf8 {
                line, byte_offset, ..
            }) => assert_eq!((line, byte_offset), (2, 15)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_pairs(&p), Err(Error::Utf8 { .. })));
        assert!(matches!(read_links(&p), Err(Error::Utf8 { .. })));
    }

    #[test]
    fn pair_file_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        let pairs = vec![
            SentencePair::new("আমি ভাত খাই।", "I eat rice.").unwrap(),
            SentencePair::new("a", "b").unwrap(),
        ];
        write_pairs(&p, &pairs).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "আমি ভাত খাই।\tI eat rice.\na\tb\n"
        );
        let back = read_pairs(&p).unwrap();
        assert_eq!(back, pairs);
    }

    #[test]
    fn pair_file_rejects_extra_tabs() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pairs.tsv");
        fs::write(&p, "a\tb\nc\td\te\n").unwrap();
        match read_pairs(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn link_file_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.txt");
        fs::write(&p, "0:0\n1,2:1\nx:1\n").unwrap();
        match read_links(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn embeddings_text_and_binary_agree() {
        let dir = tempfile::tempdir().unwrap();
        let m = EmbeddingMatrix::from_rows(vec![vec![0.1, -2.5, 3.0], vec![1e-7, 4.25, 0.0]])
            .unwrap();
        let t = dir.path().join("e.txt");
        let b = dir.path().join("e.bin");
        write_embeddings_text(&t, &m).unwrap();
        write_embeddings_binary(&b, &m).unwrap();
        assert_eq!(
            fs::read_to_string(sidecar_path(&b)).unwrap(),
            "dim=3 rows=2\n"
        );
        assert_eq!(read_embeddings(&t).unwrap(), m);
        assert_eq!(read_embeddings(&b).unwrap(), m);
    }

    #[test]
    fn binary_size_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let b = dir.path().join("e.bin");
        fs::write(&b, [0u8; 10]).unwrap();
        fs::write(sidecar_path(&b), "dim=2 rows=2").unwrap();
        assert!(read_embeddings(&b).is_err());
    }
}
