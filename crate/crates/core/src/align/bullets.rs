use crate::corpus::{collapse_whitespace, AlignmentLink};
use crate::segment::is_bullet_marker;

const CLAUSE_ENDS: [char; 3] = [';', '\u{0964}', '.'];

/// Splits a structured legal text into sections (separated by blank lines)
/// and each section into clause units. A unit ends at a line ending in `;`,
/// `।` or `.`, or just before a line opening with a list marker; other line
/// breaks are joined with a space.
pub fn split_units(text: &str) -> Vec<Vec<String>> {
    let mut sections = Vec::new();
    let mut units: Vec<String> = Vec::new();
    let mut buf = String::new();

    fn flush(buf: &mut String, units: &mut Vec<String>) {
        let unit = collapse_whitespace(buf);
        if !unit.is_empty() {
            units.push(unit);
        }
        buf.clear();
    }

    for line in text.lines().map(str::trim) {
        if line.is_empty() {
            flush(&mut buf, &mut units);
            if !units.is_empty() {
                sections.push(std::mem::take(&mut units));
            }
            continue;
        }
        let first = line.split_whitespace().next().unwrap_or("");
        if is_bullet_marker(first) {
            flush(&mut buf, &mut units);
        }
        if !buf.is_empty() {
            buf.push(' ');
        }
        buf.push_str(line);
        if line.ends_with(CLAUSE_ENDS) {
            flush(&mut buf, &mut units);
        }
    }
    flush(&mut buf, &mut units);
    if !units.is_empty() {
        sections.push(units);
    }
    sections
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedSection {
    pub section: usize,
    pub src_units: usize,
    pub tgt_units: usize,
}

/// Links index into the flattened `src_units` / `tgt_units`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BulletAlignment {
    pub links: Vec<AlignmentLink>,
    pub src_units: Vec<String>,
    pub tgt_units: Vec<String>,
    pub skipped: Vec<SkippedSection>,
    pub diagnostics: Vec<String>,
}

/// Positional 1-1 alignment of clause units, section by section. Sections
/// whose unit counts differ are skipped; a differing number of sections
/// leaves the whole document unaligned.
pub fn align_bullets(src_doc: &str, tgt_doc: &str) -> BulletAlignment {
    let src = split_units(src_doc);
    let tgt = split_units(tgt_doc);
    let mut out = BulletAlignment {
        src_units: src.concat(),
        tgt_units: tgt.concat(),
        ..Default::default()
    };
    if src.len() != tgt.len() {
        out.diagnostics.push(format!(
            "section count differs: {} source vs {} target; nothing aligned",
            src.len(),
            tgt.len()
        ));
        return out;
    }
    let (mut si, mut ti) = (0, 0);
    for (k, (s, t)) in src.iter().zip(&tgt).enumerate() {
        if s.len() == t.len() {
            out.links
                .extend((0..s.len()).map(|d| AlignmentLink::one_to_one(si + d, ti + d)));
        } else {
            out.diagnostics.push(format!(
                "section {k} skipped: {} source units vs {} target units",
                s.len(),
                t.len()
            ));
            out.skipped.push(SkippedSection {
                section: k,
                src_units: s.len(),
                tgt_units: t.len(),
            });
        }
        si += s.len();
        ti += t.len();
    }
    out
}
