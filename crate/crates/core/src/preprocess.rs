//! Corpus hygiene: character normalization, shared foreign strings,
//! dangling Latin numerals and letters on the Bengali side, leakage
//! removal, deduplication and quality filters for evaluation sets.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::align::lexical_tokens;
use crate::corpus::{collapse_whitespace, SentencePair};
use crate::error::{Error, Result};
use crate::io::{read_list, read_utf8};

const DEFAULT_TABLE: &str = include_str!("../data/normalization.tsv");
const MAX_ROUNDS: usize = 16;

fn is_bengali(c: char) -> bool {
    ('\u{0980}'..='\u{09FF}').contains(&c)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizationTable {
    char_map: BTreeMap<String, String>,
    strip_set: BTreeSet<char>,
    /// Stripped unless both neighbours are Bengali.
    strip_outside_bengali: BTreeSet<char>,
    longest_key: usize,
}

fn unescape(field: &str) -> std::result::Result<String, String> {
    let mut out = String::new();
    let mut rest = field;
    while let Some(pos) = rest.find("\\u{") {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 3..];
        let end = after.find('}').ok_or("unterminated \\u{ escape")?;
        let code = u32::from_str_radix(&after[..end], 16).map_err(|e| format!("bad escape: {e}"))?;
        out.push(char::from_u32(code).ok_or(format!("invalid code point {code:X}"))?);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl NormalizationTable {
    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_TABLE, Path::new("<builtin>")).expect("builtin normalization table is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&read_utf8(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut t = NormalizationTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                reason,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 2 || cols.len() > 3 {
                return Err(bad("expected from<TAB>to".into()));
            }
            let from = unescape(cols[0]).map_err(bad)?;
            let to = unescape(cols[1]).map_err(bad)?;
            if from.is_empty() {
                return Err(bad("empty source sequence".into()));
            }
            let single = {
                let mut cs = from.chars();
                cs.next().filter(|_| cs.next().is_none())
            };
            match (cols.get(2).copied(), single, to.is_empty()) {
                (Some("outside-bengali"), Some(c), true) => {
                    t.strip_outside_bengali.insert(c);
                }
                (Some(flag), ..) => return Err(bad(format!("unknown flag {flag:?}"))),
                (None, Some(c), true) => {
                    t.strip_set.insert(c);
                }
                (None, ..) => {
                    t.longest_key = t.longest_key.max(from.chars().count());
                    t.char_map.insert(from, to);
                }
            }
        }
        t.check_closure(path)?;
        Ok(t)
    }

    /// Every key and value must settle under the table within a few
    /// rounds, otherwise the map contains a cycle.
    fn check_closure(&self, path: &Path) -> Result<()> {
        for s in self.char_map.keys().chain(self.char_map.values()) {
            let once = self.normalize(s);
            if self.one_round(&once) != once {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    reason: format!("mapping for {s:?} does not settle (cycle in table)"),
                });
            }
        }
        Ok(())
    }

    fn map_longest(&self, text: &str) -> String {
        if self.char_map.is_empty() {
            return text.to_owned();
        }
        let bounds: Vec<usize> = text.char_indices().map(|(b, _)| b).chain([text.len()]).collect();
        let n = bounds.len() - 1;
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        while i < n {
            let mut matched = false;
            for len in (1..=self.longest_key.min(n - i)).rev() {
                if let Some(rep) = self.char_map.get(&text[bounds[i]..bounds[i + len]]) {
                    out.push_str(rep);
                    i += len;
                    matched = true;
                    break;
                }
            }
            if !matched {
                out.push_str(&text[bounds[i]..bounds[i + 1]]);
                i += 1;
            }
        }
        out
    }

    fn strip(&self, text: &str) -> String {
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        for (i, &c) in chars.iter().enumerate() {
            if self.strip_set.contains(&c) {
                continue;
            }
            if self.strip_outside_bengali.contains(&c) {
                let left = i.checked_sub(1).map(|j| chars[j]);
                let right = chars.get(i + 1).copied();
                if !(left.is_some_and(is_bengali) && right.is_some_and(is_bengali)) {
                    continue;
                }
            }
            out.push(c);
        }
        out
    }

    fn one_round(&self, text: &str) -> String {
        let composed: String = text.nfc().collect();
        self.strip(&self.map_longest(&composed))
    }

    /// NFC, then the character map (longest match first), then removal of
    /// the strip set, repeated until nothing changes.
    pub fn normalize(&self, text: &str) -> String {
        let mut cur = text.to_owned();
        for _ in 0..MAX_ROUNDS {
            let next = self.one_round(&cur);
            if next == cur {
                break;
            }
            cur = next;
        }
        cur
    }
}

pub fn normalize_text(text: &str, table: &NormalizationTable) -> String {
    table.normalize(text)
}

pub fn normalize_pair(pair: &SentencePair, table: &NormalizationTable) -> Option<SentencePair> {
    let src = collapse_whitespace(&table.normalize(&pair.src));
    let tgt = collapse_whitespace(&table.normalize(&pair.tgt));
    let mut p = SentencePair::new(src, tgt).ok()?;
    p.origin = pair.origin.clone();
    Some(p)
}

/// Characters that belong to neither expected script: anything but the
/// Bengali block and ASCII letters.
fn outside_scripts(c: char) -> bool {
    !is_bengali(c) && !c.is_ascii_alphabetic()
}

fn is_foreign_letter(c: char) -> bool {
    c.is_alphabetic() && outside_scripts(c)
}

fn runs(text: &str) -> Vec<Vec<char>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    for c in text.chars() {
        if outside_scripts(c) {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.into_iter().filter(|r| r.iter().any(|&c| is_foreign_letter(c))).collect()
}

fn longest_common<'a>(a: &'a [char], b: &[char]) -> &'a [char] {
    let mut best = (0, 0);
    let mut prev = vec![0usize; b.len() + 1];
    for i in 1..=a.len() {
        let mut cur = vec![0usize; b.len() + 1];
        for j in 1..=b.len() {
            if a[i - 1] == b[j - 1] {
                cur[j] = prev[j - 1] + 1;
                if cur[j] > best.0 {
                    best = (cur[j], i);
                }
            }
        }
        prev = cur;
    }
    &a[best.1 - best.0..best.1]
}

/// Longest shared foreign string, trimmed of surrounding whitespace.
fn shared_foreign(src: &str, tgt: &str, min_len: usize) -> Option<String> {
    let (rs, rt) = (runs(src), runs(tgt));
    let mut best: Option<String> = None;
    for a in &rs {
        for b in &rt {
            let common: String = longest_common(a, b).iter().collect();
            let common = common.trim();
            if common.chars().count() >= min_len
                && common.chars().any(is_foreign_letter)
                && best.as_ref().is_none_or(|x| common.chars().count() > x.chars().count())
            {
                best = Some(common.to_owned());
            }
        }
    }
    best
}

/// Deletes strings of at least `min_len` characters, written in neither
/// Bengali nor Latin letters, that occur verbatim on both sides. `None`
/// when a side ends up empty.
pub fn remove_shared_foreign(pair: &SentencePair, min_len: usize) -> Option<SentencePair> {
    let (mut src, mut tgt) = (pair.src.clone(), pair.tgt.clone());
    let mut changed = false;
    while let Some(s) = shared_foreign(&src, &tgt, min_len.max(1)) {
        src = src.replace(&s, " ");
        tgt = tgt.replace(&s, " ");
        changed = true;
    }
    if !changed {
        return Some(pair.clone());
    }
    let mut p = SentencePair::new(collapse_whitespace(&src), collapse_whitespace(&tgt)).ok()?;
    p.origin = pair.origin.clone();
    Some(p)
}

/// Latin bullet letters to their Bengali counterparts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslitMap {
    pub letters: BTreeMap<char, char>,
}

impl Default for TranslitMap {
    fn default() -> Self {
        let bn = "কখগঘঙচছজঝঞটঠডঢণতথদধনপফবভময";
        TranslitMap {
            letters: ('a'..='z').zip(bn.chars()).collect(),
        }
    }
}

fn bengali_digit(d: char) -> char {
    char::from_u32(0x09E6 + d.to_digit(10).unwrap_or(0)).unwrap_or(d)
}

fn transliterate_token(tok: &str, map: &TranslitMap) -> Option<String> {
    let open = tok.strip_prefix('(');
    let body = open.unwrap_or(tok);
    let core = body.trim_end_matches([')', '.', ',', ';', ':', '\u{0964}']);
    let tail = &body[core.len()..];
    if core.is_empty() {
        return None;
    }
    let prefix = if open.is_some() { "(" } else { "" };
    if core.chars().all(|c| c.is_ascii_digit()) {
        return Some(format!("{prefix}{}{tail}", core.chars().map(bengali_digit).collect::<String>()));
    }
    let mut cs = core.chars();
    let letter = cs.next().filter(|c| c.is_ascii_alphabetic() && cs.next().is_none())?;
    // a lone letter only counts as a bullet when wrapped like one
    let bullet = (open.is_some() && tail.starts_with(')')) || tail == ")" || tail == ".";
    if !bullet {
        return None;
    }
    let mapped = map.letters.get(&letter.to_ascii_lowercase())?;
    Some(format!("{prefix}{mapped}{tail}"))
}

/// Rewrites dangling ASCII numerals and Latin bullet letters on the
/// Bengali side. Whitespace and the number of tokens are preserved.
pub fn transliterate_dangling(bn_text: &str, map: &TranslitMap) -> String {
    let mut out = String::with_capacity(bn_text.len());
    let mut word_start = None;
    let flush = |out: &mut String, w: &str| match transliterate_token(w, map) {
        Some(t) => out.push_str(&t),
        None => out.push_str(w),
    };
    for (i, c) in bn_text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = word_start.take() {
                flush(&mut out, &bn_text[s..i]);
            }
            out.push(c);
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        flush(&mut out, &bn_text[s..]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakMode {
    /// Drop a training pair identical to an evaluation pair.
    #[default]
    Both,
    /// Drop a training pair sharing either side with an evaluation pair.
    Either,
}

impl std::str::FromStr for LeakMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(LeakMode::Both),
            "either" => Ok(LeakMode::Either),
            _ => Err(Error::Config(format!("unknown leakage mode {s:?}"))),
        }
    }
}

/// Training pairs with evaluation material removed, plus the drop count.
pub fn remove_leakage(
    train: &[SentencePair],
    eval_sets: &[Vec<SentencePair>],
    mode: LeakMode,
) -> (Vec<SentencePair>, usize) {
    let eval: HashSet<(String, String)> = eval_sets.iter().flatten().map(SentencePair::key).collect();
    let src_side: HashSet<&str> = eval.iter().map(|(s, _)| s.as_str()).collect();
    let tgt_side: HashSet<&str> = eval.iter().map(|(_, t)| t.as_str()).collect();
    let kept: Vec<SentencePair> = train
        .iter()
        .filter(|p| {
            let k = p.key();
            match mode {
                LeakMode::Both => !eval.contains(&k),
                LeakMode::Either => !src_side.contains(k.0.as_str()) && !tgt_side.contains(k.1.as_str()),
            }
        })
        .cloned()
        .collect();
    let dropped = train.len() - kept.len();
    (kept, dropped)
}

/// First occurrence of every pair, in input order.
pub fn dedup(pairs: &[SentencePair]) -> Vec<SentencePair> {
    let mut seen = HashSet::new();
    pairs.iter().filter(|p| seen.insert(p.key())).cloned().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalRule {
    Length = 1,
    Transliteration = 2,
    Oov = 3,
}

impl EvalRule {
    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Thresholds of the evaluation-set filters, as read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalThresholds {
    pub min_chars: usize,
    pub max_chars: usize,
    pub max_translit_frac: f64,
    pub max_oov_frac: f64,
    pub max_oov_count: usize,
}

impl Default for EvalThresholds {
    fn default() -> Self {
        EvalThresholds {
            min_chars: 50,
            max_chars: 250,
            max_translit_frac: 1.0 / 3.0,
            max_oov_frac: 0.5,
            max_oov_count: 5,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EvalFilterRules {
    pub thresholds: EvalThresholds,
    /// Known tokens, lowercased. Tokens outside it count as OOV.
    pub vocab: HashSet<String>,
    /// Tokens flagged as transliterations, lowercased.
    pub translit_lexicon: HashSet<String>,
}

impl EvalFilterRules {
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if !(0 < t.min_chars && t.min_chars < t.max_chars) {
            return Err(Error::Config("need 0 < min_chars < max_chars".into()));
        }
        for (name, f) in [("max_translit_frac", t.max_translit_frac), ("max_oov_frac", t.max_oov_frac)] {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1]")));
            }
        }
        if self.vocab.is_empty() {
            return Err(Error::Config("OOV rule needs a non-empty vocabulary".into()));
        }
        Ok(())
    }

    /// Token list file, one per line; `#` comments allowed.
    pub fn load_tokens(path: impl AsRef<Path>) -> Result<HashSet<String>> {
        Ok(read_list(path)?.into_iter().map(|(_, t)| t.to_lowercase()).collect())
    }

    fn first_failure(&self, pair: &SentencePair) -> Option<EvalRule> {
        let t = &self.thresholds;
        let sides = [pair.src.as_str(), pair.tgt.as_str()];
        if sides.iter().any(|s| {
            let n = s.chars().count();
            n < t.min_chars || n > t.max_chars
        }) {
            return Some(EvalRule::Length);
        }
        let tokens: Vec<Vec<String>> = sides.iter().map(|s| lexical_tokens(s)).collect();
        let frac = |hits: usize, toks: &[String]| {
            if toks.is_empty() {
                0.0
            } else {
                hits as f64 / toks.len() as f64
            }
        };
        if tokens.iter().any(|toks| {
            let hits = toks.iter().filter(|w| self.translit_lexicon.contains(*w)).count();
            frac(hits, toks) > t.max_translit_frac
        }) {
            return Some(EvalRule::Transliteration);
        }
        if tokens.iter().any(|toks| {
            let oov = toks.iter().filter(|w| !self.vocab.contains(*w)).count();
            oov > t.max_oov_count || frac(oov, toks) > t.max_oov_frac
        }) {
            return Some(EvalRule::Oov);
        }
        None
    }
}

/// Splits evaluation candidates into kept pairs and rejected pairs tagged
/// with the first rule they fail.
pub fn quality_filter_eval(
    pairs: &[SentencePair],
    rules: &EvalFilterRules,
) -> Result<(Vec<SentencePair>, Vec<(SentencePair, EvalRule)>)> {
    rules.validate()?;
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for p in pairs {
        match rules.first_failure(p) {
            None => kept.push(p.clone()),
            Some(r) => rejected.push((p.clone(), r)),
        }
    }
    Ok((kept, rejected))
}

/// Named preprocessing steps, applied in the order given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    Normalize,
    Foreign,
    Translit,
    Dedup,
}

impl std::str::FromStr for Step {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalize" => Ok(Step::Normalize),
            "foreign" => Ok(Step::Foreign),
            "translit" => Ok(Step::Translit),
            "dedup" => Ok(Step::Dedup),
            _ => Err(Error::Config(format!("unknown preprocessing step {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOptions {
    pub table: NormalizationTable,
    pub foreign_min_len: usize,
    pub translit: TranslitMap,
}

impl PreprocessOptions {
    pub fn with_builtin_table() -> Self {
        PreprocessOptions {
            table: NormalizationTable::builtin(),
            foreign_min_len: 10,
            translit: TranslitMap::default(),
        }
    }
}

/// Runs `steps` over `pairs`, returning the survivors and a note for every
/// pair a step dropped.
pub fn run_steps(pairs: Vec<SentencePair>, steps: &[Step], opts: &PreprocessOptions) -> (Vec<SentencePair>, Vec<String>) {
    let mut cur = pairs;
    let mut notes = Vec::new();
    for step in steps {
        cur = match step {
            Step::Dedup => dedup(&cur),
            _ => cur
                .into_iter()
                .filter_map(|p| {
                    let out = match step {
                        Step::Normalize => normalize_pair(&p, &opts.table),
                        Step::Foreign => remove_shared_foreign(&p, opts.foreign_min_len),
                        Step::Translit => {
                            let mut q = p.clone();
                            q.src = transliterate_dangling(&p.src, &opts.translit);
                            Some(q)
                        }
                        Step::Dedup => unreachable!(),
                    };
                    if out.is_none() {
                        notes.push(format!("{step:?}: dropped emptied pair {:?}", p.key()));
                    }
                    out
                })
                .collect(),
        };
    }
    (cur, notes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(s: &str, t: &str) -> SentencePair {
        SentencePair::new(s, t).unwrap()
    }

    #[test]
    fn builtin_table_examples() {
        let t = NormalizationTable::builtin();
        assert_eq!(t.normalize("\u{201C}x\u{201D}"), "\"x\"");
        assert_eq!(t.normalize("it\u{2019}s \u{2014} ok\u{2026}"), "it's - ok...");
        assert_eq!(t.normalize(""), "");
        assert_eq!(t.normalize("plain \"text\""), "plain \"text\"");
    }

    #[test]
    fn bengali_forms() {
        let t = NormalizationTable::builtin();
        assert_eq!(t.normalize("\u{09DF}"), "\u{09AF}\u{09BC}");
        assert_eq!(t.normalize("\u{0985}\u{09BE}মি"), "\u{0986}মি");
        assert_eq!(t.normalize("\u{09C7}\u{09BE}"), "\u{09CB}");
        assert_eq!(t.normalize("হঠা\u{09A4}\u{09CD}\u{200D}"), "হঠা\u{09CE}");
        assert_eq!(t.normalize("কথা\u{09F7}"), "কথা\u{0964}");
    }

    #[test]
    fn zero_width_joiners_are_contextual() {
        let t = NormalizationTable::builtin();
        assert_eq!(t.normalize("a\u{200D}b"), "ab");
        assert_eq!(t.normalize("\u{200C}"), "");
        let bn = "র\u{200D}্য";
        assert_eq!(t.normalize(bn), bn);
        assert_eq!(t.normalize("x\u{200B}y\u{FEFF}"), "xy");
    }

    #[test]
    fn cyclic_table_rejected() {
        let err = NormalizationTable::parse("a\tb\nb\ta\n", Path::new("t.tsv")).unwrap_err();
        assert!(err.to_string().contains("cycle"));
        assert!(NormalizationTable::parse("a\tb\tweird\n", Path::new("t.tsv")).is_err());
        assert!(NormalizationTable::parse("\\u{zz}\tb\n", Path::new("t.tsv")).is_err());
    }

    #[test]
    fn longest_match_wins() {
        let t = NormalizationTable::parse("ab\tX\na\tY\n", Path::new("t")).unwrap();
        assert_eq!(t.normalize("aab"), "YX");
    }

    #[test]
    fn shared_cyrillic_removed() {
        let p = pair("আমি বললাম Привет, мир! তারপর", "I said Привет, мир! then");
        let q = remove_shared_foreign(&p, 10).unwrap();
        assert_eq!(q.src, "আমি বললাম তারপর");
        assert_eq!(q.tgt, "I said then");
    }

    #[test]
    fn shared_foreign_thresholds() {
        let p = pair("নাম Иван এখানে", "name Иван here");
        assert_eq!(remove_shared_foreign(&p, 10).unwrap(), p);
        let p = pair("কোনো মিল নেই", "no match here");
        assert_eq!(remove_shared_foreign(&p, 10).unwrap(), p);
        // digits and punctuation alone never count as foreign text
        let p = pair("১৯৭১ 1971, 1972, 1973 সাল", "years 1971, 1972, 1973");
        assert_eq!(remove_shared_foreign(&p, 10).unwrap(), p);
        let p = pair("Привет, мир!", "Привет, мир!");
        assert!(remove_shared_foreign(&p, 10).is_none());
    }

    #[test]
    fn dangling_transliteration() {
        let m = TranslitMap::default();
        assert_eq!(transliterate_dangling("1971", &m), "১৯৭১");
        assert_eq!(transliterate_dangling("COVID-19 রোগ", &m), "COVID-19 রোগ");
        assert_eq!(transliterate_dangling("(a) প্রথম", &m), "(ক) প্রথম");
        assert_eq!(transliterate_dangling("b) দ্বিতীয়  3.", &m), "খ) দ্বিতীয়  ৩.");
        assert_eq!(transliterate_dangling("a বা I", &m), "a বা I");
        assert_eq!(transliterate_dangling("3.14", &m), "3.14");
    }

    #[test]
    fn leakage_modes() {
        let train = vec![pair("a", "x"), pair("b", "y"), pair("c", "z")];
        let eval = vec![vec![pair("a", "x"), pair("q", "y")]];
        let (kept, dropped) = remove_leakage(&train, &eval, LeakMode::Both);
        assert_eq!((kept.len(), dropped), (2, 1));
        let (kept, dropped) = remove_leakage(&train, &eval, LeakMode::Either);
        assert_eq!(kept, [pair("c", "z")]);
        assert_eq!(dropped, 2);
        let (kept, _) = remove_leakage(&train, &[vec![pair("m", "n")]], LeakMode::Both);
        assert_eq!(kept, train);
    }

    #[test]
    fn dedup_keeps_first() {
        let p = pair("p", "1");
        let q = pair("q", "2");
        assert_eq!(dedup(&[p.clone(), p.clone(), q.clone()]), [p.clone(), q.clone()]);
        assert_eq!(dedup(&[q.clone(), p.clone()]), [q, p]);
    }

    #[test]
    fn dedup_counts_gold_fixture() {
        let mut pairs: Vec<SentencePair> = (0..3383).map(|i| pair(&format!("s{i}"), &format!("t{i}"))).collect();
        for i in 0..17 {
            pairs.push(pair(&format!("s{}", i * 100), &format!("t{}", i * 100)));
        }
        assert_eq!(pairs.len(), 3400);
        assert_eq!(dedup(&pairs).len(), 3383);
    }

    fn rules(vocab: &[&str]) -> EvalFilterRules {
        EvalFilterRules {
            vocab: vocab.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn eval_filter_rules() {
        let words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta", "iota", "kappa"];
        let mut r = rules(&words);
        let good_src = "alpha beta gamma delta epsilon zeta eta theta iota kappa";
        assert!(good_src.len() >= 50);

        let short = "x".repeat(49);
        let (kept, rej) = quality_filter_eval(&[pair(&short, good_src)], &r).unwrap();
        assert!(kept.is_empty());
        assert_eq!(rej[0].1, EvalRule::Length);
        assert_eq!(rej[0].1.id(), 1);

        let six_oov = "alpha beta gamma delta epsilon zeta eta theta one two three four five six";
        let (_, rej) = quality_filter_eval(&[pair(good_src, six_oov)], &r).unwrap();
        assert_eq!(rej[0].1, EvalRule::Oov);

        let (kept, rej) = quality_filter_eval(&[pair(good_src, good_src)], &r).unwrap();
        assert_eq!((kept.len(), rej.len()), (1, 0));

        r.translit_lexicon = ["alpha", "beta", "gamma", "delta"].iter().map(|s| s.to_string()).collect();
        let (_, rej) = quality_filter_eval(&[pair(good_src, good_src)], &r).unwrap();
        assert_eq!(rej[0].1, EvalRule::Transliteration);

        assert!(matches!(quality_filter_eval(&[], &rules(&[])), Err(Error::Config(_))));
    }

    #[test]
    fn steps_pipeline() {
        let opts = PreprocessOptions::with_builtin_table();
        let pairs = vec![pair("\u{201C}ক\u{201D} 1", "\"k\" 1"), pair("\"ক\" 1", "\"k\" 1")];
        let (out, notes) = run_steps(pairs, &[Step::Normalize, Step::Translit, Step::Dedup], &opts);
        assert_eq!(out, [pair("\"ক\" ১", "\"k\" 1")]);
        assert!(notes.is_empty());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn normalize_is_idempotent(s in "\\PC{0,30}") {
                let t = NormalizationTable::builtin();
                let once = t.normalize(&s);
                prop_assert_eq!(t.normalize(&once), once);
            }

            #[test]
            fn normalize_idempotent_on_bengali(s in "[\u{0980}-\u{09FF}\u{200C}\u{200D}\u{201C}\u{2026} a-z]{0,30}") {
                let t = NormalizationTable::builtin();
                let once = t.normalize(&s);
                prop_assert_eq!(t.normalize(&once), once);
            }

            #[test]
            fn translit_preserves_token_count(s in "[a-c0-9()., ক-ঘ]{0,30}") {
                let out = transliterate_dangling(&s, &TranslitMap::default());
                prop_assert_eq!(out.split_whitespace().count(), s.split_whitespace().count());
            }

            #[test]
            fn dedup_idempotent(v in proptest::collection::vec(("[a-c]", "[x-z]"), 0..20)) {
                let pairs: Vec<_> = v.iter().map(|(a, b)| SentencePair::new(a, b).unwrap()).collect();
                let once = dedup(&pairs);
                prop_assert_eq!(dedup(&once), once.clone());
            }

            #[test]
            fn leakage_leaves_no_eval_pair(
                train in proptest::collection::vec(("[a-d]", "[w-z]"), 0..20),
                eval in proptest::collection::vec(("[a-d]", "[w-z]"), 0..6),
                either in any::<bool>(),
            ) {
                let train: Vec<_> = train.iter().map(|(a, b)| SentencePair::new(a, b).unwrap()).collect();
                let eval: Vec<_> = eval.iter().map(|(a, b)| SentencePair::new(a, b).unwrap()).collect();
                let mode = if either { LeakMode::Either } else { LeakMode::Both };
                let (kept, dropped) = remove_leakage(&train, &[eval.clone()], mode);
                prop_assert_eq!(kept.len() + dropped, train.len());
                for k in &kept {
                    for e in &eval {
                        match mode {
                            LeakMode::Both => prop_assert_ne!(k.key(), e.key()),
                            LeakMode::Either => prop_assert!(k.src != e.src && k.tgt != e.tgt),
                        }
                    }
                }
            }
        }
    }
}
