//! Class-based n-gram whose object names are copied from the query.
//!
//! Text is read as a sequence of words and *names*: catalog object names,
//! their plurals, and bare head nouns such as "lamp". Each name is one unit.
//! An interpolated n-gram over the class-mapped text (every name replaced by
//! `<obj>`) predicts the class of the next unit, and a name distribution
//!
//! ```text
//! P(n | h) = d * Demo(n | h) + (1 - d) * [ c * Copy(n | h) + (1 - c) * Word(n | h) ]
//! ```
//!
//! picks the name. `Word` is an n-gram over units restricted to names.
//! `Copy` prefers names from the source side of the current record (the
//! tokens before the last anchor) that the target has not written yet,
//! earlier ones first. `Demo` looks up where the target so far occurs in the
//! fitted `source = target` records, weighs each record by the similarity of
//! its source words to the query's, and follows what came next; a name there
//! is mapped through its position among the record's source names to the
//! query's name in the same position. The same lookup is mixed into the class
//! distribution with weight `d`.
//!
//! Token probabilities marginalize over how the trailing words split into
//! names, so each next-token distribution sums to one.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::{Distribution, TokenModel, Vocab};
use super::ngram::{fit_ngram_with_vocab, NGramConfig, NGramModel};
use super::LmError;
use crate::grammar::{plural, ActionType, Catalog};
use crate::tokenize::{Tokenizer, WordTokenizer, SEPARATOR, STOP};

/// Class token standing for any name.
pub const SLOT: &str = "<obj>";

/// Copy weight of a source name the target already contains.
const COVERED_SHARE: f64 = 0.1;

/// Longest target suffix (in units, counting the record start) matched
/// against a demonstration.
const MAX_MATCH: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SlotConfig {
    /// Smoothing for the class and unit n-grams. The anchor marks where a
    /// record's source ends; the window bounds the source in units.
    pub ngram: NGramConfig,
    pub copy_weight: f64,
    /// Each further unwritten source name is copied this much less.
    pub copy_decay: f64,
    /// Share taken from matching demonstrations.
    pub demo_weight: f64,
    /// How sharply demonstrations are preferred by source similarity.
    pub demo_sharpness: f64,
}

impl Default for SlotConfig {
    fn default() -> Self {
        SlotConfig {
            ngram: NGramConfig {
                order: 4,
                weights: vec![0.001, 0.01, 0.04, 0.15, 0.8],
                cache_weight: 0.0,
                cache_window: 40,
                cache_anchor: Some("=".into()),
                unk: true,
            },
            copy_weight: 0.7,
            copy_decay: 0.3,
            demo_weight: 0.7,
            demo_sharpness: 8.0,
        }
    }
}

impl SlotConfig {
    fn validate(&self) -> Result<(), LmError> {
        let bad = |msg: String| Err(LmError::InvalidSmoothing(msg));
        if !(0.0..=1.0).contains(&self.copy_weight) {
            return bad(format!("copy_weight must lie in [0, 1], got {}", self.copy_weight));
        }
        if !(self.copy_decay > 0.0 && self.copy_decay <= 1.0) {
            return bad(format!("copy_decay must lie in (0, 1], got {}", self.copy_decay));
        }
        if !(0.0..1.0).contains(&self.demo_weight) {
            return bad(format!("demo_weight must lie in [0, 1), got {}", self.demo_weight));
        }
        if !(self.demo_sharpness.is_finite() && self.demo_sharpness >= 0.0) {
            return bad("demo_sharpness must be finite and non-negative".into());
        }
        if self.ngram.cache_weight > 0.0 {
            return bad("the class model takes no cache; copying replaces it".into());
        }
        Ok(())
    }
}

/// How a name in a target relates to a source name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    Same,
    Plural,
    Head,
    HeadPlural,
}

#[derive(Debug, Clone)]
struct Name {
    toks: Vec<String>,
    /// The singular this name inflects (itself for singulars).
    lemma: usize,
    plural: bool,
    /// A catalog display name, as opposed to a derived form.
    catalog: bool,
    /// For a bare head noun: the catalog names it can stand for.
    heads_to: Vec<usize>,
    plural_form: Option<usize>,
    head_form: Option<usize>,
}

#[derive(Debug, Clone, Default)]
struct Names {
    list: Vec<Name>,
    index: HashMap<Vec<String>, usize>,
    members: BTreeSet<String>,
    max_len: usize,
}

impl Names {
    fn add(&mut self, toks: Vec<String>, lemma: Option<usize>, plural: bool) -> usize {
        if let Some(&i) = self.index.get(&toks) {
            return i;
        }
        let i = self.list.len();
        self.max_len = self.max_len.max(toks.len());
        self.members.extend(toks.iter().cloned());
        self.index.insert(toks.clone(), i);
        self.list.push(Name {
            toks,
            lemma: lemma.unwrap_or(i),
            plural,
            catalog: false,
            heads_to: Vec::new(),
            plural_form: None,
            head_form: None,
        });
        i
    }

    /// Catalog names, their plurals, bare heads of multi-word names with
    /// plurals, and every object word on its own.
    fn build(catalog: &Catalog, reserved: &BTreeSet<String>) -> Result<Self, LmError> {
        let mut n = Names::default();
        let displays: Vec<Vec<String>> = catalog.iter().map(|o| WordTokenizer.encode(&o.display)).collect();
        for d in &displays {
            if let Some(t) = d.iter().find(|t| reserved.contains(*t)) {
                return Err(LmError::Vocabulary(format!("object word `{t}` is also a grammar word")));
            }
            let i = n.add(d.clone(), None, false);
            n.list[i].catalog = true;
        }
        let ids: Vec<usize> = displays.iter().map(|d| n.index[d]).collect();
        for (d, &id) in displays.iter().zip(&ids) {
            let p = n.add(WordTokenizer.encode(&plural(&d.join(" "))), Some(id), true);
            if p != id && n.list[id].plural_form.is_none() {
                n.list[id].plural_form = Some(p);
            }
        }
        for (d, &id) in displays.iter().zip(&ids) {
            let [.., last] = d.as_slice() else { continue };
            if d.len() < 2 {
                continue;
            }
            let h = n.add(vec![last.clone()], None, false);
            n.list[h].heads_to.push(id);
            n.list[id].head_form = Some(h);
            let hp = n.add(WordTokenizer.encode(&plural(last)), Some(h), true);
            if hp != h {
                n.list[h].plural_form = Some(hp);
            }
        }
        for w in n.members.clone() {
            n.add(vec![w], None, false);
        }
        Ok(n)
    }

    fn is_member(&self, tok: &str) -> bool {
        self.members.contains(tok)
    }

    fn relation(&self, u: usize, source_lemma: usize) -> Option<Form> {
        let name = &self.list[u];
        if name.lemma == source_lemma {
            Some(if name.plural { Form::Plural } else { Form::Same })
        } else if self.list[name.lemma].heads_to.contains(&source_lemma) {
            Some(if name.plural { Form::HeadPlural } else { Form::Head })
        } else {
            None
        }
    }

    fn apply(&self, form: Form, q: usize) -> usize {
        let base = self.list[q].lemma;
        let plural_of = |i: usize| self.list[i].plural_form.unwrap_or(i);
        let head_of = |i: usize| self.list[i].head_form.unwrap_or(i);
        match form {
            Form::Same => base,
            Form::Plural => plural_of(base),
            Form::Head => head_of(base),
            Form::HeadPlural => plural_of(head_of(base)),
        }
    }

    fn covers(&self, written: usize, source: usize) -> bool {
        written == source
            || self.list[source].heads_to.contains(&written)
            || self.list[written].heads_to.contains(&source)
    }

    /// What a name can refer to: a head noun stands for the names it ends
    /// (and itself, if it is a catalog name too). Once the target has
    /// written one of them, that reading sticks.
    fn referents(&self, l: usize, written: &[usize]) -> Vec<usize> {
        let name = &self.list[l];
        if name.heads_to.is_empty() {
            return vec![l];
        }
        let mut all = name.heads_to.clone();
        if name.catalog {
            all.push(l);
        }
        match written.iter().rev().find(|w| all.contains(w)) {
            Some(&w) => vec![w],
            None => all,
        }
    }

    /// Adds copy weight `w` for source name `s` over its referents; a
    /// plural shares with its singular.
    fn spread(&self, s: usize, w: f64, written: &[usize], out: &mut [f64]) {
        let l = self.list[s].lemma;
        let w = if l != s {
            out[s] += 0.5 * w;
            0.5 * w
        } else {
            w
        };
        let refs = self.referents(l, written);
        for &r in &refs {
            out[r] += w / refs.len() as f64;
        }
    }

    /// Splits tokens into words and names, longest name first.
    fn segment<'a>(&self, toks: &[&'a str]) -> Vec<Unit<'a>> {
        let mut out = Vec::with_capacity(toks.len());
        let mut i = 0;
        while i < toks.len() {
            if !self.is_member(toks[i]) {
                out.push(Unit::Word(toks[i]));
                i += 1;
                continue;
            }
            let longest = (1..=self.max_len.min(toks.len() - i)).rev().find_map(|l| {
                let key: Vec<String> = toks[i..i + l].iter().map(|t| t.to_string()).collect();
                self.index.get(&key).map(|&n| (n, l))
            });
            let (n, l) = longest.expect("every object word is a name");
            out.push(Unit::Name(n));
            i += l;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit<'a> {
    Word(&'a str),
    Name(usize),
}

/// Source and target of the record being completed, in units.
struct Record<'u, 'a> {
    source: &'u [Unit<'a>],
    target: &'u [Unit<'a>],
}

fn current_record<'u, 'a>(units: &'u [Unit<'a>], anchor: &str, window: usize) -> Option<Record<'u, 'a>> {
    let end = units.iter().rposition(|u| *u == Unit::Word(anchor))?;
    let mut start = end;
    while start > 0 && end - start < window {
        let u = units[start - 1];
        // A stop marker right before the anchor ends the source itself.
        if u == Unit::Word(anchor) || (u == Unit::Word(STOP) && start != end) {
            break;
        }
        start -= 1;
    }
    Some(Record {
        source: &units[start..end],
        target: &units[end + 1..],
    })
}

fn written_lemmas(names: &Names, target: &[Unit]) -> Vec<usize> {
    target
        .iter()
        .filter_map(|u| match u {
            Unit::Name(n) => Some(names.list[*n].lemma),
            Unit::Word(_) => None,
        })
        .collect()
}

fn source_words(source: &[Unit]) -> Vec<String> {
    source
        .iter()
        .filter_map(|u| match u {
            Unit::Word(w) => Some(w.to_string()),
            Unit::Name(_) => None,
        })
        .collect()
}

/// Distinct lemmas of the names in `source`, in order of first mention.
fn source_lemmas(names: &Names, source: &[Unit]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for u in source {
        if let Unit::Name(n) = u {
            let l = names.list[*n].lemma;
            if !out.contains(&l) {
                out.push(l);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
struct DemoRecord {
    /// Unit-norm IDF weights of the source words, sorted by word.
    words: Vec<(String, f64)>,
    lemmas: Vec<usize>,
    /// Target as class ids, with the name behind each slot.
    target: Vec<(u32, Option<usize>)>,
}

#[derive(Debug, Clone, Default)]
struct Demos {
    records: Vec<DemoRecord>,
    idf: HashMap<String, f64>,
    sharpness: f64,
}

/// Unit-norm IDF weights of the distinct words of `words`, sorted by word.
fn weigh(words: &[String], idf: &HashMap<String, f64>) -> Vec<(String, f64)> {
    let set: BTreeSet<&String> = words.iter().collect();
    let mut v: Vec<(String, f64)> = set
        .into_iter()
        .filter_map(|w| idf.get(w).map(|&x| (w.clone(), x)))
        .collect();
    let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|(_, x)| *x /= norm);
    }
    v
}

fn cosine(a: &[(String, f64)], b: &[(String, f64)]) -> f64 {
    let (mut i, mut j, mut s) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                s += a[i].1 * b[j].1;
                i += 1;
                j += 1;
            }
        }
    }
    s
}

/// What the demonstrations predict next: a class distribution and, when
/// some continuation is a name, a name distribution.
struct DemoPrediction {
    classes: Vec<f64>,
    names: Option<Vec<f64>>,
}

impl Demos {
    fn next(
        &self,
        names: &Names,
        slot: u32,
        record: &Record,
        target: &[u32],
        n_classes: usize,
    ) -> Option<DemoPrediction> {
        if self.records.is_empty() {
            return None;
        }
        let q = weigh(&source_words(record.source), &self.idf);
        let query_lemmas = source_lemmas(names, record.source);
        let written = written_lemmas(names, record.target);
        let sims: Vec<f64> = self
            .records
            .iter()
            .map(|r| (self.sharpness * cosine(&q, &r.words)).exp())
            .collect();
        for k in (1..=MAX_MATCH.min(target.len() + 1)).rev() {
            let suffix = &target[target.len() + 1 - k..];
            let at_start = suffix.len() == target.len();
            let mut classes = vec![0.0; n_classes];
            let mut name_dist = vec![0.0; names.list.len()];
            let (mut total, mut name_total) = (0.0, 0.0);
            for (r, &s) in self.records.iter().zip(&sims) {
                let lo = suffix.len();
                let hi = if at_start { lo + 1 } else { r.target.len() };
                for j in lo..hi.min(r.target.len()) {
                    if !r.target[j - lo..j].iter().map(|(c, _)| *c).eq(suffix.iter().copied()) {
                        continue;
                    }
                    let (c, name) = r.target[j];
                    classes[c as usize] += s;
                    total += s;
                    if let (true, Some(u)) = (c == slot, name) {
                        // Names absent from the demonstration's source are
                        // part of its template and carry over unchanged.
                        let pointed = r.lemmas.iter().enumerate().find_map(|(i, &l)| {
                            let form = names.relation(u, l)?;
                            Some((form, query_lemmas.get(i)))
                        });
                        let (form, q) = match pointed {
                            None => (Form::Same, u),
                            Some((_, None)) => continue,
                            Some((form, Some(&q))) => (form, q),
                        };
                        match form {
                            Form::Same | Form::Plural => {
                                let refs = names.referents(names.list[q].lemma, &written);
                                for &r in &refs {
                                    name_dist[names.apply(form, r)] += s / refs.len() as f64;
                                }
                            }
                            _ => name_dist[names.apply(form, q)] += s,
                        }
                        name_total += s;
                    }
                }
            }
            if total > 0.0 {
                classes.iter_mut().for_each(|x| *x /= total);
                let names = (name_total > 0.0).then(|| {
                    name_dist.iter_mut().for_each(|x| *x /= name_total);
                    name_dist
                });
                return Some(DemoPrediction { classes, names });
            }
        }
        None
    }
}

#[derive(Debug, Clone)]
pub struct SlotModel {
    names: Names,
    classes: NGramModel,
    /// Class-model id of [`SLOT`].
    slot: u32,
    /// Unit-level model; names appear as `<nI>`.
    units: NGramModel,
    /// Unit-model id of each name.
    name_unit: Vec<u32>,
    vocab: Arc<Vocab>,
    /// Full-vocabulary id of each class-model token; `None` for the slot.
    class_to_full: Vec<Option<u32>>,
    demos: Demos,
    anchor: Option<String>,
    window: usize,
    order: usize,
    copy_weight: f64,
    copy_decay: f64,
    demo_weight: f64,
}

fn unit_token(i: usize) -> String {
    format!("<n{i}>")
}

/// Fits the model on `corpus`. Every grammar word is in the vocabulary.
pub fn fit_slot_model<S: AsRef<str>>(
    corpus: &[S],
    catalog: &Catalog,
    cfg: &SlotConfig,
) -> Result<SlotModel, LmError> {
    cfg.validate()?;
    let mut reserved: BTreeSet<String> = [SEPARATOR, STOP, SLOT].iter().map(|s| s.to_string()).collect();
    for a in ActionType::ALL {
        reserved.extend(WordTokenizer.encode(a.phrase()));
    }
    if let Some(a) = &cfg.ngram.cache_anchor {
        reserved.insert(a.clone());
    }
    let names = Names::build(catalog, &reserved)?;

    let tokenized: Vec<Vec<String>> = corpus.iter().map(|t| WordTokenizer.encode(t.as_ref())).collect();
    let segmented: Vec<Vec<Unit>> = tokenized
        .iter()
        .map(|toks| names.segment(&toks.iter().map(String::as_str).collect::<Vec<_>>()))
        .collect();
    let render = |units: &[Unit], name: &dyn Fn(usize) -> String| -> String {
        units
            .iter()
            .map(|u| match u {
                Unit::Word(w) => w.to_string(),
                Unit::Name(n) => name(*n),
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    let class_corpus: Vec<String> = segmented.iter().map(|u| render(u, &|_| SLOT.to_string())).collect();
    let unit_corpus: Vec<String> = segmented.iter().map(|u| render(u, &unit_token)).collect();

    let classes = fit_ngram_with_vocab(&class_corpus, reserved.iter().cloned(), &cfg.ngram)?;
    let slot = classes.vocab().id(SLOT).expect("slot is reserved");
    let unit_extra = reserved.iter().cloned().chain((0..names.list.len()).map(unit_token));
    let units = fit_ngram_with_vocab(&unit_corpus, unit_extra, &cfg.ngram)?;
    let name_unit = (0..names.list.len())
        .map(|i| units.vocab().id(&unit_token(i)).expect("every name is a unit"))
        .collect();

    let mut vocab = Vocab::default();
    let class_to_full = classes
        .vocab()
        .tokens()
        .iter()
        .map(|t| (t != SLOT).then(|| vocab.insert(t.clone())))
        .collect();
    for m in &names.members {
        vocab.insert(m.clone());
    }

    let demos = match &cfg.ngram.cache_anchor {
        Some(anchor) => {
            let mut raw = Vec::new();
            for units_of in &segmented {
                let Some(a) = units_of.iter().position(|u| *u == Unit::Word(anchor)) else { continue };
                let (src, tgt) = (&units_of[..a], &units_of[a + 1..]);
                let target = tgt
                    .iter()
                    .map(|u| match u {
                        Unit::Word(w) => (classes.vocab().id(w).expect("corpus word is in the vocabulary"), None),
                        Unit::Name(n) => (slot, Some(*n)),
                    })
                    .collect();
                raw.push((source_words(src), source_lemmas(&names, src), target));
            }
            let n = raw.len() as f64;
            let mut df: HashMap<String, f64> = HashMap::new();
            for (words, _, _) in &raw {
                for w in words.iter().collect::<BTreeSet<_>>() {
                    *df.entry(w.clone()).or_default() += 1.0;
                }
            }
            let idf: HashMap<String, f64> = df.into_iter().map(|(w, d)| (w, (1.0 + n / d).ln())).collect();
            let records = raw
                .into_iter()
                .map(|(words, lemmas, target)| DemoRecord {
                    words: weigh(&words, &idf),
                    lemmas,
                    target,
                })
                .collect();
            Demos {
                records,
                idf,
                sharpness: cfg.demo_sharpness,
            }
        }
        None => Demos::default(),
    };

    Ok(SlotModel {
        names,
        classes,
        slot,
        units,
        name_unit,
        vocab: Arc::new(vocab),
        class_to_full,
        demos,
        anchor: cfg.ngram.cache_anchor.clone(),
        window: cfg.ngram.cache_window,
        order: cfg.ngram.order,
        copy_weight: cfg.copy_weight,
        copy_decay: cfg.copy_decay,
        demo_weight: cfg.demo_weight,
    })
}

impl SlotModel {
    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn full_id(&self, tok: &str) -> usize {
        self.vocab.id(tok).expect("name words are in the vocabulary") as usize
    }

    /// Copy distribution over names, or `None` without source names.
    fn copy(&self, record: &Record) -> Option<Vec<f64>> {
        let all_written = written_lemmas(&self.names, record.target);
        let mut written = all_written.clone();
        let mut out = vec![0.0; self.names.list.len()];
        let mut rank = 0;
        let mut any = false;
        for u in record.source {
            let Unit::Name(s) = *u else { continue };
            any = true;
            let l = self.names.list[s].lemma;
            let w = match written.iter().position(|&t| self.names.covers(t, l)) {
                Some(k) => {
                    written.swap_remove(k);
                    COVERED_SHARE
                }
                None => {
                    rank += 1;
                    self.copy_decay.powi(rank - 1)
                }
            };
            self.names.spread(s, w, &all_written, &mut out);
        }
        if !any {
            return None;
        }
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= z);
        Some(out)
    }

    /// Class and name distributions of the unit after `units`.
    fn next_unit(&self, units: &[Unit]) -> (Vec<f64>, Vec<f64>) {
        let class_ctx: Vec<&str> = units
            .iter()
            .map(|u| match u {
                Unit::Word(w) => *w,
                Unit::Name(_) => SLOT,
            })
            .collect();
        let mut pc = self.classes.probabilities(&class_ctx);

        let keep = units.len().saturating_sub(self.order);
        let unit_strings: Vec<String> = units[keep..]
            .iter()
            .map(|u| match u {
                Unit::Word(w) => w.to_string(),
                Unit::Name(n) => unit_token(*n),
            })
            .collect();
        let unit_ctx: Vec<&str> = unit_strings.iter().map(String::as_str).collect();
        let pu = self.units.probabilities(&unit_ctx);
        let mut pn: Vec<f64> = self.name_unit.iter().map(|&i| pu[i as usize]).collect();
        let z: f64 = pn.iter().sum();
        pn.iter_mut().for_each(|x| *x /= z);

        let record = self
            .anchor
            .as_deref()
            .and_then(|a| current_record(units, a, self.window));
        let Some(record) = record else { return (pc, pn) };
        if let Some(copy) = self.copy(&record) {
            let c = self.copy_weight;
            for (x, y) in pn.iter_mut().zip(copy) {
                *x = (1.0 - c) * *x + c * y;
            }
        }
        if self.demo_weight > 0.0 {
            let target: Vec<u32> = record
                .target
                .iter()
                .map(|u| match u {
                    Unit::Word(w) => self.classes.vocab().id(w).unwrap_or(u32::MAX),
                    Unit::Name(_) => self.slot,
                })
                .collect();
            if let Some(pred) = self.demos.next(&self.names, self.slot, &record, &target, pc.len()) {
                let d = self.demo_weight;
                for (x, y) in pc.iter_mut().zip(pred.classes) {
                    *x = (1.0 - d) * *x + d * y;
                }
                if let Some(dn) = pred.names {
                    for (x, y) in pn.iter_mut().zip(dn) {
                        *x = (1.0 - d) * *x + d * y;
                    }
                }
            }
        }
        (pc, pn)
    }

    /// Adds `scale` times the next-token distribution at a unit boundary.
    fn emit(&self, units: &[Unit], scale: f64, p: &mut [f64]) {
        let (pc, pn) = self.next_unit(units);
        for (c, full) in self.class_to_full.iter().enumerate() {
            if let Some(f) = full {
                p[*f as usize] += scale * pc[c];
            }
        }
        let slot_mass = scale * pc[self.slot as usize];
        for (name, q) in self.names.list.iter().zip(pn) {
            p[self.full_id(&name.toks[0])] += slot_mass * q;
        }
    }

    /// Probabilities (not logs) over the full vocabulary.
    pub fn probabilities(&self, context: &[&str]) -> Vec<f64> {
        // Only the current record and its predecessor's tail matter.
        let start = match &self.anchor {
            Some(a) => {
                let mut anchors = context.iter().enumerate().rev().filter(|(_, t)| *t == a);
                match (anchors.next(), anchors.next()) {
                    (Some(_), Some((prev, _))) => prev + 1,
                    _ => 0,
                }
            }
            None => {
                let mut s = context.len().saturating_sub(4 * self.order);
                while s < context.len() && self.names.is_member(context[s]) {
                    s += 1;
                }
                s
            }
        };
        let units = self.names.segment(&context[start..]);
        let mut p = vec![0.0; self.vocab.len()];
        match units.last() {
            Some(&Unit::Name(last)) => {
                // The trailing name may go on: split between continuing it
                // and ending it here.
                let prefix = &units[..units.len() - 1];
                let (_, pn) = self.next_unit(prefix);
                let head = &self.names.list[last].toks;
                let mut z = 0.0;
                for (name, &q) in self.names.list.iter().zip(&pn) {
                    if name.toks.starts_with(head) {
                        z += q;
                    }
                }
                for (name, &q) in self.names.list.iter().zip(&pn) {
                    if name.toks.len() > head.len() && name.toks.starts_with(head) {
                        p[self.full_id(&name.toks[head.len()])] += q / z;
                    }
                }
                self.emit(&units, pn[last] / z, &mut p);
            }
            _ => self.emit(&units, 1.0, &mut p),
        }
        p
    }
}

impl TokenModel for SlotModel {
    fn tokenizer(&self) -> &dyn Tokenizer {
        &WordTokenizer
    }

    fn next_logprobs(&self, context: &[&str]) -> Result<Distribution, LmError> {
        let logp = self.probabilities(context).into_iter().map(f64::ln).collect();
        Ok(Distribution::new(self.vocab.clone(), logp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::score_continuation;

    fn cfg(copy: f64, demo: f64) -> SlotConfig {
        SlotConfig {
            copy_weight: copy,
            demo_weight: demo,
            ..SlotConfig::default()
        }
    }

    const CORPUS: [&str; 4] = [
        "put a clean mug in the cabinet = pick up mug, clean in sink, put in cabinet.",
        "move the apple to the fridge = pick up apple, put in fridge.",
        "pick up mug, clean in sink, put in cabinet. = put a clean mug in the cabinet",
        "pick up apple, put in fridge. = move the apple to the fridge",
    ];

    fn model(copy: f64, demo: f64) -> SlotModel {
        fit_slot_model(&CORPUS, &Catalog::builtin(), &cfg(copy, demo)).unwrap()
    }

    fn toks(s: &str) -> Vec<String> {
        WordTokenizer.encode(s)
    }

    fn dist(m: &SlotModel, ctx: &str) -> Distribution {
        let t = toks(ctx);
        let refs: Vec<&str> = t.iter().map(String::as_str).collect();
        m.next_logprobs(&refs).unwrap()
    }

    #[test]
    fn normalized() {
        let m = model(0.7, 0.5);
        for ctx in [
            "",
            "put two apples in the fridge =",
            "heat the butter knife = pick up butter",
            "turn on the desk lamp = pick up desk",
            "zzz = pick",
            "pick up salt shaker. = put the salt",
        ] {
            let s: f64 = m.probabilities(&toks(ctx).iter().map(String::as_str).collect::<Vec<_>>()).iter().sum();
            assert!((s - 1.0).abs() < 1e-9, "{ctx:?}: {s}");
        }
    }

    #[test]
    fn copies_the_query_object() {
        let ctx = "put a clean cup in the cabinet = pick up";
        let d = dist(&model(0.7, 0.0), ctx);
        assert!(d.get("cup").unwrap() > d.get("mug").unwrap());
        let plain = dist(&model(0.0, 0.0), ctx);
        assert!(plain.get("cup").unwrap() < plain.get("mug").unwrap());
    }

    #[test]
    fn unwritten_source_names_come_first() {
        let d = dist(&model(0.7, 0.0), "move the bowl to the shelf = pick up bowl, put in");
        assert!(d.get("shelf").unwrap() > d.get("bowl").unwrap());
    }

    #[test]
    fn plural_copies_to_singular() {
        let d = dist(&model(0.7, 0.0), "move two knives to the desk = pick up");
        assert!(d.get("knife").unwrap() > d.get("fork").unwrap());
    }

    #[test]
    fn head_noun_points_at_its_names() {
        let m = model(0.7, 0.0);
        let d = dist(&m, "turn on the lamp = turn on");
        for w in ["desk", "floor"] {
            assert!(d.get(w).unwrap() > d.get("apple").unwrap(), "{w}");
        }
        let d = dist(&m, "turn on the lamp = turn on floor");
        assert!(d.get("lamp").unwrap() > 0.5f64.ln());
    }

    #[test]
    fn demonstration_picks_the_template() {
        let m = model(0.7, 0.5);
        let d = dist(&m, "put a clean cup in the shelf = pick up cup,");
        assert!(d.get("clean").unwrap() > d.get("put").unwrap());
        let d = dist(&m, "put a clean cup in the shelf = pick up cup, clean in");
        assert!(d.get("sink").unwrap() > d.get("shelf").unwrap());
    }

    #[test]
    fn every_grammar_word_scores() {
        let m = model(0.7, 0.5);
        let s = score_continuation(&m, "turn on the lamp = ", "turn on floor lamp, slice butter knife.").unwrap();
        assert!(s.is_finite() && s < 0.0);
    }
}
