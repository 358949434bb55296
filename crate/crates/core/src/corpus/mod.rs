//! Provision data model.
//!
//! A corpus is a frozen set of provisions. Each provision carries a raw
//! symptom presence vector, a grouped symptom vector derived through the
//! category map, a herb presence vector and three signed pattern scores on
//! the scale -3..=3, where negative scores lean toward the first-named pole
//! (Ext, Cold, Def) and positive scores toward the second (Int, Heat, Exc).

mod bits;
pub mod io;
pub mod synth;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bits::BitVector;
pub use io::{load_corpus, write_corpus, CorpusPaths};
pub use synth::{generate_synthetic, GeneratorSpec};

/// One of the three bipolar pattern axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    ExtInt,
    ColdHeat,
    DefExc,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::ExtInt, Axis::ColdHeat, Axis::DefExc];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Display name, e.g. `Ext-Int`.
    pub fn name(self) -> &'static str {
        match self {
            Axis::ExtInt => "Ext-Int",
            Axis::ColdHeat => "Cold-Heat",
            Axis::DefExc => "Def-Exc",
        }
    }

    /// Field name used in corpus files, e.g. `ext_int`.
    pub fn key(self) -> &'static str {
        match self {
            Axis::ExtInt => "ext_int",
            Axis::ColdHeat => "cold_heat",
            Axis::DefExc => "def_exc",
        }
    }

    pub fn pole_name(self, pole: Pole) -> &'static str {
        match (self, pole) {
            (Axis::ExtInt, Pole::First) => "Ext",
            (Axis::ExtInt, Pole::Second) => "Int",
            (Axis::ColdHeat, Pole::First) => "Cold",
            (Axis::ColdHeat, Pole::Second) => "Heat",
            (Axis::DefExc, Pole::First) => "Def",
            (Axis::DefExc, Pole::Second) => "Exc",
        }
    }

    /// The three unordered axis pairs in canonical order.
    pub fn pairs() -> [(Axis, Axis); 3] {
        [
            (Axis::ExtInt, Axis::ColdHeat),
            (Axis::ExtInt, Axis::DefExc),
            (Axis::ColdHeat, Axis::DefExc),
        ]
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pole {
    /// Ext, Cold or Def.
    First,
    /// Int, Heat or Exc.
    Second,
}

impl Pole {
    pub const BOTH: [Pole; 2] = [Pole::First, Pole::Second];

    pub fn opposite(self) -> Pole {
        match self {
            Pole::First => Pole::Second,
            Pole::Second => Pole::First,
        }
    }

    /// -1 for the first pole, +1 for the second.
    pub fn sign(self) -> f64 {
        match self {
            Pole::First => -1.0,
            Pole::Second => 1.0,
        }
    }
}

pub const MAX_SCORE: i8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PatternScores {
    pub ext_int: i8,
    pub cold_heat: i8,
    pub def_exc: i8,
}

impl PatternScores {
    /// Panics if any score is outside -3..=3; use [`PatternScores::checked`]
    /// for untrusted input.
    pub fn new(ext_int: i8, cold_heat: i8, def_exc: i8) -> Self {
        let s = PatternScores {
            ext_int,
            cold_heat,
            def_exc,
        };
        assert!(
            Axis::ALL.iter().all(|&a| s.get(a).abs() <= MAX_SCORE),
            "pattern score out of range: {s:?}"
        );
        s
    }

    pub fn checked(provision: &str, values: [i64; 3]) -> Result<Self> {
        let mut out = [0i8; 3];
        for (axis, (&v, slot)) in Axis::ALL.iter().zip(values.iter().zip(out.iter_mut())) {
            if v.abs() > MAX_SCORE as i64 {
                return Err(Error::ScoreOutOfRange {
                    provision: provision.to_string(),
                    axis: *axis,
                    value: v.to_string(),
                });
            }
            *slot = v as i8;
        }
        Ok(PatternScores::new(out[0], out[1], out[2]))
    }

    pub fn get(&self, axis: Axis) -> i8 {
        match axis {
            Axis::ExtInt => self.ext_int,
            Axis::ColdHeat => self.cold_heat,
            Axis::DefExc => self.def_exc,
        }
    }

    pub fn as_array(&self) -> [i8; 3] {
        [self.ext_int, self.cold_heat, self.def_exc]
    }
}

/// Sign test on one axis: negative scores give the first pole, positive the
/// second, and a neutral score gives no pole at all.
pub fn binarize(scores: &PatternScores, axis: Axis) -> Option<Pole> {
    match scores.get(axis) {
        s if s < 0 => Some(Pole::First),
        s if s > 0 => Some(Pole::Second),
        _ => None,
    }
}

/// Ordered list of unique tokens; a token's index is its position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

pub type SymptomVocabulary = Vocabulary;
pub type HerbVocabulary = Vocabulary;

impl Vocabulary {
    /// Returns the first duplicated token on failure.
    pub fn new(tokens: Vec<String>) -> std::result::Result<Self, String> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(t.clone());
            }
        }
        Ok(Vocabulary { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, i: usize) -> &str {
        &self.tokens[i]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Assignment of every raw symptom token to exactly one category.
///
/// Tokens without an explicit entry form a singleton category named after
/// themselves. Category indices follow the order in which categories first
/// appear when walking the raw vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryMap {
    assignment: Vec<usize>,
    categories: Vocabulary,
}

impl CategoryMap {
    pub fn identity(raw: &Vocabulary) -> Self {
        CategoryMap {
            assignment: (0..raw.len()).collect(),
            categories: raw.clone(),
        }
    }

    /// Builds the map from explicit `(token, category)` entries. Fails with
    /// the offending token if it is not in `raw` or is listed twice with
    /// different categories.
    pub fn from_entries<'a>(
        raw: &Vocabulary,
        entries: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> std::result::Result<Self, String> {
        let mut explicit: HashMap<usize, &str> = HashMap::new();
        for (token, category) in entries {
            let i = raw.get(token).ok_or_else(|| token.to_string())?;
            if let Some(prev) = explicit.insert(i, category) {
                if prev != category {
                    return Err(token.to_string());
                }
            }
        }
        let mut names: Vec<String> = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let mut assignment = Vec::with_capacity(raw.len());
        for (i, token) in raw.tokens().iter().enumerate() {
            let cat = explicit.get(&i).copied().unwrap_or(token.as_str());
            let next = names.len();
            let g = *seen.entry(cat).or_insert_with(|| {
                names.push(cat.to_string());
                next
            });
            assignment.push(g);
        }
        let categories = Vocabulary::new(names).expect("category names deduplicated above");
        Ok(CategoryMap { assignment, categories })
    }

    pub fn category_of(&self, raw_index: usize) -> usize {
        self.assignment[raw_index]
    }

    pub fn categories(&self) -> &Vocabulary {
        &self.categories
    }

    /// `(raw token, category)` pairs whose category differs from the token.
    pub fn explicit_entries<'a>(&'a self, raw: &'a Vocabulary) -> impl Iterator<Item = (&'a str, &'a str)> {
        raw.tokens().iter().enumerate().filter_map(move |(i, t)| {
            let c = self.categories.token(self.assignment[i]);
            (c != t).then_some((t.as_str(), c))
        })
    }

    /// OR of the raw bits mapped into each category.
    pub fn group(&self, raw: &BitVector) -> BitVector {
        BitVector::from_indices(self.categories.len(), raw.iter_ones().map(|i| self.assignment[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provision {
    pub id: String,
    pub symptoms_raw: BitVector,
    pub symptoms_grouped: BitVector,
    pub herbs: BitVector,
    pub scores: PatternScores,
}

/// Provision before validation against a corpus: raw bits only.
#[derive(Debug, Clone)]
pub struct ProvisionDraft {
    pub id: String,
    pub symptoms: BitVector,
    pub herbs: BitVector,
    pub scores: PatternScores,
}

/// Feature space used by the binary-label analyses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    /// Category-grouped symptom vectors.
    Symptom,
    Herb,
}

impl Space {
    pub fn name(self) -> &'static str {
        match self {
            Space::Symptom => "symptom",
            Space::Herb => "herb",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    provisions: Vec<Provision>,
    symptoms: Vocabulary,
    herbs: Vocabulary,
    categories: CategoryMap,
}

impl Corpus {
    pub fn new(
        symptoms: Vocabulary,
        herbs: Vocabulary,
        categories: CategoryMap,
        drafts: Vec<ProvisionDraft>,
    ) -> Result<Self> {
        if categories.assignment.len() != symptoms.len() {
            return Err(Error::ShapeMismatch(format!(
                "category map covers {} tokens, symptom vocabulary has {}",
                categories.assignment.len(),
                symptoms.len()
            )));
        }
        let mut ids = HashSet::with_capacity(drafts.len());
        let mut provisions = Vec::with_capacity(drafts.len());
        for d in drafts {
            if !ids.insert(d.id.clone()) {
                return Err(Error::DuplicateId(d.id));
            }
            if d.symptoms.len() != symptoms.len() || d.herbs.len() != herbs.len() {
                return Err(Error::ShapeMismatch(format!(
                    "provision {:?} has {} symptom / {} herb bits, vocabularies have {} / {}",
                    d.id,
                    d.symptoms.len(),
                    d.herbs.len(),
                    symptoms.len(),
                    herbs.len()
                )));
            }
            provisions.push(Provision {
                symptoms_grouped: categories.group(&d.symptoms),
                id: d.id,
                symptoms_raw: d.symptoms,
                herbs: d.herbs,
                scores: d.scores,
            });
        }
        Ok(Corpus {
            provisions,
            symptoms,
            herbs,
            categories,
        })
    }

    pub fn provisions(&self) -> &[Provision] {
        &self.provisions
    }

    pub fn len(&self) -> usize {
        self.provisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provisions.is_empty()
    }

    pub fn symptom_vocab(&self) -> &Vocabulary {
        &self.symptoms
    }

    pub fn herb_vocab(&self) -> &Vocabulary {
        &self.herbs
    }

    pub fn category_map(&self) -> &CategoryMap {
        &self.categories
    }

    /// Dimension of `space`.
    pub fn dim(&self, space: Space) -> usize {
        match space {
            Space::Symptom => self.categories.categories().len(),
            Space::Herb => self.herbs.len(),
        }
    }

    pub fn features(&self, index: usize, space: Space) -> &BitVector {
        let p = &self.provisions[index];
        match space {
            Space::Symptom => &p.symptoms_grouped,
            Space::Herb => &p.herbs,
        }
    }

    /// Dense 0/1 matrix of the given space, one row per provision.
    pub fn feature_matrix(&self, space: Space) -> ndarray::Array2<f64> {
        let mut m = ndarray::Array2::zeros((self.len(), self.dim(space)));
        for (i, mut row) in m.rows_mut().into_iter().enumerate() {
            for j in self.features(i, space).iter_ones() {
                row[j] = 1.0;
            }
        }
        m
    }
}

/// Pole assignment on two distinct axes; `first.0 < second.0` always.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubgroupKey {
    pub first: (Axis, Pole),
    pub second: (Axis, Pole),
}

impl SubgroupKey {
    pub fn new(a: (Axis, Pole), b: (Axis, Pole)) -> Result<Self> {
        match a.0.cmp(&b.0) {
            std::cmp::Ordering::Less => Ok(SubgroupKey { first: a, second: b }),
            std::cmp::Ordering::Greater => Ok(SubgroupKey { first: b, second: a }),
            std::cmp::Ordering::Equal => Err(Error::SameAxis(a.0)),
        }
    }

    pub fn pole_on(&self, axis: Axis) -> Option<Pole> {
        [self.first, self.second]
            .into_iter()
            .find(|(a, _)| *a == axis)
            .map(|(_, p)| p)
    }

    /// Pole names joined with `/`, listing Ext-Int before Def-Exc before
    /// Cold-Heat (e.g. `Ext/Heat`, `Def/Cold`).
    pub fn label(&self) -> String {
        let rank = |a: Axis| match a {
            Axis::ExtInt => 0,
            Axis::DefExc => 1,
            Axis::ColdHeat => 2,
        };
        let (x, y) = if rank(self.first.0) <= rank(self.second.0) {
            (self.first, self.second)
        } else {
            (self.second, self.first)
        };
        format!("{}/{}", x.0.pole_name(x.1), y.0.pole_name(y.1))
    }
}

impl fmt::Display for SubgroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Splits provisions by their poles on two axes. All four keys are present
/// in the result; provisions neutral on either axis appear in none.
pub fn partition_subgroups(corpus: &Corpus, axis_a: Axis, axis_b: Axis) -> Result<BTreeMap<SubgroupKey, Vec<usize>>> {
    if axis_a == axis_b {
        return Err(Error::SameAxis(axis_a));
    }
    let mut groups = BTreeMap::new();
    for pa in Pole::BOTH {
        for pb in Pole::BOTH {
            groups.insert(SubgroupKey::new((axis_a, pa), (axis_b, pb))?, Vec::new());
        }
    }
    for (i, p) in corpus.provisions().iter().enumerate() {
        if let (Some(pa), Some(pb)) = (binarize(&p.scores, axis_a), binarize(&p.scores, axis_b)) {
            let key = SubgroupKey::new((axis_a, pa), (axis_b, pb))?;
            groups.get_mut(&key).expect("all keys inserted").push(i);
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_corpus(scores: &[(i8, i8, i8)]) -> Corpus {
        let vs = Vocabulary::new(vec!["a".into(), "b".into()]).unwrap();
        let vh = Vocabulary::new(vec!["h".into()]).unwrap();
        let cm = CategoryMap::identity(&vs);
        let drafts = scores
            .iter()
            .enumerate()
            .map(|(i, &(a, b, c))| ProvisionDraft {
                id: format!("p{i}"),
                symptoms: BitVector::from_indices(2, [i % 2]),
                herbs: BitVector::zeros(1),
                scores: PatternScores::new(a, b, c),
            })
            .collect();
        Corpus::new(vs, vh, cm, drafts).unwrap()
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize(&PatternScores::new(-2, 0, 0), Axis::ExtInt), Some(Pole::First));
        assert_eq!(binarize(&PatternScores::new(0, 1, 1), Axis::ExtInt), None);
        assert_eq!(binarize(&PatternScores::new(0, 0, 3), Axis::DefExc), Some(Pole::Second));
    }

    #[test]
    fn binarize_is_a_sign_test_over_the_whole_scale() {
        for s in -MAX_SCORE..=MAX_SCORE {
            for axis in Axis::ALL {
                let mut v = [0i8; 3];
                v[axis.index()] = s;
                let scores = PatternScores::new(v[0], v[1], v[2]);
                let expect = match s.signum() {
                    -1 => Some(Pole::First),
                    1 => Some(Pole::Second),
                    _ => None,
                };
                assert_eq!(binarize(&scores, axis), expect);
            }
        }
    }

    #[test]
    fn checked_scores_reject_out_of_range() {
        let err = PatternScores::checked("x", [0, 4, 0]).unwrap_err();
        assert!(matches!(
            err,
            Error::ScoreOutOfRange {
                axis: Axis::ColdHeat,
                ..
            }
        ));
        assert!(PatternScores::checked("x", [-3, 3, 0]).is_ok());
    }

    #[test]
    fn partition_assigns_ext_heat() {
        let c = tiny_corpus(&[(-1, 2, 0), (0, 2, 0)]);
        let groups = partition_subgroups(&c, Axis::ExtInt, Axis::ColdHeat).unwrap();
        let key = SubgroupKey::new((Axis::ExtInt, Pole::First), (Axis::ColdHeat, Pole::Second)).unwrap();
        assert_eq!(groups[&key], vec![0]);
        assert_eq!(groups.values().map(Vec::len).sum::<usize>(), 1);
        assert_eq!(key.label(), "Ext/Heat");
    }

    #[test]
    fn partition_rejects_same_axis() {
        let c = tiny_corpus(&[(1, 1, 1)]);
        assert!(matches!(
            partition_subgroups(&c, Axis::DefExc, Axis::DefExc),
            Err(Error::SameAxis(Axis::DefExc))
        ));
    }

    #[test]
    fn partition_covers_all_sign_combinations() {
        // 12 provisions: every (sign, sign) on ExtInt x DefExc three times,
        // with ColdHeat varying so it cannot matter.
        let mut scores = Vec::new();
        for rep in 0..3i8 {
            for a in [-1i8, 2] {
                for c in [-3i8, 1] {
                    scores.push((a, rep - 1, c));
                }
            }
        }
        let corpus = tiny_corpus(&scores);
        let groups = partition_subgroups(&corpus, Axis::DefExc, Axis::ExtInt).unwrap();
        // brute-force expectation
        let mut expected: BTreeMap<(i8, i8), usize> = BTreeMap::new();
        for &(a, _, c) in &scores {
            *expected.entry((a.signum(), c.signum())).or_default() += 1;
        }
        assert_eq!(groups.len(), 4);
        for (key, members) in &groups {
            let ea = key.pole_on(Axis::ExtInt).unwrap().sign() as i8;
            let ec = key.pole_on(Axis::DefExc).unwrap().sign() as i8;
            assert_eq!(members.len(), expected[&(ea, ec)]);
        }
        assert_eq!(groups.values().map(Vec::len).sum::<usize>(), 12);
    }

    #[test]
    fn grouping_ors_category_members() {
        let vs = Vocabulary::new(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let cm = CategoryMap::from_entries(&vs, [("a", "cold"), ("b", "cold")]).unwrap();
        assert_eq!(cm.categories().tokens(), &["cold".to_string(), "c".to_string()]);
        let g = cm.group(&BitVector::from_indices(3, [0, 1]));
        assert_eq!(g.iter_ones().collect::<Vec<_>>(), vec![0]);
        assert_eq!(
            cm.explicit_entries(&vs).collect::<Vec<_>>(),
            vec![("a", "cold"), ("b", "cold")]
        );
    }

    #[test]
    fn category_map_rejects_unknown_and_conflicting_tokens() {
        let vs = Vocabulary::new(vec!["a".into()]).unwrap();
        assert_eq!(CategoryMap::from_entries(&vs, [("z", "x")]).unwrap_err(), "z");
        assert_eq!(
            CategoryMap::from_entries(&vs, [("a", "x"), ("a", "y")]).unwrap_err(),
            "a"
        );
    }

    #[test]
    fn duplicate_ids_rejected() {
        let vs = Vocabulary::new(vec!["a".into()]).unwrap();
        let vh = Vocabulary::new(vec!["h".into()]).unwrap();
        let d = ProvisionDraft {
            id: "same".into(),
            symptoms: BitVector::zeros(1),
            herbs: BitVector::zeros(1),
            scores: PatternScores::default(),
        };
        let err = Corpus::new(vs.clone(), vh, CategoryMap::identity(&vs), vec![d.clone(), d]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "same"));
    }
}
