//! Synthetic corpora with planted pattern structure.
//!
//! Each axis owns a block of designated symptom columns and a block of
//! designated herb columns. For a provision with a pole on that axis, every
//! designated entry copies the pole indicator (1 for the second pole) with
//! probability equal to the axis planting strength and is otherwise drawn
//! from Bernoulli(base_rate). All other entries are Bernoulli(base_rate).
//!
//! Designated symptom tokens are left as singleton categories; the remaining
//! raw tokens are dealt round-robin into the remaining categories.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{binarize, Axis, BitVector, CategoryMap, Corpus, PatternScores, Pole, ProvisionDraft, Vocabulary};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub n_provisions: usize,
    /// Raw symptom vocabulary size.
    pub n_symptoms: usize,
    /// Grouped symptom (category) count.
    pub n_categories: usize,
    pub n_herbs: usize,
    /// Planting strength per axis for symptom columns, indexed by `Axis::index`.
    pub symptom_planting: [f64; 3],
    /// Planting strength per axis for herb columns.
    pub herb_planting: [f64; 3],
    /// Designated symptom columns per axis.
    pub planted_symptoms: usize,
    /// Designated herb columns per axis.
    pub planted_herbs: usize,
    pub base_rate: f64,
    /// Probability that a score is neutral (0) on a given axis.
    pub neutral_rate: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            n_provisions: 242,
            n_symptoms: 702,
            n_categories: 500,
            n_herbs: 170,
            symptom_planting: [0.0; 3],
            herb_planting: [0.0; 3],
            planted_symptoms: 4,
            planted_herbs: 4,
            base_rate: 0.05,
            neutral_rate: 0.1,
        }
    }
}

impl GeneratorSpec {
    /// Sets the same planting strength for symptoms and herbs.
    pub fn with_planting(mut self, beta: [f64; 3]) -> Self {
        self.symptom_planting = beta;
        self.herb_planting = beta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n_provisions == 0 || self.n_symptoms == 0 || self.n_categories == 0 || self.n_herbs == 0 {
            return bad("provision count and vocabulary sizes must be positive".into());
        }
        let probs = self
            .symptom_planting
            .iter()
            .chain(&self.herb_planting)
            .chain([&self.base_rate, &self.neutral_rate]);
        if probs.clone().any(|p| !(0.0..=1.0).contains(p)) {
            return bad(format!("probabilities must lie in [0, 1]: {self:?}"));
        }
        let ks = 3 * self.planted_symptoms;
        if ks > self.n_symptoms {
            return bad(format!(
                "{ks} designated symptoms exceed vocabulary of {}",
                self.n_symptoms
            ));
        }
        if 3 * self.planted_herbs > self.n_herbs {
            return bad(format!(
                "{} designated herbs exceed vocabulary of {}",
                3 * self.planted_herbs,
                self.n_herbs
            ));
        }
        let rest_raw = self.n_symptoms - ks;
        let ok_groups = if rest_raw == 0 {
            self.n_categories == ks
        } else {
            self.n_categories > ks && self.n_categories - ks <= rest_raw
        };
        if !ok_groups {
            return bad(format!(
                "{} categories cannot hold {ks} singleton and {rest_raw} grouped symptoms",
                self.n_categories
            ));
        }
        Ok(())
    }

    /// Raw symptom columns designated for `axis`.
    pub fn symptom_columns(&self, axis: Axis) -> std::ops::Range<usize> {
        let k = self.planted_symptoms;
        axis.index() * k..(axis.index() + 1) * k
    }

    pub fn herb_columns(&self, axis: Axis) -> std::ops::Range<usize> {
        let k = self.planted_herbs;
        axis.index() * k..(axis.index() + 1) * k
    }
}

fn draw_score(rng: &mut ChaCha8Rng, neutral_rate: f64) -> i8 {
    if rng.gen::<f64>() < neutral_rate {
        0
    } else {
        const NONZERO: [i8; 6] = [-3, -2, -1, 1, 2, 3];
        NONZERO[rng.gen_range(0..NONZERO.len())]
    }
}

fn fill(
    rng: &mut ChaCha8Rng,
    bits: &mut BitVector,
    poles: &[Option<Pole>; 3],
    planting: &[f64; 3],
    columns: impl Fn(Axis) -> std::ops::Range<usize>,
    base_rate: f64,
) {
    let mut designated = vec![None; bits.len()];
    for axis in Axis::ALL {
        for j in columns(axis) {
            designated[j] = Some(axis);
        }
    }
    for (j, owner) in designated.into_iter().enumerate() {
        let planted = owner.and_then(|axis| {
            let pole = poles[axis.index()]?;
            (rng.gen::<f64>() < planting[axis.index()]).then_some(pole == Pole::Second)
        });
        let on = planted.unwrap_or_else(|| rng.gen::<f64>() < base_rate);
        if on {
            bits.set(j);
        }
    }
}

/// Deterministic in `(spec, seed)`.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let symptoms = Vocabulary::new((0..spec.n_symptoms).map(|i| format!("s{i:04}")).collect())
        .expect("generated tokens are unique");
    let herbs =
        Vocabulary::new((0..spec.n_herbs).map(|i| format!("h{i:04}")).collect()).expect("generated tokens are unique");

    let ks = 3 * spec.planted_symptoms;
    let grouped = spec.n_categories - ks;
    let cat_names: Vec<String> = (0..grouped).map(|g| format!("c{g:04}")).collect();
    let entries: Vec<(&str, &str)> = (ks..spec.n_symptoms)
        .map(|j| (symptoms.token(j), cat_names[(j - ks) % grouped.max(1)].as_str()))
        .collect();
    let categories = CategoryMap::from_entries(&symptoms, entries).expect("tokens drawn from vocabulary");

    let mut drafts = Vec::with_capacity(spec.n_provisions);
    for i in 0..spec.n_provisions {
        let scores = PatternScores::new(
            draw_score(&mut rng, spec.neutral_rate),
            draw_score(&mut rng, spec.neutral_rate),
            draw_score(&mut rng, spec.neutral_rate),
        );
        let poles = Axis::ALL.map(|a| binarize(&scores, a));

        let mut s = BitVector::zeros(spec.n_symptoms);
        fill(
            &mut rng,
            &mut s,
            &poles,
            &spec.symptom_planting,
            |a| spec.symptom_columns(a),
            spec.base_rate,
        );
        let mut h = BitVector::zeros(spec.n_herbs);
        fill(
            &mut rng,
            &mut h,
            &poles,
            &spec.herb_planting,
            |a| spec.herb_columns(a),
            spec.base_rate,
        );

        drafts.push(ProvisionDraft {
            id: format!("p{i:04}"),
            symptoms: s,
            herbs: h,
            scores,
        });
    }
    Corpus::new(symptoms, herbs, categories, drafts)
}
