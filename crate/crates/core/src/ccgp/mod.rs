//! Cross-conditional generalization performance.
//!
//! For a label axis and a distinct condition axis, a classifier is trained
//! on the two subgroups sharing one pole of the condition axis and tested on
//! the two subgroups sharing the opposite pole. Every iteration draws a
//! fresh balanced sample of `sample_size` provisions from each of the four
//! subgroups.

pub mod svm;

use std::collections::BTreeMap;

use ndarray::{Array2, Axis as NdAxis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{partition_subgroups, Axis, Corpus, Pole, Space, SubgroupKey};
use crate::error::{Error, Result};
pub use svm::{train_linear_svm, train_linear_svm_with, LinearClassifier, SvmParams};

/// Identifies one train/test condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellSpec {
    pub label_axis: Axis,
    pub condition_axis: Axis,
    pub train_pole: Pole,
}

impl CellSpec {
    /// All 12 cells: 3 label axes × 2 condition axes × 2 directions.
    pub fn all() -> Vec<CellSpec> {
        let mut out = Vec::with_capacity(12);
        for label_axis in Axis::ALL {
            for condition_axis in Axis::ALL {
                if condition_axis == label_axis {
                    continue;
                }
                for train_pole in Pole::BOTH {
                    out.push(CellSpec {
                        label_axis,
                        condition_axis,
                        train_pole,
                    });
                }
            }
        }
        out
    }

    fn code(&self) -> u64 {
        (self.label_axis.index() * 6 + self.condition_axis.index() * 2 + self.train_pole as usize) as u64
    }

    fn key(&self, label: Pole, condition: Pole) -> SubgroupKey {
        SubgroupKey::new((self.label_axis, label), (self.condition_axis, condition))
            .expect("label and condition axes differ")
    }

    /// `[label First, label Second]` subgroups under `condition`.
    fn keys(&self, condition: Pole) -> [SubgroupKey; 2] {
        [self.key(Pole::First, condition), self.key(Pole::Second, condition)]
    }

    pub fn training_set(&self) -> String {
        let [a, b] = self.keys(self.train_pole);
        format!("{a}, {b}")
    }

    pub fn test_set(&self) -> String {
        let [a, b] = self.keys(self.train_pole.opposite());
        format!("{a}, {b}")
    }

    /// e.g. `Ext - Int`.
    pub fn label(&self) -> String {
        format!(
            "{} - {}",
            self.label_axis.pole_name(Pole::First),
            self.label_axis.pole_name(Pole::Second)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcgpCell {
    pub label_axis: Axis,
    pub condition_axis: Axis,
    pub train_condition_pole: Pole,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub n_iterations: usize,
    pub sample_size_per_subgroup: usize,
}

impl CcgpCell {
    pub fn spec(&self) -> CellSpec {
        CellSpec {
            label_axis: self.label_axis,
            condition_axis: self.condition_axis,
            train_pole: self.train_condition_pole,
        }
    }

    pub fn to_row(&self) -> CcgpRow {
        let spec = self.spec();
        CcgpRow {
            training_set: spec.training_set(),
            test_set: spec.test_set(),
            label: spec.label(),
            ccgp_mean: self.mean_accuracy,
            ccgp_std: self.std_accuracy,
            iterations: self.n_iterations,
        }
    }
}

/// Serialized form of a table row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CcgpRow {
    pub training_set: String,
    pub test_set: String,
    pub label: String,
    pub ccgp_mean: f64,
    pub ccgp_std: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcgpParams {
    /// Provisions drawn per subgroup; `None` means the smallest of the 12
    /// subgroups (table) or of the 4 involved subgroups (single cell).
    pub sample_size: Option<usize>,
    /// Resamplings per cell: 100,000 by default here, 1,000 from the CLI.
    pub n_iterations: usize,
    pub c: f64,
    pub seed: u64,
}

impl Default for CcgpParams {
    fn default() -> Self {
        CcgpParams {
            sample_size: None,
            n_iterations: 100_000,
            c: 1.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcgpTable {
    /// Sorted by mean accuracy, descending.
    pub cells: Vec<CcgpCell>,
}

impl CcgpTable {
    pub fn rows(&self) -> Vec<CcgpRow> {
        self.cells.iter().map(CcgpCell::to_row).collect()
    }
}

/// Feature matrix and subgroup membership shared by all cells of a space.
struct Workspace {
    features: Array2<f64>,
    groups: BTreeMap<SubgroupKey, Vec<usize>>,
}

impl Workspace {
    fn new(corpus: &Corpus, space: Space) -> Result<Self> {
        let mut groups = BTreeMap::new();
        for (a, b) in Axis::pairs() {
            groups.extend(partition_subgroups(corpus, a, b)?);
        }
        Ok(Workspace {
            features: corpus.feature_matrix(space),
            groups,
        })
    }

    fn members(&self, key: &SubgroupKey) -> &[usize] {
        &self.groups[key]
    }

    fn check(&self, keys: impl IntoIterator<Item = SubgroupKey>, required: usize) -> Result<()> {
        for key in keys {
            let size = self.members(&key).len();
            if size < required {
                return Err(Error::SubgroupTooSmall {
                    subgroup: key.label(),
                    size,
                    required,
                });
            }
        }
        Ok(())
    }

    fn min_size(&self, keys: impl IntoIterator<Item = SubgroupKey>) -> usize {
        keys.into_iter().map(|k| self.members(&k).len()).min().unwrap_or(0)
    }

    fn cell(&self, spec: CellSpec, sample_size: usize, params: &CcgpParams) -> Result<CcgpCell> {
        if spec.label_axis == spec.condition_axis {
            return Err(Error::SameAxis(spec.label_axis));
        }
        if sample_size == 0 || params.n_iterations == 0 {
            return Err(Error::InvalidParameter(
                "sample size and iteration count must be positive".into(),
            ));
        }
        let train_keys = spec.keys(spec.train_pole);
        let test_keys = spec.keys(spec.train_pole.opposite());
        self.check(train_keys.into_iter().chain(test_keys), sample_size)?;

        let svm = SvmParams {
            c: params.c,
            ..SvmParams::default()
        };
        let labels: Vec<Pole> = [Pole::First, Pole::Second]
            .iter()
            .flat_map(|&p| std::iter::repeat_n(p, sample_size))
            .collect();

        let mut accuracies = Vec::with_capacity(params.n_iterations);
        for it in 0..params.n_iterations {
            let mut rng = iteration_rng(params.seed, spec, it);
            let (train, test) = draw_samples(&mut rng, self, &train_keys, &test_keys, sample_size);
            let x_train = self.features.select(NdAxis(0), &train);
            let x_test = self.features.select(NdAxis(0), &test);
            let clf = train_linear_svm_with(x_train.view(), &labels, &svm, params.seed ^ it as u64)?;
            accuracies.push(clf.accuracy(x_test.view(), &labels));
        }

        let n = accuracies.len() as f64;
        let mean = accuracies.iter().sum::<f64>() / n;
        let var = accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        Ok(CcgpCell {
            label_axis: spec.label_axis,
            condition_axis: spec.condition_axis,
            train_condition_pole: spec.train_pole,
            mean_accuracy: mean,
            std_accuracy: var.sqrt(),
            n_iterations: params.n_iterations,
            sample_size_per_subgroup: sample_size,
        })
    }
}

fn iteration_rng(seed: u64, spec: CellSpec, iteration: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((spec.code() << 48) | iteration as u64);
    rng
}

/// Row indices for one iteration: training rows (label First block, then
/// label Second block) and test rows in the same layout.
fn draw_samples(
    rng: &mut ChaCha8Rng,
    ws: &Workspace,
    train_keys: &[SubgroupKey; 2],
    test_keys: &[SubgroupKey; 2],
    k: usize,
) -> (Vec<usize>, Vec<usize>) {
    let mut draw = |key: &SubgroupKey, out: &mut Vec<usize>| {
        let members = ws.members(key);
        out.extend(index::sample(rng, members.len(), k).into_iter().map(|i| members[i]));
    };
    let mut train = Vec::with_capacity(2 * k);
    let mut test = Vec::with_capacity(2 * k);
    for key in train_keys {
        draw(key, &mut train);
    }
    for key in test_keys {
        draw(key, &mut test);
    }
    (train, test)
}

/// One CCGP cell. With `params.sample_size == None` the smallest of the four
/// involved subgroups sets the sample size.
pub fn ccgp_cell(corpus: &Corpus, space: Space, spec: CellSpec, params: &CcgpParams) -> Result<CcgpCell> {
    if spec.label_axis == spec.condition_axis {
        return Err(Error::SameAxis(spec.label_axis));
    }
    let ws = Workspace::new(corpus, space)?;
    let keys = spec.keys(Pole::First).into_iter().chain(spec.keys(Pole::Second));
    let k = params.sample_size.unwrap_or_else(|| ws.min_size(keys));
    ws.cell(spec, k, params)
}

/// All 12 cells, sorted by mean accuracy descending; ties keep the
/// `(label_axis, condition_axis, train_pole)` order.
pub fn ccgp_table(corpus: &Corpus, space: Space, params: &CcgpParams) -> Result<CcgpTable> {
    let ws = Workspace::new(corpus, space)?;
    let k = params
        .sample_size
        .unwrap_or_else(|| ws.min_size(ws.groups.keys().copied()));
    ws.check(ws.groups.keys().copied(), k.max(1))?;
    let mut cells = CellSpec::all()
        .into_iter()
        .map(|spec| ws.cell(spec, k, params))
        .collect::<Result<Vec<_>>>()?;
    cells.sort_by(|a, b| {
        b.mean_accuracy
            .total_cmp(&a.mean_accuracy)
            .then_with(|| a.spec().cmp(&b.spec()))
    });
    Ok(CcgpTable { cells })
}
