//! The multi-label method family: independent classifiers, classifier
//! chains and their ensembles, Bayesian classifier chains over learned
//! structures, and the classifier trellis / dependency trellis.
//!
//! Training always conditions on ground-truth parent or neighbor labels;
//! prediction feeds back the predicted ones (greedy inference), except
//! for the dependency trellis which samples.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{gibbs_sample, marginal_map, GibbsConfig};
use crate::learner::{train_binary, LinearModel, SgdConfig};
use crate::structure::{
    build_trellis, mutual_information_matrix, parse_adjacency_text, spanning_tree_structure,
    to_adjacency_text, DirectedStructure, ParentPattern,
};
use crate::util::derive_seed;

/// Per-prediction options; only the dependency trellis reads them.
#[derive(Debug, Clone, Default)]
pub struct PredictOptions {
    pub gibbs: GibbsConfig,
}

/// One independent classifier per label.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentModel {
    classifiers: Vec<LinearModel>,
    d: usize,
}

impl IndependentModel {
    pub fn l(&self) -> usize {
        self.classifiers.len()
    }

    pub fn classifiers(&self) -> &[LinearModel] {
        &self.classifiers
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        check_arity(x, self.d)?;
        self.classifiers
            .iter()
            .map(|c| Ok((c.predict_proba(x)? > 0.5) as u8))
            .collect()
    }
}

/// A classifier chain: classifier `j` sees the features plus the labels
/// at the `j` earlier chain positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    order: Vec<usize>,
    classifiers: Vec<LinearModel>,
    d: usize,
}

impl ChainModel {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn classifiers(&self) -> &[LinearModel] {
        &self.classifiers
    }

    pub fn l(&self) -> usize {
        self.order.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        check_arity(x, self.d)?;
        let l = self.order.len();
        let mut prediction = vec![0u8; l];
        let mut input = Vec::with_capacity(self.d + l);
        input.extend_from_slice(x);
        for (j, &label) in self.order.iter().enumerate() {
            let p = self.classifiers[j].predict_proba(&input)?;
            let bit = (p > 0.5) as u8;
            prediction[label] = bit;
            input.push(bit as f64);
        }
        Ok(prediction)
    }
}

/// Per-label classifiers conditioned on the parents of a DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredModel {
    structure: DirectedStructure,
    classifiers: Vec<LinearModel>,
    d: usize,
}

impl StructuredModel {
    pub fn from_parts(
        structure: DirectedStructure,
        classifiers: Vec<LinearModel>,
        d: usize,
    ) -> Result<Self> {
        if classifiers.len() != structure.l() {
            return Err(Error::input("classifier count does not match label count"));
        }
        for (label, c) in classifiers.iter().enumerate() {
            let expected = d + structure.parents()[label].len();
            if c.d_in() != expected {
                return Err(Error::input(format!(
                    "classifier {label} has arity {}, expected {expected}",
                    c.d_in()
                )));
            }
        }
        Ok(Self {
            structure,
            classifiers,
            d,
        })
    }

    pub fn structure(&self) -> &DirectedStructure {
        &self.structure
    }

    pub fn classifiers(&self) -> &[LinearModel] {
        &self.classifiers
    }

    pub fn l(&self) -> usize {
        self.structure.l()
    }

    /// `p(y_label = 1 | parents from state, x)`.
    pub fn conditional(&self, label: usize, x: &[f64], state: &[u8]) -> Result<f64> {
        let input = augment(x, state, &self.structure.parents()[label]);
        self.classifiers[label].predict_proba(&input)
    }

    /// Greedy prediction in topological order.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<u8>> {
        check_arity(x, self.d)?;
        let mut state = vec![0u8; self.structure.l()];
        for &label in self.structure.topo_order() {
            let p = self.conditional(label, x, &state)?;
            state[label] = (p > 0.5) as u8;
        }
        Ok(state)
    }
}

/// Per-label classifiers conditioned on an undirected neighborhood;
/// inference is by Gibbs sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyModel {
    neighbors: Vec<Vec<usize>>,
    classifiers: Vec<LinearModel>,
    d: usize,
}

impl DependencyModel {
    pub fn from_parts(
        neighbors: Vec<Vec<usize>>,
        classifiers: Vec<LinearModel>,
        d: usize,
    ) -> Result<Self> {
        let l = neighbors.len();
        for (label, ns) in neighbors.iter().enumerate() {
            for &n in ns {
                if n >= l {
                    return Err(Error::input("neighbor index out of range"));
                }
                if n == label {
                    return Err(Error::input("a label cannot neighbor itself"));
                }
                if !neighbors[n].contains(&label) {
                    return Err(Error::input("neighbor relation must be symmetric"));
                }
            }
        }
        if classifiers.len() != l {
            return Err(Error::input("classifier count does not match label count"));
        }
        for (label, c) in classifiers.iter().enumerate() {
            let expected = d + neighbors[label].len();
            if c.d_in() != expected {
                return Err(Error::input(format!(
                    "classifier {label} has arity {}, expected {expected}",
                    c.d_in()
                )));
            }
        }
        Ok(Self {
            neighbors,
            classifiers,
            d,
        })
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn classifiers(&self) -> &[LinearModel] {
        &self.classifiers
    }

    pub fn l(&self) -> usize {
        self.neighbors.len()
    }

    /// `p(y_label = 1 | neighbors from state, x)`.
    pub fn conditional(&self, label: usize, x: &[f64], state: &[u8]) -> Result<f64> {
        let input = augment(x, state, &self.neighbors[label]);
        self.classifiers[label].predict_proba(&input)
    }
}

/// Majority-vote ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    members: Vec<MultiLabelModel>,
    vote_threshold: f64,
}

impl EnsembleModel {
    pub fn new(members: Vec<MultiLabelModel>, vote_threshold: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::config("ensemble needs at least one member"));
        }
        if !(vote_threshold > 0.0 && vote_threshold < 1.0) {
            return Err(Error::config("vote threshold must lie in (0,1)"));
        }
        Ok(Self {
            members,
            vote_threshold,
        })
    }

    pub fn members(&self) -> &[MultiLabelModel] {
        &self.members
    }

    pub fn vote_threshold(&self) -> f64 {
        self.vote_threshold
    }

    /// Label is set iff the fraction of members voting 1 strictly exceeds
    /// the threshold; exact ties fall to 0.
    pub fn predict(&self, x: &[f64], options: &PredictOptions) -> Result<Vec<u8>> {
        let l = self.members[0].l();
        let mut votes = vec![0usize; l];
        for member in &self.members {
            for (acc, bit) in votes.iter_mut().zip(member.predict(x, options)?) {
                *acc += bit as usize;
            }
        }
        let m = self.members.len() as f64;
        Ok(votes
            .iter()
            .map(|&v| (v as f64 / m > self.vote_threshold) as u8)
            .collect())
    }
}

/// Any trained multi-label predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiLabelModel {
    Independent(IndependentModel),
    Chain(ChainModel),
    Structured(StructuredModel),
    Dependency(DependencyModel),
    Ensemble(EnsembleModel),
}

impl MultiLabelModel {
    pub fn l(&self) -> usize {
        match self {
            MultiLabelModel::Independent(m) => m.l(),
            MultiLabelModel::Chain(m) => m.l(),
            MultiLabelModel::Structured(m) => m.l(),
            MultiLabelModel::Dependency(m) => m.l(),
            MultiLabelModel::Ensemble(m) => m.members[0].l(),
        }
    }

    pub fn predict(&self, x: &[f64], options: &PredictOptions) -> Result<Vec<u8>> {
        match self {
            MultiLabelModel::Independent(m) => m.predict(x),
            MultiLabelModel::Chain(m) => m.predict(x),
            MultiLabelModel::Structured(m) => m.predict(x),
            MultiLabelModel::Dependency(m) => predict_cdt(
                m,
                x,
                options.gibbs.t_total,
                options.gibbs.t_burn,
                options.gibbs.seed,
            ),
            MultiLabelModel::Ensemble(m) => m.predict(x, options),
        }
    }
}

fn check_arity(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return Err(Error::input(format!(
            "expected {d} features, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// Feature vector extended with the given label bits from `state`.
fn augment(x: &[f64], state: &[u8], extras: &[usize]) -> Vec<f64> {
    let mut input = Vec::with_capacity(x.len() + extras.len());
    input.extend_from_slice(x);
    input.extend(extras.iter().map(|&j| state[j] as f64));
    input
}

/// Training matrix for one label: features plus the true values of the
/// `extras` labels, row by row.
fn augmented_training_matrix(dataset: &Dataset, extras: &[usize]) -> Vec<f64> {
    let n = dataset.n();
    let mut out = Vec::with_capacity(n * (dataset.d() + extras.len()));
    for i in 0..n {
        out.extend_from_slice(dataset.feature_row(i));
        let row = dataset.labels().row(i);
        out.extend(extras.iter().map(|&j| row[j] as f64));
    }
    out
}

fn targets_of(dataset: &Dataset, label: usize) -> Vec<u8> {
    (0..dataset.n())
        .map(|i| dataset.labels().get(i, label))
        .collect()
}

/// Trains one conditional classifier per label, in parallel, each on the
/// features plus the true values of its `extras(label)` labels. Each
/// label trains with a seed derived from the base seed and its own index,
/// so the result is independent of scheduling.
fn train_per_label(
    dataset: &Dataset,
    base: &SgdConfig,
    extras: impl Fn(usize) -> Vec<usize> + Sync,
) -> Result<Vec<LinearModel>> {
    (0..dataset.l())
        .into_par_iter()
        .map(|label| {
            let ex = extras(label);
            let matrix = augmented_training_matrix(dataset, &ex);
            let cfg = base.with_seed(derive_seed(base.seed, label as u64));
            train_binary(
                &matrix,
                dataset.n(),
                dataset.d() + ex.len(),
                &targets_of(dataset, label),
                &cfg,
            )
        })
        .collect()
}

/// L independent classifiers on the features only.
pub fn train_ic(dataset: &Dataset, base: &SgdConfig) -> Result<IndependentModel> {
    let classifiers = train_per_label(dataset, base, |_| Vec::new())?;
    Ok(IndependentModel {
        classifiers,
        d: dataset.d(),
    })
}

/// A classifier chain along the given label order; classifier `j` trains
/// on the features plus the true values of the `j` preceding labels.
pub fn train_cc(dataset: &Dataset, order: &[usize], base: &SgdConfig) -> Result<ChainModel> {
    let l = dataset.l();
    if order.len() != l {
        return Err(Error::input("chain order length does not match label count"));
    }
    let mut seen = vec![false; l];
    for &label in order {
        if label >= l || seen[label] {
            return Err(Error::input("chain order is not a permutation"));
        }
        seen[label] = true;
    }
    let classifiers: Vec<LinearModel> = (0..l)
        .into_par_iter()
        .map(|j| {
            let extras = &order[..j];
            let matrix = augmented_training_matrix(dataset, extras);
            let cfg = base.with_seed(derive_seed(base.seed, order[j] as u64));
            train_binary(
                &matrix,
                dataset.n(),
                dataset.d() + j,
                &targets_of(dataset, order[j]),
                &cfg,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainModel {
        order: order.to_vec(),
        classifiers,
        d: dataset.d(),
    })
}

/// Greedy chain prediction; each label is thresholded at 0.5 given the
/// already-predicted earlier labels.
pub fn predict_cc(model: &ChainModel, x: &[f64]) -> Result<Vec<u8>> {
    model.predict(x)
}

fn random_order(l: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..l).collect();
    order.shuffle(rng);
    order
}

/// Ensemble of `m` chains with seeded random orders, majority vote.
pub fn train_ensemble_cc(
    dataset: &Dataset,
    m: usize,
    base: &SgdConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    if m < 1 {
        return Err(Error::config("ensemble size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orders: Vec<Vec<usize>> = (0..m).map(|_| random_order(dataset.l(), &mut rng)).collect();
    let members = orders
        .iter()
        .map(|order| Ok(MultiLabelModel::Chain(train_cc(dataset, order, base)?)))
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(members, 0.5)
}

/// Majority vote of the ensemble members.
pub fn predict_vote(ensemble: &EnsembleModel, x: &[f64]) -> Result<Vec<u8>> {
    ensemble.predict(x, &PredictOptions::default())
}

/// Trains `m` random-order chains and keeps the one with the best exact
/// match on the training set (ties keep the earliest member).
pub fn select_mcc(dataset: &Dataset, m: usize, base: &SgdConfig, seed: u64) -> Result<ChainModel> {
    if m < 1 {
        return Err(Error::config("candidate count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(ChainModel, f64)> = None;
    for _ in 0..m {
        let order = random_order(dataset.l(), &mut rng);
        let chain = train_cc(dataset, &order, base)?;
        let mut exact = 0usize;
        for i in 0..dataset.n() {
            if chain.predict(dataset.feature_row(i))? == dataset.labels().row(i) {
                exact += 1;
            }
        }
        let payoff = exact as f64 / dataset.n() as f64;
        match &best {
            Some((_, score)) if payoff <= *score => {}
            _ => best = Some((chain, payoff)),
        }
    }
    Ok(best.expect("m >= 1").0)
}

/// Bayesian classifier chain: classifier `l` trains on the features plus
/// the true values of its parents in the structure.
pub fn train_bcc(
    dataset: &Dataset,
    structure: &DirectedStructure,
    base: &SgdConfig,
) -> Result<StructuredModel> {
    if structure.l() != dataset.l() {
        return Err(Error::input("structure label count does not match dataset"));
    }
    let classifiers = train_per_label(dataset, base, |label| structure.parents()[label].clone())?;
    StructuredModel::from_parts(structure.clone(), classifiers, dataset.d())
}

/// Greedy prediction in topological order given predicted parents.
pub fn predict_structured(model: &StructuredModel, x: &[f64]) -> Result<Vec<u8>> {
    model.predict(x)
}

/// Classifier trellis: places the labels into a fixed-width lattice by
/// the MI hill climb, then trains a Bayesian classifier chain on it.
pub fn train_ct(
    dataset: &Dataset,
    width: usize,
    pattern: ParentPattern,
    base: &SgdConfig,
    seed: u64,
) -> Result<StructuredModel> {
    let mi = mutual_information_matrix(dataset.labels());
    let trellis = build_trellis(&mi, width, pattern, seed)?;
    train_bcc(dataset, &trellis.to_directed(), base)
}

/// Ensemble of `m` classifier trellises built from distinct seeds
/// (`seed + i`), majority vote.
pub fn train_ect(
    dataset: &Dataset,
    m: usize,
    width: usize,
    pattern: ParentPattern,
    base: &SgdConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    if m < 1 {
        return Err(Error::config("ensemble size must be at least 1"));
    }
    let mi = mutual_information_matrix(dataset.labels());
    let members = (0..m)
        .map(|i| {
            let trellis = build_trellis(&mi, width, pattern, seed.wrapping_add(i as u64))?;
            let model = train_bcc(dataset, &trellis.to_directed(), base)?;
            Ok(MultiLabelModel::Structured(model))
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(members, 0.5)
}

/// Ensemble of `min(m, L)` Bayesian classifier chains over maximum
/// spanning trees of the label MI, each rooted by a distinct seed.
pub fn train_ebcc(
    dataset: &Dataset,
    m: usize,
    base: &SgdConfig,
    seed: u64,
) -> Result<EnsembleModel> {
    if m < 1 {
        return Err(Error::config("ensemble size must be at least 1"));
    }
    let members_count = m.min(dataset.l());
    let mi = mutual_information_matrix(dataset.labels());
    let members = (0..members_count)
        .map(|i| {
            let structure = spanning_tree_structure(&mi, seed.wrapping_add(i as u64));
            Ok(MultiLabelModel::Structured(train_bcc(dataset, &structure, base)?))
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleModel::new(members, 0.5)
}

/// Classifier dependency trellis: builds the trellis, drops directionality
/// (each label neighbors its trellis parents and children), and trains
/// each classifier on the features plus all true neighbor labels.
pub fn train_cdt(
    dataset: &Dataset,
    width: usize,
    base: &SgdConfig,
    seed: u64,
) -> Result<DependencyModel> {
    let mi = mutual_information_matrix(dataset.labels());
    let trellis = build_trellis(&mi, width, ParentPattern::LeftAbove, seed)?;
    let neighbors = trellis.neighbor_sets();
    let classifiers = train_per_label(dataset, base, |label| neighbors[label].clone())?;
    DependencyModel::from_parts(neighbors, classifiers, dataset.d())
}

/// Gibbs-based prediction for a dependency model: per-label posterior
/// means over the retained sweeps, thresholded at 0.5.
pub fn predict_cdt(
    model: &DependencyModel,
    x: &[f64],
    t_total: usize,
    t_burn: usize,
    seed: u64,
) -> Result<Vec<u8>> {
    let config = GibbsConfig::new(t_total, t_burn, seed)?;
    let means = gibbs_sample(model, x, &config)?;
    Ok(marginal_map(&means))
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    kind: String,
    d: usize,
    l: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vote_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<usize>,
}

fn write_classifiers(dir: &Path, classifiers: &[LinearModel]) -> Result<()> {
    for (i, c) in classifiers.iter().enumerate() {
        fs::write(dir.join(format!("label_{i}.json")), c.to_json())?;
    }
    Ok(())
}

fn read_classifiers(dir: &Path, l: usize) -> Result<Vec<LinearModel>> {
    (0..l)
        .map(|i| {
            let text = fs::read_to_string(dir.join(format!("label_{i}.json")))?;
            LinearModel::from_json(&text)
        })
        .collect()
}

/// Saves a trained model as a directory of per-label classifier records
/// plus a structure file in the adjacency-list format.
pub fn save_bundle(model: &MultiLabelModel, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let manifest = match model {
        MultiLabelModel::Independent(m) => {
            write_classifiers(dir, &m.classifiers)?;
            BundleManifest {
                kind: "ic".into(),
                d: m.d,
                l: m.l(),
                order: None,
                vote_threshold: None,
                members: None,
            }
        }
        MultiLabelModel::Chain(m) => {
            write_classifiers(dir, &m.classifiers)?;
            BundleManifest {
                kind: "cc".into(),
                d: m.d,
                l: m.l(),
                order: Some(m.order.clone()),
                vote_threshold: None,
                members: None,
            }
        }
        MultiLabelModel::Structured(m) => {
            write_classifiers(dir, &m.classifiers)?;
            fs::write(dir.join("structure.txt"), to_adjacency_text(&m.structure))?;
            BundleManifest {
                kind: "structured".into(),
                d: m.d,
                l: m.l(),
                order: Some(m.structure.topo_order().to_vec()),
                vote_threshold: None,
                members: None,
            }
        }
        MultiLabelModel::Dependency(m) => {
            write_classifiers(dir, &m.classifiers)?;
            let mut text = String::new();
            for (label, ns) in m.neighbors.iter().enumerate() {
                let joined: Vec<String> = ns.iter().map(ToString::to_string).collect();
                text.push_str(&format!("{label}: {}\n", joined.join(",")));
            }
            fs::write(dir.join("neighbors.txt"), text)?;
            BundleManifest {
                kind: "dependency".into(),
                d: m.d,
                l: m.l(),
                order: None,
                vote_threshold: None,
                members: None,
            }
        }
        MultiLabelModel::Ensemble(m) => {
            for (i, member) in m.members.iter().enumerate() {
                save_bundle(member, dir.join(format!("member_{i}")))?;
            }
            BundleManifest {
                kind: "ensemble".into(),
                d: 0,
                l: m.members[0].l(),
                order: None,
                vote_threshold: Some(m.vote_threshold),
                members: Some(m.members.len()),
            }
        }
    };
    let manifest_text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::input(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join("manifest.json"), manifest_text)?;
    Ok(())
}

/// Loads a model bundle written by [`save_bundle`].
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<MultiLabelModel> {
    let dir = dir.as_ref();
    let manifest: BundleManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)
            .map_err(|e| Error::input(format!("invalid bundle manifest: {e}")))?;
    match manifest.kind.as_str() {
        "ic" => Ok(MultiLabelModel::Independent(IndependentModel {
            classifiers: read_classifiers(dir, manifest.l)?,
            d: manifest.d,
        })),
        "cc" => Ok(MultiLabelModel::Chain(ChainModel {
            order: manifest
                .order
                .ok_or_else(|| Error::input("chain bundle is missing its order"))?,
            classifiers: read_classifiers(dir, manifest.l)?,
            d: manifest.d,
        })),
        "structured" => {
            let parents = parse_adjacency_text(&fs::read_to_string(dir.join("structure.txt"))?)?;
            let structure = match manifest.order {
                Some(order) => DirectedStructure::new(parents.parents().to_vec(), order)?,
                None => parents,
            };
            Ok(MultiLabelModel::Structured(StructuredModel::from_parts(
                structure,
                read_classifiers(dir, manifest.l)?,
                manifest.d,
            )?))
        }
        "dependency" => {
            let text = fs::read_to_string(dir.join("neighbors.txt"))?;
            let mut neighbors = vec![Vec::new(); manifest.l];
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() {
                    continue;
                }
                let (label, rest) = line
                    .split_once(':')
                    .ok_or_else(|| Error::parse(idx + 1, "expected `label: neighbors`"))?;
                let label: usize = label
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(idx + 1, "invalid label index"))?;
                if label >= manifest.l {
                    return Err(Error::parse(idx + 1, "label index out of range"));
                }
                for tok in rest.split(',') {
                    let tok = tok.trim();
                    if !tok.is_empty() {
                        neighbors[label].push(
                            tok.parse()
                                .map_err(|_| Error::parse(idx + 1, "invalid neighbor index"))?,
                        );
                    }
                }
            }
            Ok(MultiLabelModel::Dependency(DependencyModel::from_parts(
                neighbors,
                read_classifiers(dir, manifest.l)?,
                manifest.d,
            )?))
        }
        "ensemble" => {
            let count = manifest
                .members
                .ok_or_else(|| Error::input("ensemble bundle is missing member count"))?;
            let members = (0..count)
                .map(|i| load_bundle(dir.join(format!("member_{i}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(MultiLabelModel::Ensemble(EnsembleModel::new(
                members,
                manifest.vote_threshold.unwrap_or(0.5),
            )?))
        }
        other => Err(Error::input(format!("unknown bundle kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelMatrix;
    use crate::structure::default_trellis_width;

    fn coin_dataset(n: usize, seed: u64) -> Dataset {
        // One noise feature; y0 a fair-ish coin, y1 = y0, y2 independent.
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            features.push(vec![rng.random::<f64>() - 0.5]);
            let a = rng.random::<bool>() as u8;
            let c = rng.random::<bool>() as u8;
            labels.push(vec![a, a, c]);
        }
        Dataset::from_rows(&features, &labels).unwrap()
    }

    fn separable_dataset(n: usize) -> Dataset {
        // y0 = [x0 > 0], y1 = y0: perfectly learnable.
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let x = if i % 2 == 0 { 1.5 } else { -1.5 };
            features.push(vec![x]);
            let bit = (x > 0.0) as u8;
            labels.push(vec![bit, bit]);
        }
        Dataset::from_rows(&features, &labels).unwrap()
    }

    #[test]
    fn ic_single_label_equals_train_binary() {
        let ds = separable_dataset(20);
        let one = ds.subset(&(0..20).collect::<Vec<_>>()).unwrap();
        let ic = train_ic(&one, &SgdConfig::default()).unwrap();
        let flat: Vec<f64> = (0..one.n()).flat_map(|i| one.feature_row(i).to_vec()).collect();
        let targets: Vec<u8> = (0..one.n()).map(|i| one.labels().get(i, 0)).collect();
        let cfg = SgdConfig::default().with_seed(derive_seed(0, 0));
        let direct = train_binary(&flat, one.n(), 1, &targets, &cfg).unwrap();
        assert_eq!(ic.classifiers()[0], direct);
    }

    #[test]
    fn ic_predicts_majority_when_labels_ignore_features() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            features.push(vec![rng.random::<f64>() - 0.5]);
            labels.push(vec![(i % 5 != 0) as u8, (i % 5 == 0) as u8]);
        }
        let ds = Dataset::from_rows(&features, &labels).unwrap();
        let ic = train_ic(&ds, &SgdConfig::default()).unwrap();
        for x in [[-0.4], [0.0], [0.4]] {
            assert_eq!(ic.predict(&x).unwrap(), vec![1, 0]);
        }
    }

    #[test]
    fn ic_training_is_deterministic() {
        let ds = coin_dataset(60, 9);
        let a = train_ic(&ds, &SgdConfig::default()).unwrap();
        let b = train_ic(&ds, &SgdConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cc_rejects_non_permutations() {
        let ds = coin_dataset(10, 1);
        assert!(train_cc(&ds, &[0, 1], &SgdConfig::default()).is_err());
        assert!(train_cc(&ds, &[0, 1, 1], &SgdConfig::default()).is_err());
    }

    #[test]
    fn cc_arities_grow_along_the_chain() {
        let ds = coin_dataset(30, 2);
        let chain = train_cc(&ds, &[2, 0, 1], &SgdConfig::default()).unwrap();
        let arities: Vec<usize> = chain.classifiers().iter().map(|c| c.d_in()).collect();
        assert_eq!(arities, vec![1, 2, 3]);
    }

    #[test]
    fn cc_copies_a_duplicated_label_through_the_chain() {
        let ds = coin_dataset(300, 3);
        let chain = train_cc(&ds, &[0, 1, 2], &SgdConfig::default()).unwrap();
        // Classifier for y1 sees the true y0 and should copy it.
        let mut correct = 0;
        for i in 0..ds.n() {
            let mut input = ds.feature_row(i).to_vec();
            input.push(ds.labels().get(i, 0) as f64);
            let p = chain.classifiers()[1].predict_proba(&input).unwrap();
            if (p > 0.5) as u8 == ds.labels().get(i, 1) {
                correct += 1;
            }
        }
        assert_eq!(correct, ds.n());
        // And prediction propagates the copy.
        for x in [[-0.3], [0.2]] {
            let y = chain.predict(&x).unwrap();
            assert_eq!(y[0], y[1]);
        }
    }

    #[test]
    fn all_half_probabilities_predict_zero() {
        let chain = ChainModel {
            order: vec![0, 1],
            classifiers: vec![
                LinearModel::new(vec![0.0], 0.0),
                LinearModel::new(vec![0.0, 0.0], 0.0),
            ],
            d: 1,
        };
        assert_eq!(chain.predict(&[3.0]).unwrap(), vec![0, 0]);
    }

    #[test]
    fn ensemble_of_one_behaves_like_its_chain() {
        let ds = separable_dataset(40);
        let ensemble = train_ensemble_cc(&ds, 1, &SgdConfig::default(), 5).unwrap();
        let MultiLabelModel::Chain(member) = &ensemble.members()[0] else {
            panic!("expected a chain member");
        };
        let rebuilt = train_cc(&ds, member.order(), &SgdConfig::default()).unwrap();
        assert_eq!(member, &rebuilt);
        for x in [[1.5], [-1.5]] {
            assert_eq!(
                predict_vote(&ensemble, &x).unwrap(),
                member.predict(&x).unwrap()
            );
        }
    }

    #[test]
    fn ensemble_training_is_deterministic() {
        let ds = coin_dataset(50, 6);
        let a = train_ensemble_cc(&ds, 3, &SgdConfig::default(), 7).unwrap();
        let b = train_ensemble_cc(&ds, 3, &SgdConfig::default(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ensemble_member_orders_vary() {
        let ds = coin_dataset(30, 8);
        let ensemble = train_ensemble_cc(&ds, 6, &SgdConfig::default(), 11).unwrap();
        let orders: std::collections::BTreeSet<Vec<usize>> = ensemble
            .members()
            .iter()
            .map(|m| match m {
                MultiLabelModel::Chain(c) => c.order().to_vec(),
                _ => unreachable!(),
            })
            .collect();
        assert!(orders.len() > 1);
    }

    #[test]
    fn vote_counts_follow_the_majority_rule() {
        let constant = |bit: u8| {
            MultiLabelModel::Independent(IndependentModel {
                classifiers: vec![LinearModel::new(vec![0.0], if bit == 1 { 10.0 } else { -10.0 })],
                d: 1,
            })
        };
        // M=2 split vote: tie falls to 0.
        let split = EnsembleModel::new(vec![constant(1), constant(0)], 0.5).unwrap();
        assert_eq!(predict_vote(&split, &[0.0]).unwrap(), vec![0]);
        // M=3, two in favor: 1.
        let majority = EnsembleModel::new(vec![constant(1), constant(1), constant(0)], 0.5).unwrap();
        assert_eq!(predict_vote(&majority, &[0.0]).unwrap(), vec![1]);
        // Unanimous members return the member prediction.
        let unanimous = EnsembleModel::new(vec![constant(1), constant(1)], 0.5).unwrap();
        assert_eq!(predict_vote(&unanimous, &[0.0]).unwrap(), vec![1]);
    }

    #[test]
    fn mcc_selects_a_perfect_member() {
        let ds = separable_dataset(40);
        let chain = select_mcc(&ds, 4, &SgdConfig::default(), 3).unwrap();
        let mut exact = 0;
        for i in 0..ds.n() {
            if chain.predict(ds.feature_row(i)).unwrap() == ds.labels().row(i) {
                exact += 1;
            }
        }
        assert_eq!(exact, ds.n());
        // Reproducible selection.
        let again = select_mcc(&ds, 4, &SgdConfig::default(), 3).unwrap();
        assert_eq!(chain, again);
    }

    #[test]
    fn mcc_of_one_matches_the_first_ensemble_member() {
        let ds = coin_dataset(40, 10);
        let mcc = select_mcc(&ds, 1, &SgdConfig::default(), 9).unwrap();
        let ecc = train_ensemble_cc(&ds, 1, &SgdConfig::default(), 9).unwrap();
        let MultiLabelModel::Chain(member) = &ecc.members()[0] else {
            panic!()
        };
        assert_eq!(&mcc, member);
    }

    #[test]
    fn bcc_with_empty_structure_equals_ic() {
        let ds = coin_dataset(60, 12);
        let bcc = train_bcc(&ds, &DirectedStructure::empty(3), &SgdConfig::default()).unwrap();
        let ic = train_ic(&ds, &SgdConfig::default()).unwrap();
        assert_eq!(bcc.classifiers(), ic.classifiers());
    }

    #[test]
    fn bcc_with_full_lower_triangle_equals_cc_in_identity_order() {
        let ds = coin_dataset(60, 13);
        let parents: Vec<Vec<usize>> = (0..3).map(|j| (0..j).collect()).collect();
        let structure = DirectedStructure::from_parents(parents).unwrap();
        let bcc = train_bcc(&ds, &structure, &SgdConfig::default()).unwrap();
        let cc = train_cc(&ds, &[0, 1, 2], &SgdConfig::default()).unwrap();
        for label in 0..3 {
            assert_eq!(bcc.classifiers()[label], cc.classifiers()[label]);
        }
        for x in [[-0.2], [0.0], [0.4]] {
            assert_eq!(bcc.predict(&x).unwrap(), cc.predict(&x).unwrap());
        }
    }

    #[test]
    fn spanning_tree_bcc_has_single_parent_arities() {
        let ds = coin_dataset(60, 14);
        let mi = mutual_information_matrix(ds.labels());
        let tree = spanning_tree_structure(&mi, 2);
        let bcc = train_bcc(&ds, &tree, &SgdConfig::default()).unwrap();
        let root = tree.topo_order()[0];
        for (label, c) in bcc.classifiers().iter().enumerate() {
            let expected = if label == root { 1 } else { 2 };
            assert_eq!(c.d_in(), expected);
        }
    }

    #[test]
    fn structured_arity_matches_parent_counts() {
        let ds = coin_dataset(60, 15);
        let ct = train_ct(&ds, 2, ParentPattern::LeftAbove, &SgdConfig::default(), 3).unwrap();
        for (label, c) in ct.classifiers().iter().enumerate() {
            assert_eq!(c.d_in(), 1 + ct.structure().parents()[label].len());
        }
        // left+above never exceeds two parents.
        assert!(ct.classifiers().iter().all(|c| c.d_in() <= 3));
    }

    #[test]
    fn ct_places_strongly_dependent_labels_adjacently() {
        for seed in [0u64, 1, 2, 3] {
            let ds = coin_dataset(500, 20 + seed);
            let ct = train_ct(&ds, 2, ParentPattern::LeftAbove, &SgdConfig::default(), seed).unwrap();
            let edges = ct.structure().undirected_edges();
            assert!(edges.contains(&(0, 1)), "seed {seed}: edges {edges:?}");
        }
    }

    #[test]
    fn ct_on_single_label_is_a_lone_classifier() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..30 {
            features.push(vec![i as f64 / 30.0 - 0.5]);
            labels.push(vec![(i % 2) as u8]);
        }
        let ds = Dataset::from_rows(&features, &labels).unwrap();
        let ct = train_ct(&ds, 1, ParentPattern::LeftAbove, &SgdConfig::default(), 0).unwrap();
        let ic = train_ic(&ds, &SgdConfig::default()).unwrap();
        assert_eq!(ct.classifiers(), ic.classifiers());
    }

    #[test]
    fn ect_of_one_equals_ct_with_the_same_seed() {
        let ds = coin_dataset(50, 16);
        let ect = train_ect(&ds, 1, 2, ParentPattern::LeftAbove, &SgdConfig::default(), 21).unwrap();
        let ct = train_ct(&ds, 2, ParentPattern::LeftAbove, &SgdConfig::default(), 21).unwrap();
        let MultiLabelModel::Structured(member) = &ect.members()[0] else {
            panic!()
        };
        assert_eq!(member, &ct);
    }

    #[test]
    fn ect_member_structures_differ_across_seeds() {
        let ds = coin_dataset(120, 17);
        let ect = train_ect(&ds, 5, 2, ParentPattern::LeftAbove, &SgdConfig::default(), 0).unwrap();
        let orders: std::collections::BTreeSet<Vec<usize>> = ect
            .members()
            .iter()
            .map(|m| match m {
                MultiLabelModel::Structured(s) => s.structure().topo_order().to_vec(),
                _ => unreachable!(),
            })
            .collect();
        assert!(orders.len() > 1);
    }

    #[test]
    fn ebcc_caps_members_at_label_count() {
        let ds = coin_dataset(40, 18);
        let ebcc = train_ebcc(&ds, 10, &SgdConfig::default(), 1).unwrap();
        assert_eq!(ebcc.members().len(), 3);
    }

    #[test]
    fn cdt_neighbors_are_symmetric_and_interior_nodes_have_four() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..120 {
            features.push(vec![rng.random::<f64>()]);
            labels.push((0..9).map(|_| rng.random::<bool>() as u8).collect());
        }
        let ds = Dataset::from_rows(&features, &labels).unwrap();
        assert_eq!(default_trellis_width(9), 3);
        let cdt = train_cdt(&ds, 3, &SgdConfig::default(), 5).unwrap();
        for (label, ns) in cdt.neighbors().iter().enumerate() {
            for &n in ns {
                assert!(cdt.neighbors()[n].contains(&label));
            }
        }
        // The label in the middle of the 3x3 lattice has 4 neighbors.
        let sizes: Vec<usize> = cdt.neighbors().iter().map(Vec::len).collect();
        assert!(sizes.contains(&4), "sizes {sizes:?}");
        assert_eq!(sizes.iter().filter(|&&s| s == 4).count(), 1);
        for (label, c) in cdt.classifiers().iter().enumerate() {
            assert_eq!(c.d_in(), 1 + cdt.neighbors()[label].len());
        }
    }

    #[test]
    fn cdt_on_single_label_has_no_neighbors() {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            features.push(vec![i as f64]);
            labels.push(vec![(i % 2) as u8]);
        }
        let ds = Dataset::from_rows(&features, &labels).unwrap();
        let cdt = train_cdt(&ds, 1, &SgdConfig::default(), 0).unwrap();
        assert!(cdt.neighbors()[0].is_empty());
    }

    #[test]
    fn predict_cdt_is_deterministic_and_validates_burn_in() {
        let model = DependencyModel::from_parts(
            vec![vec![1], vec![0]],
            vec![
                LinearModel::new(vec![0.0, 0.6], -0.2),
                LinearModel::new(vec![0.0, -0.4], 0.1),
            ],
            1,
        )
        .unwrap();
        assert!(predict_cdt(&model, &[0.0], 10, 10, 0).is_err());
        let a = predict_cdt(&model, &[0.0], 200, 20, 3).unwrap();
        let b = predict_cdt(&model, &[0.0], 200, 20, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn structured_prediction_equals_chain_prediction_on_equivalent_models() {
        let ds = coin_dataset(80, 19);
        let parents: Vec<Vec<usize>> = (0..3).map(|j| (0..j).collect()).collect();
        let structure = DirectedStructure::from_parents(parents).unwrap();
        let bcc = train_bcc(&ds, &structure, &SgdConfig::default()).unwrap();
        let cc = train_cc(&ds, &[0, 1, 2], &SgdConfig::default()).unwrap();
        for i in 0..10 {
            let x = [i as f64 / 10.0 - 0.5];
            assert_eq!(
                predict_structured(&bcc, &x).unwrap(),
                predict_cc(&cc, &x).unwrap()
            );
        }
    }

    #[test]
    fn bundle_round_trips_every_model_kind() {
        let ds = coin_dataset(40, 31);
        let dir = tempfile::tempdir().unwrap();
        let models: Vec<(&str, MultiLabelModel)> = vec![
            ("ic", MultiLabelModel::Independent(train_ic(&ds, &SgdConfig::default()).unwrap())),
            (
                "cc",
                MultiLabelModel::Chain(train_cc(&ds, &[2, 0, 1], &SgdConfig::default()).unwrap()),
            ),
            (
                "ct",
                MultiLabelModel::Structured(
                    train_ct(&ds, 2, ParentPattern::LeftAbove, &SgdConfig::default(), 1).unwrap(),
                ),
            ),
            (
                "cdt",
                MultiLabelModel::Dependency(train_cdt(&ds, 2, &SgdConfig::default(), 1).unwrap()),
            ),
            (
                "ecc",
                MultiLabelModel::Ensemble(
                    train_ensemble_cc(&ds, 2, &SgdConfig::default(), 1).unwrap(),
                ),
            ),
        ];
        for (name, model) in models {
            let path = dir.path().join(name);
            save_bundle(&model, &path).unwrap();
            let back = load_bundle(&path).unwrap();
            assert_eq!(back, model, "bundle kind {name}");
        }
    }

    #[test]
    fn label_matrix_row_equality_helper() {
        // Guards the `predict == labels().row(i)` comparisons above.
        let m = LabelMatrix::from_rows(&[vec![1, 0]]).unwrap();
        assert_eq!(m.row(0), &[1, 0][..]);
    }
}
