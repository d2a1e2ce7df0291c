//! Label-dependence discovery: the pairwise mutual-information matrix,
//! trellis construction by hill climbing, marginal (co-occurrence) and
//! conditional (residual-error) graph learning, spanning-tree structures,
//! and graph-recovery scoring.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, GroundTruthGraph, LabelMatrix};
use crate::error::{Error, Result};
use crate::learner::{train_binary, SgdConfig};
use crate::util::derive_seed;

/// Symmetric L x L matrix of pairwise mutual information in nats,
/// with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MiMatrix {
    l: usize,
    values: Vec<f64>, // row-major L x L
}

impl MiMatrix {
    pub fn new(l: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != l * l {
            return Err(Error::input("mutual-information matrix has wrong length"));
        }
        for i in 0..l {
            if values[i * l + i] != 0.0 {
                return Err(Error::input("mutual-information diagonal must be zero"));
            }
            for j in (i + 1)..l {
                let a = values[i * l + j];
                let b = values[j * l + i];
                if a != b {
                    return Err(Error::input("mutual-information matrix must be symmetric"));
                }
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::input("mutual information must be finite and nonnegative"));
                }
            }
        }
        Ok(Self { l, values })
    }

    /// Builds a matrix from a symmetric generator function. The diagonal
    /// is forced to zero; `f` is evaluated once per unordered pair.
    pub fn from_fn(l: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; l * l];
        for i in 0..l {
            for j in (i + 1)..l {
                let v = f(i, j);
                values[i * l + j] = v;
                values[j * l + i] = v;
            }
        }
        Self { l, values }
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.l + j]
    }
}

/// Pairwise mutual information of label columns over the 2x2 empirical
/// joint, in nats, with the 0 ln 0 = 0 convention and no smoothing.
pub fn mutual_information_matrix(labels: &LabelMatrix) -> MiMatrix {
    let n = labels.rows();
    let l = labels.cols();
    // Column-major copy so each pair walks two contiguous arrays.
    let mut cols: Vec<Vec<u8>> = vec![Vec::with_capacity(n); l];
    for row in labels.iter_rows() {
        for (j, &bit) in row.iter().enumerate() {
            cols[j].push(bit);
        }
    }
    let ones: Vec<usize> = cols.iter().map(|c| c.iter().map(|&b| b as usize).sum()).collect();

    let mut values = vec![0.0f64; l * l];
    let rows: Vec<(usize, Vec<f64>)> = (0..l)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0f64; l];
            for j in (i + 1)..l {
                row[j] = pair_mi(&cols[i], &cols[j], ones[i], ones[j], n);
            }
            (i, row)
        })
        .collect();
    for (i, row) in rows {
        for j in (i + 1)..l {
            values[i * l + j] = row[j];
            values[j * l + i] = row[j];
        }
    }
    MiMatrix { l, values }
}

fn pair_mi(a: &[u8], b: &[u8], ones_a: usize, ones_b: usize, n: usize) -> f64 {
    let n11: usize = a.iter().zip(b).map(|(&x, &y)| (x & y) as usize).sum();
    let n10 = ones_a - n11;
    let n01 = ones_b - n11;
    let n00 = n - ones_a - n01;
    let nf = n as f64;
    let mut mi = 0.0;
    for (nab, na, nb) in [
        (n00, n - ones_a, n - ones_b),
        (n01, n - ones_a, ones_b),
        (n10, ones_a, n - ones_b),
        (n11, ones_a, ones_b),
    ] {
        if nab > 0 {
            let p = nab as f64 / nf;
            mi += p * ((nab as f64 * nf) / (na as f64 * nb as f64)).ln();
        }
    }
    mi.max(0.0)
}

/// The per-vertex parent pattern of a trellis (the three lattice shapes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParentPattern {
    /// Parents above and to the left; two parents in the interior.
    LeftAbove,
    /// Parents above-left and above-right; two parents in the interior.
    Diagonal,
    /// Parents left, above-left, above, and above-right; four in the interior.
    Dense,
}

impl ParentPattern {
    pub fn name(self) -> &'static str {
        match self {
            ParentPattern::LeftAbove => "left+above",
            ParentPattern::Diagonal => "diagonal",
            ParentPattern::Dense => "dense",
        }
    }

    /// (row, col) offsets of the pattern's parents.
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            ParentPattern::LeftAbove => &[(0, -1), (-1, 0)],
            ParentPattern::Diagonal => &[(-1, -1), (-1, 1)],
            ParentPattern::Dense => &[(0, -1), (-1, -1), (-1, 0), (-1, 1)],
        }
    }
}

impl FromStr for ParentPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left+above" | "left-above" => Ok(ParentPattern::LeftAbove),
            "diagonal" => Ok(ParentPattern::Diagonal),
            "dense" => Ok(ParentPattern::Dense),
            other => Err(Error::config(format!("unknown trellis pattern `{other}`"))),
        }
    }
}

/// Default trellis width: ceil(sqrt(L)).
pub fn default_trellis_width(l: usize) -> usize {
    (l as f64).sqrt().ceil().max(1.0) as usize
}

/// A trellis: labels placed on a fixed W-wide lattice, with parents given
/// by the pattern (clipped at the border).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrellisStructure {
    /// Label index occupying each trellis position (row-major).
    order: Vec<usize>,
    width: usize,
    pattern: ParentPattern,
    /// Per-label parent label sets, ascending.
    parents: Vec<Vec<usize>>,
}

impl TrellisStructure {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pattern(&self) -> ParentPattern {
        self.pattern
    }

    pub fn parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn l(&self) -> usize {
        self.order.len()
    }

    /// Parent label set of the label at 0-based trellis position `pos`.
    pub fn position_parents(&self, pos: usize) -> Vec<usize> {
        pattern_parent_positions(pos, self.width, self.order.len(), self.pattern)
            .into_iter()
            .map(|p| self.order[p])
            .collect()
    }

    pub fn to_directed(&self) -> DirectedStructure {
        DirectedStructure {
            parents: self.parents.clone(),
            topo_order: self.order.clone(),
        }
    }

    /// Symmetrized (undirected) neighbor sets: parents plus children,
    /// ascending per label.
    pub fn neighbor_sets(&self) -> Vec<Vec<usize>> {
        let l = self.order.len();
        let mut sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); l];
        for (child, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                sets[child].insert(p);
                sets[p].insert(child);
            }
        }
        sets.into_iter().map(|s| s.into_iter().collect()).collect()
    }
}

/// Trellis positions (all earlier than `pos`) that are parents of `pos`.
fn pattern_parent_positions(pos: usize, width: usize, l: usize, pattern: ParentPattern) -> Vec<usize> {
    let row = (pos / width) as isize;
    let col = (pos % width) as isize;
    let mut out = Vec::new();
    for (dr, dc) in pattern.offsets() {
        let (r, c) = (row + dr, col + dc);
        if r < 0 || c < 0 || c >= width as isize {
            continue;
        }
        let p = r as usize * width + c as usize;
        if p < l {
            debug_assert!(p < pos);
            out.push(p);
        }
    }
    out
}

/// Places labels into a trellis by hill climbing on mutual information.
///
/// The first position receives the first label of a seeded shuffle; each
/// later position receives the unplaced label maximizing the summed MI to
/// the already-placed parents of that position. Ties keep the earliest
/// candidate in shuffle order, so an all-zero matrix reproduces the
/// shuffle itself. O(L^2) score evaluations.
pub fn build_trellis(
    mi: &MiMatrix,
    width: usize,
    pattern: ParentPattern,
    seed: u64,
) -> Result<TrellisStructure> {
    let l = mi.l();
    if width < 1 {
        return Err(Error::config("trellis width must be at least 1"));
    }
    if width > l {
        return Err(Error::config(format!(
            "trellis width {width} exceeds label count {l}"
        )));
    }

    let mut shuffled: Vec<usize> = (0..l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let mut placed = vec![false; l];
    let mut order = Vec::with_capacity(l);
    order.push(shuffled[0]);
    placed[shuffled[0]] = true;

    for pos in 1..l {
        let parent_labels: Vec<usize> = pattern_parent_positions(pos, width, l, pattern)
            .into_iter()
            .map(|p| order[p])
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for &k in &shuffled {
            if placed[k] {
                continue;
            }
            let score: f64 = parent_labels.iter().map(|&j| mi.get(j, k)).sum();
            match best {
                Some((_, s)) if score <= s => {}
                _ => best = Some((k, score)),
            }
        }
        let (chosen, _) = best.expect("an unplaced label remains");
        order.push(chosen);
        placed[chosen] = true;
    }

    let mut parents = vec![Vec::new(); l];
    for pos in 0..l {
        let mut ps: Vec<usize> = pattern_parent_positions(pos, width, l, pattern)
            .into_iter()
            .map(|p| order[p])
            .collect();
        ps.sort_unstable();
        parents[order[pos]] = ps;
    }

    Ok(TrellisStructure {
        order,
        width,
        pattern,
        parents,
    })
}

/// A DAG over the labels: per-label parent sets plus a consistent
/// topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedStructure {
    parents: Vec<Vec<usize>>,
    topo_order: Vec<usize>,
}

impl DirectedStructure {
    pub fn new(parents: Vec<Vec<usize>>, topo_order: Vec<usize>) -> Result<Self> {
        let l = parents.len();
        if topo_order.len() != l {
            return Err(Error::input("topological order length mismatch"));
        }
        let mut position = vec![usize::MAX; l];
        for (pos, &label) in topo_order.iter().enumerate() {
            if label >= l || position[label] != usize::MAX {
                return Err(Error::input("topological order is not a permutation"));
            }
            position[label] = pos;
        }
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                if p >= l {
                    return Err(Error::input("parent index out of range"));
                }
                if position[p] >= position[child] {
                    return Err(Error::input("parents must precede children"));
                }
            }
        }
        Ok(Self { parents, topo_order })
    }

    /// Structure with no edges over `l` labels.
    pub fn empty(l: usize) -> Self {
        Self {
            parents: vec![Vec::new(); l],
            topo_order: (0..l).collect(),
        }
    }

    /// Reconstructs a topological order from parent sets (lowest ready
    /// label first). Fails on cycles.
    pub fn from_parents(parents: Vec<Vec<usize>>) -> Result<Self> {
        let l = parents.len();
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); l];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                if p >= l {
                    return Err(Error::input("parent index out of range"));
                }
                children[p].push(child);
            }
        }
        let mut ready: BTreeSet<usize> = (0..l).filter(|&i| indegree[i] == 0).collect();
        let mut topo_order = Vec::with_capacity(l);
        while let Some(&next) = ready.iter().next() {
            ready.remove(&next);
            topo_order.push(next);
            for &c in &children[next] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo_order.len() != l {
            return Err(Error::input("parent sets contain a cycle"));
        }
        Ok(Self { parents, topo_order })
    }

    pub fn l(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self) -> &[Vec<usize>] {
        &self.parents
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn undirected_edges(&self) -> BTreeSet<(usize, usize)> {
        let mut edges = BTreeSet::new();
        for (child, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                edges.insert((p.min(child), p.max(child)));
            }
        }
        edges
    }
}

/// Shared edge rule for the marginal and conditional structure learners:
/// under a seeded random topological ordering, every label takes as
/// parents its highest-MI predecessors with MI strictly above the
/// threshold, at most `max_parents` of them. MI ties prefer the lower
/// label index.
fn mi_edge_rule(
    mi: &MiMatrix,
    max_parents: usize,
    threshold: f64,
    seed: u64,
) -> Result<DirectedStructure> {
    if max_parents < 1 {
        return Err(Error::config("max_parents must be at least 1"));
    }
    if !(threshold >= 0.0) {
        return Err(Error::config("threshold must be nonnegative"));
    }
    let l = mi.l();
    let mut order: Vec<usize> = (0..l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut parents = vec![Vec::new(); l];
    for (idx, &label) in order.iter().enumerate() {
        let mut candidates: Vec<usize> = order[..idx]
            .iter()
            .copied()
            .filter(|&p| mi.get(p, label) > threshold)
            .collect();
        candidates.sort_by(|&a, &b| {
            mi.get(b, label)
                .total_cmp(&mi.get(a, label))
                .then(a.cmp(&b))
        });
        candidates.truncate(max_parents);
        candidates.sort_unstable();
        parents[label] = candidates;
    }
    DirectedStructure::new(parents, order)
}

/// Marginal-dependence structure learning: edges from the mutual
/// information of the label columns themselves.
pub fn fs_structure(
    labels: &LabelMatrix,
    max_parents: usize,
    threshold: f64,
    seed: u64,
) -> Result<DirectedStructure> {
    let mi = mutual_information_matrix(labels);
    mi_edge_rule(&mi, max_parents, threshold, seed)
}

/// Conditional-dependence structure learning: trains one independent
/// classifier per label, forms the error-indicator matrix
/// `e[n][l] = [y != y_hat]` on the training data, and applies the
/// marginal edge rule to those error columns.
pub fn lead_structure(
    dataset: &Dataset,
    base: &SgdConfig,
    max_parents: usize,
    threshold: f64,
    seed: u64,
) -> Result<DirectedStructure> {
    let n = dataset.n();
    let d = dataset.d();
    let l = dataset.l();
    let mut flat = Vec::with_capacity(n * d);
    for i in 0..n {
        flat.extend_from_slice(dataset.feature_row(i));
    }

    let errors_by_label: Vec<Vec<u8>> = (0..l)
        .into_par_iter()
        .map(|li| -> Result<Vec<u8>> {
            let targets: Vec<u8> = (0..n).map(|i| dataset.labels().get(i, li)).collect();
            let cfg = base.with_seed(derive_seed(base.seed, li as u64));
            let model = train_binary(&flat, n, d, &targets, &cfg)?;
            let mut errs = Vec::with_capacity(n);
            for i in 0..n {
                let p = model.predict_proba(dataset.feature_row(i))?;
                let pred = (p > 0.5) as u8;
                errs.push((pred != targets[i]) as u8);
            }
            Ok(errs)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut errors = LabelMatrix::zeros(n, l);
    for (li, col) in errors_by_label.iter().enumerate() {
        for (i, &e) in col.iter().enumerate() {
            errors.set(i, li, e);
        }
    }
    let mi = mutual_information_matrix(&errors);
    mi_edge_rule(&mi, max_parents, threshold, seed)
}

/// Maximum-weight spanning tree over the MI matrix, rooted at a seeded
/// random label with edges directed away from the root. Weight ties break
/// toward the lexicographically smallest pair, so the undirected tree is
/// independent of the seed.
pub fn spanning_tree_structure(mi: &MiMatrix, seed: u64) -> DirectedStructure {
    let l = mi.l();
    if l == 1 {
        return DirectedStructure::empty(1);
    }
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in (i + 1)..l {
            edges.push((i, j));
        }
    }
    edges.sort_by(|&(a, b), &(c, d)| {
        mi.get(c, d)
            .total_cmp(&mi.get(a, b))
            .then((a, b).cmp(&(c, d)))
    });

    let mut dsu: Vec<usize> = (0..l).collect();
    fn find(dsu: &mut Vec<usize>, x: usize) -> usize {
        if dsu[x] != x {
            let root = find(dsu, dsu[x]);
            dsu[x] = root;
        }
        dsu[x]
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); l];
    let mut taken = 0;
    for (a, b) in edges {
        let (ra, rb) = (find(&mut dsu, a), find(&mut dsu, b));
        if ra != rb {
            dsu[ra] = rb;
            adjacency[a].push(b);
            adjacency[b].push(a);
            taken += 1;
            if taken == l - 1 {
                break;
            }
        }
    }
    for neighbors in &mut adjacency {
        neighbors.sort_unstable();
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = rng.random_range(0..l);
    let mut parents = vec![Vec::new(); l];
    let mut topo_order = Vec::with_capacity(l);
    let mut visited = vec![false; l];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(root);
    visited[root] = true;
    while let Some(u) = queue.pop_front() {
        topo_order.push(u);
        for &v in &adjacency[u] {
            if !visited[v] {
                visited[v] = true;
                parents[v] = vec![u];
                queue.push_back(v);
            }
        }
    }
    DirectedStructure { parents, topo_order }
}

/// F-measure of the undirected edge sets of a learned structure against
/// the generator's ground truth. Both empty scores 1; one empty scores 0.
pub fn edge_f_measure(predicted: &DirectedStructure, truth: &GroundTruthGraph) -> Result<f64> {
    if predicted.l() != truth.l() {
        return Err(Error::input("structures have different label counts"));
    }
    let pred = predicted.undirected_edges();
    let real = truth.undirected_edges();
    match (pred.is_empty(), real.is_empty()) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let both = pred.intersection(&real).count() as f64;
    let precision = both / pred.len() as f64;
    let recall = both / real.len() as f64;
    if precision + recall == 0.0 {
        Ok(0.0)
    } else {
        Ok(2.0 * precision * recall / (precision + recall))
    }
}

/// Renders parent sets in the adjacency-list text format
/// `child: parent,parent,...`, one label per line.
pub fn to_adjacency_text(structure: &DirectedStructure) -> String {
    let mut out = String::new();
    for (child, ps) in structure.parents().iter().enumerate() {
        let joined: Vec<String> = ps.iter().map(ToString::to_string).collect();
        if joined.is_empty() {
            let _ = writeln!(out, "{child}:");
        } else {
            let _ = writeln!(out, "{child}: {}", joined.join(","));
        }
    }
    out
}

/// Parses the adjacency-list format back into a structure.
pub fn parse_adjacency_text(text: &str) -> Result<DirectedStructure> {
    let mut entries: Vec<(usize, Vec<usize>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (child, rest) = line
            .split_once(':')
            .ok_or_else(|| Error::parse(idx + 1, "expected `child: parents`"))?;
        let child: usize = child
            .trim()
            .parse()
            .map_err(|_| Error::parse(idx + 1, "invalid child index"))?;
        let mut ps = Vec::new();
        for tok in rest.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                continue;
            }
            ps.push(
                tok.parse()
                    .map_err(|_| Error::parse(idx + 1, "invalid parent index"))?,
            );
        }
        ps.sort_unstable();
        entries.push((child, ps));
    }
    let l = entries.len();
    let mut parents = vec![None; l];
    for (child, ps) in entries {
        if child >= l || parents[child].is_some() {
            return Err(Error::input("adjacency lines must cover each label once"));
        }
        parents[child] = Some(ps);
    }
    let parents: Vec<Vec<usize>> = parents.into_iter().map(Option::unwrap).collect();
    DirectedStructure::from_parents(parents)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_from(rows: &[&[u8]]) -> LabelMatrix {
        LabelMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn mi_of_independent_columns_is_zero() {
        let y = labels_from(&[&[0, 0], &[0, 1], &[1, 0], &[1, 1]]);
        let mi = mutual_information_matrix(&y);
        assert_eq!(mi.get(0, 1), 0.0);
    }

    #[test]
    fn mi_of_identical_and_complementary_columns_is_ln2() {
        let same = labels_from(&[&[0, 0], &[1, 1], &[0, 0], &[1, 1]]);
        let mi = mutual_information_matrix(&same);
        assert!((mi.get(0, 1) - 2.0f64.ln()).abs() < 1e-12);

        let opposite = labels_from(&[&[0, 1], &[1, 0], &[0, 1], &[1, 0]]);
        let mi = mutual_information_matrix(&opposite);
        assert!((mi.get(0, 1) - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mi_matrix_is_symmetric_with_zero_diagonal() {
        let y = labels_from(&[&[1, 0, 1], &[0, 1, 1], &[1, 1, 0], &[0, 0, 0], &[1, 0, 1]]);
        let mi = mutual_information_matrix(&y);
        for i in 0..3 {
            assert_eq!(mi.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(mi.get(i, j), mi.get(j, i));
            }
        }
    }

    #[test]
    fn mi_of_duplicate_columns_equals_column_entropy() {
        // Column frequency 2/5 duplicated: MI = H = -p ln p - q ln q.
        let y = labels_from(&[&[1, 1], &[0, 0], &[1, 1], &[0, 0], &[0, 0]]);
        let mi = mutual_information_matrix(&y);
        let p: f64 = 0.4;
        let entropy = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        assert!((mi.get(0, 1) - entropy).abs() < 1e-12);
    }

    #[test]
    fn trivial_trellis_has_no_parents() {
        let mi = MiMatrix::from_fn(1, |_, _| 0.0);
        let t = build_trellis(&mi, 1, ParentPattern::LeftAbove, 9).unwrap();
        assert_eq!(t.order(), &[0]);
        assert!(t.parents()[0].is_empty());
    }

    #[test]
    fn trellis_rejects_width_above_label_count() {
        let mi = MiMatrix::from_fn(3, |_, _| 0.0);
        assert!(build_trellis(&mi, 4, ParentPattern::LeftAbove, 0).is_err());
    }

    fn seed_placing_first(mi: &MiMatrix, label: usize, width: usize) -> u64 {
        (0..5000)
            .find(|&s| {
                build_trellis(mi, width, ParentPattern::LeftAbove, s)
                    .unwrap()
                    .order()[0]
                    == label
            })
            .expect("some seed places the label first")
    }

    #[test]
    fn dominant_pair_is_placed_adjacently() {
        // I(0,1)=0.9, all other pairs 0. With label 0 first, position 1
        // has parent {0}, so its argmax is label 1.
        let mi = MiMatrix::from_fn(4, |i, j| if (i, j) == (0, 1) { 0.9 } else { 0.0 });
        let seed = seed_placing_first(&mi, 0, 2);
        let t = build_trellis(&mi, 2, ParentPattern::LeftAbove, seed).unwrap();
        assert_eq!(t.order()[0], 0);
        assert_eq!(t.order()[1], 1, "order {:?}", t.order());
    }

    #[test]
    fn three_by_three_interior_parents_match_the_lattice() {
        let mi = MiMatrix::from_fn(9, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0);
        let t = build_trellis(&mi, 3, ParentPattern::LeftAbove, 4).unwrap();
        // Position (1,1) (0-based) has parents at (1,0) and (0,1).
        let parents = t.position_parents(4);
        let expected = vec![t.order()[3], t.order()[1]];
        assert_eq!(parents, expected);
        // Per-label parent sets mirror the position view.
        let mut sorted = expected.clone();
        sorted.sort_unstable();
        assert_eq!(t.parents()[t.order()[4]], sorted);
    }

    #[test]
    fn all_zero_mi_reduces_to_the_seeded_shuffle() {
        let l = 12;
        let mi = MiMatrix::from_fn(l, |_, _| 0.0);
        for seed in [0u64, 3, 17] {
            let t = build_trellis(&mi, 4, ParentPattern::LeftAbove, seed).unwrap();
            let mut shuffled: Vec<usize> = (0..l).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            shuffled.shuffle(&mut rng);
            assert_eq!(t.order(), shuffled.as_slice());
        }
    }

    #[test]
    fn trellis_is_a_dag_for_all_patterns() {
        let mi = MiMatrix::from_fn(20, |i, j| ((i * 13 + j * 5) % 7) as f64);
        for pattern in [ParentPattern::LeftAbove, ParentPattern::Diagonal, ParentPattern::Dense] {
            for seed in 0..5 {
                let t = build_trellis(&mi, 5, pattern, seed).unwrap();
                // new() validates that parents precede children.
                DirectedStructure::new(t.parents().to_vec(), t.order().to_vec()).unwrap();
            }
        }
    }

    #[test]
    fn interior_nodes_have_full_pattern_parent_count() {
        let mi = MiMatrix::from_fn(25, |i, j| ((i + j) % 3) as f64);
        let t = build_trellis(&mi, 5, ParentPattern::Dense, 1).unwrap();
        // Position (2,2) is interior: all four dense parents exist.
        assert_eq!(t.position_parents(12).len(), 4);
        // Top-left corner has none.
        assert_eq!(t.position_parents(0).len(), 0);
    }

    #[test]
    fn fs_with_high_threshold_gives_empty_structure() {
        let y = labels_from(&[&[0, 0], &[1, 1], &[0, 1], &[1, 0]]);
        let s = fs_structure(&y, 2, 1e9, 7).unwrap();
        assert_eq!(s.edge_count(), 0);
    }

    #[test]
    fn fs_with_two_dependent_labels_gives_one_edge() {
        let y = labels_from(&[&[0, 0], &[1, 1], &[0, 0], &[1, 1]]);
        let s = fs_structure(&y, 2, 0.0, 3).unwrap();
        assert_eq!(s.edge_count(), 1);
        assert_eq!(s.undirected_edges().into_iter().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn fs_recovers_signal_on_easy_synthetic_data() {
        use crate::data::generate_bn_dataset;
        let mut total = 0.0;
        for seed in 0..4 {
            let (ds, truth) = generate_bn_dataset(2000, 20, 6, 5, 1.0, 1.0, 0.0, 100 + seed).unwrap();
            let s = fs_structure(ds.labels(), 2, 0.0, seed).unwrap();
            total += edge_f_measure(&s, &truth).unwrap();
        }
        assert!(total / 4.0 > 0.0);
    }

    #[test]
    fn lead_with_copied_errors_finds_the_edge() {
        // Constant features make every classifier predict the majority
        // class, so the residuals equal the labels; labels 0 and 1 are
        // identical (minority 1s), label 2 is constant zero.
        let mut feature_rows = Vec::new();
        let mut label_rows = Vec::new();
        for i in 0..30 {
            feature_rows.push(vec![0.0]);
            let bit = (i % 3 == 0) as u8;
            label_rows.push(vec![bit, bit, 0]);
        }
        let ds = Dataset::from_rows(&feature_rows, &label_rows).unwrap();
        let s = lead_structure(&ds, &SgdConfig::default(), 2, 0.0, 5).unwrap();
        let edges = s.undirected_edges();
        assert!(edges.contains(&(0, 1)), "edges {edges:?}");
        assert_eq!(edges.len(), 1);
    }

    #[test]
    fn lead_with_perfect_classifiers_is_empty() {
        // y = [x > 0] with a wide margin is learned exactly.
        let mut feature_rows = Vec::new();
        let mut label_rows = Vec::new();
        for i in 0..40 {
            let x = if i % 2 == 0 { 2.0 } else { -2.0 };
            feature_rows.push(vec![x]);
            label_rows.push(vec![(x > 0.0) as u8, (x > 0.0) as u8]);
        }
        let ds = Dataset::from_rows(&feature_rows, &label_rows).unwrap();
        let s = lead_structure(&ds, &SgdConfig::default(), 2, 0.0, 1).unwrap();
        assert_eq!(s.edge_count(), 0);
    }

    #[test]
    fn spanning_tree_of_two_labels_is_the_single_edge() {
        let mi = MiMatrix::from_fn(2, |_, _| 0.25);
        for seed in 0..4 {
            let s = spanning_tree_structure(&mi, seed);
            assert_eq!(s.undirected_edges().into_iter().collect::<Vec<_>>(), vec![(0, 1)]);
        }
    }

    #[test]
    fn chain_shaped_mi_yields_the_chain_tree() {
        let mi = MiMatrix::from_fn(3, |i, j| match (i, j) {
            (0, 1) | (1, 2) => 1.0,
            _ => 0.0,
        });
        let s = spanning_tree_structure(&mi, 11);
        let edges: Vec<_> = s.undirected_edges().into_iter().collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn spanning_tree_edge_set_is_seed_independent() {
        let mi = MiMatrix::from_fn(6, |i, j| ((i * 5 + j * 11) % 13) as f64);
        let reference = spanning_tree_structure(&mi, 0).undirected_edges();
        let mut roots = BTreeSet::new();
        for seed in 0..10 {
            let s = spanning_tree_structure(&mi, seed);
            assert_eq!(s.undirected_edges(), reference);
            roots.insert(s.topo_order()[0]);
            // Every non-root label has exactly one parent.
            let root = s.topo_order()[0];
            for (label, ps) in s.parents().iter().enumerate() {
                assert_eq!(ps.len(), usize::from(label != root));
            }
        }
        assert!(roots.len() > 1, "seeded roots should vary");
    }

    #[test]
    fn edge_f_measure_hand_cases() {
        let truth = GroundTruthGraph {
            parent: vec![None, Some(0), None],
            weights: LabelMatrix::zeros(3, 1),
            alpha: 0.0,
            sigma2: 1.0,
            delta: 0.0,
            t: 1,
        };
        // Identical edge sets.
        let same = DirectedStructure::from_parents(vec![vec![], vec![0], vec![]]).unwrap();
        assert_eq!(edge_f_measure(&same, &truth).unwrap(), 1.0);
        // Disjoint nonempty sets.
        let disjoint = DirectedStructure::from_parents(vec![vec![], vec![2], vec![]]).unwrap();
        assert_eq!(edge_f_measure(&disjoint, &truth).unwrap(), 0.0);
        // Superset: P=0.5, R=1.0 -> F=2/3.
        let superset = DirectedStructure::from_parents(vec![vec![], vec![0], vec![1]]).unwrap();
        let f = edge_f_measure(&superset, &truth).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_predictions_score_zero_against_nonempty_truth() {
        let truth = GroundTruthGraph {
            parent: vec![None, Some(0)],
            weights: LabelMatrix::zeros(2, 1),
            alpha: 0.0,
            sigma2: 1.0,
            delta: 0.0,
            t: 1,
        };
        let empty = DirectedStructure::empty(2);
        assert_eq!(edge_f_measure(&empty, &truth).unwrap(), 0.0);
        let no_edges = GroundTruthGraph {
            parent: vec![None, None],
            ..truth
        };
        assert_eq!(edge_f_measure(&empty, &no_edges).unwrap(), 1.0);
    }

    #[test]
    fn adjacency_text_round_trips() {
        let s = DirectedStructure::from_parents(vec![vec![], vec![0], vec![0, 1], vec![]]).unwrap();
        let text = to_adjacency_text(&s);
        assert_eq!(text, "0:\n1: 0\n2: 0,1\n3:\n");
        let back = parse_adjacency_text(&text).unwrap();
        assert_eq!(back.parents(), s.parents());
    }

    #[test]
    fn adjacency_parse_rejects_cycles() {
        assert!(parse_adjacency_text("0: 1\n1: 0\n").is_err());
    }
}
