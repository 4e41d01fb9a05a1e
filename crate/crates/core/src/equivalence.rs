//! The symmetry group of one-hidden-layer tanh networks and tools built
//! around it.
//!
//! Because tanh is odd, flipping the sign of a hidden node's incoming
//! weights, its bias and its outgoing weight leaves the network function
//! unchanged, as does renumbering the hidden nodes. Two parameter vectors
//! related by such a transform are observationally indistinguishable, so
//! parameter-space statements (estimation error, support recovery) only
//! make sense modulo this group. `equiv_distance` computes the exact
//! Euclidean distance to the closest group orbit point; `is_irreducible`
//! checks the classical conditions under which the orbit is the *entire*
//! set of representations of the function.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::assignment::min_cost_assignment;
use crate::error::{Error, Result};
use crate::net::NetworkParams;
use crate::simgen::GroundTruthModel;

/// Default tolerance for the irreducibility checks (per-entry, absolute).
pub const DEFAULT_IRREDUCIBILITY_TOL: f64 = 1e-8;

/// Sign attached to one hidden node in an equivalence transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A hidden-node interchange combined with per-node sign flips.
///
/// Applied to parameters, new node `i` receives the weights of old node
/// `perm[i]`, scaled by `signs[i]`; the output bias is untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivTransform {
    perm: Vec<usize>,
    signs: Vec<Sign>,
}

impl EquivTransform {
    pub fn new(perm: Vec<usize>, signs: Vec<Sign>) -> Result<Self> {
        if perm.is_empty() {
            return Err(Error::Config("transform needs at least one node".into()));
        }
        if perm.len() != signs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} permutation entries but {} signs",
                perm.len(),
                signs.len()
            )));
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::Contract(format!(
                    "perm is not a permutation of 0..{}",
                    perm.len()
                )));
            }
            seen[p] = true;
        }
        Ok(EquivTransform { perm, signs })
    }

    pub fn identity(n_hidden: usize) -> Self {
        EquivTransform {
            perm: (0..n_hidden).collect(),
            signs: vec![Sign::Plus; n_hidden],
        }
    }

    /// Uniformly random node interchange and sign pattern.
    pub fn random<R: Rng + ?Sized>(n_hidden: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..n_hidden).collect();
        perm.shuffle(rng);
        let signs = (0..n_hidden)
            .map(|_| if rng.random::<bool>() { Sign::Plus } else { Sign::Minus })
            .collect();
        EquivTransform { perm, signs }
    }

    pub fn n_hidden(&self) -> usize {
        self.perm.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    /// The transform undoing this one.
    pub fn inverse(&self) -> Self {
        let n = self.perm.len();
        let mut inv_perm = vec![0usize; n];
        let mut signs = vec![Sign::Plus; n];
        for i in 0..n {
            inv_perm[self.perm[i]] = i;
        }
        for (j, sign) in signs.iter_mut().enumerate() {
            *sign = self.signs[inv_perm[j]];
        }
        EquivTransform { perm: inv_perm, signs }
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
            && self.signs.iter().all(|&s| s == Sign::Plus)
    }
}

/// Applies an interchange/sign-flip transform, producing a network that
/// computes exactly the same function.
pub fn apply_transform(params: &NetworkParams, t: &EquivTransform) -> Result<NetworkParams> {
    if t.n_hidden() != params.n_hidden() {
        return Err(Error::DimensionMismatch(format!(
            "transform over {} nodes applied to a network with {}",
            t.n_hidden(),
            params.n_hidden()
        )));
    }
    let n_h = params.n_hidden();
    let n_i = params.n_inputs();
    let mut first_layer = Vec::with_capacity(n_h * n_i);
    let mut bias1 = Vec::with_capacity(n_h);
    let mut output_weights = Vec::with_capacity(n_h);
    for i in 0..n_h {
        let src = t.perm[i];
        let s = t.signs[i].factor();
        first_layer.extend(params.row(src).iter().map(|w| s * w));
        bias1.push(s * params.bias1()[src]);
        output_weights.push(s * params.output_weights()[src]);
    }
    NetworkParams::new(n_i, first_layer, bias1, output_weights, params.bias2())
}

/// One reason a network fails the irreducibility conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IrreducibilityViolation {
    /// Condition (i): node's first-layer row is (numerically) zero.
    DeadRow { node: usize },
    /// Condition (i): node's outgoing weight is (numerically) zero.
    DeadOutput { node: usize },
    /// Condition (ii): two nodes share the same incoming weights and bias,
    /// up to a joint sign flip when `flipped` is set.
    DuplicatePair { first: usize, second: usize, flipped: bool },
}

impl std::fmt::Display for IrreducibilityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IrreducibilityViolation::DeadRow { node } => {
                write!(f, "condition (i): node {node} has a zero first-layer row")
            }
            IrreducibilityViolation::DeadOutput { node } => {
                write!(f, "condition (i): node {node} has a zero outgoing weight")
            }
            IrreducibilityViolation::DuplicatePair { first, second, flipped } => {
                if *flipped {
                    write!(
                        f,
                        "condition (ii): nodes {first} and {second} are sign-flipped duplicates"
                    )
                } else {
                    write!(f, "condition (ii): nodes {first} and {second} are duplicates")
                }
            }
        }
    }
}

/// Outcome of the irreducibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrreducibilityReport {
    violations: Vec<IrreducibilityViolation>,
}

impl IrreducibilityReport {
    pub fn is_irreducible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[IrreducibilityViolation] {
        &self.violations
    }
}

impl std::fmt::Display for IrreducibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "irreducible");
        }
        let lines: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", lines.join("; "))
    }
}

/// Checks the two irreducibility conditions, reporting every violation:
/// (i) each node has a nonzero first-layer row and a nonzero outgoing
/// weight; (ii) no two nodes have equal or sign-flipped (row, bias) pairs.
/// Comparisons use `tol` as an absolute per-entry tolerance.
pub fn check_irreducibility(params: &NetworkParams, tol: f64) -> IrreducibilityReport {
    assert!(tol >= 0.0, "tolerance must be non-negative");
    let n_h = params.n_hidden();
    let mut violations = Vec::new();
    for i in 0..n_h {
        let row_norm: f64 = params.row(i).iter().map(|w| w * w).sum::<f64>().sqrt();
        if row_norm <= tol {
            violations.push(IrreducibilityViolation::DeadRow { node: i });
        }
        if params.output_weights()[i].abs() <= tol {
            violations.push(IrreducibilityViolation::DeadOutput { node: i });
        }
    }
    for i in 0..n_h {
        for j in (i + 1)..n_h {
            for flipped in [false, true] {
                let s = if flipped { -1.0 } else { 1.0 };
                let mut max_gap: f64 = (params.bias1()[i] - s * params.bias1()[j]).abs();
                for (a, b) in params.row(i).iter().zip(params.row(j).iter()) {
                    max_gap = max_gap.max((a - s * b).abs());
                }
                if max_gap <= tol {
                    violations.push(IrreducibilityViolation::DuplicatePair {
                        first: i,
                        second: j,
                        flipped,
                    });
                }
            }
        }
    }
    IrreducibilityReport { violations }
}

/// True when `params` satisfies both irreducibility conditions at `tol`.
pub fn is_irreducible(params: &NetworkParams, tol: f64) -> bool {
    check_irreducibility(params, tol).is_irreducible()
}

fn node_pair_cost(a: &NetworkParams, b: &NetworkParams, i: usize, j: usize) -> f64 {
    // squared distance between node vectors (row, bias1, w), direct and
    // sign-flipped
    let mut direct = 0.0;
    let mut flipped = 0.0;
    for (x, y) in a.row(i).iter().zip(b.row(j).iter()) {
        direct += (x - y) * (x - y);
        flipped += (x + y) * (x + y);
    }
    let (ba, bb) = (a.bias1()[i], b.bias1()[j]);
    direct += (ba - bb) * (ba - bb);
    flipped += (ba + bb) * (ba + bb);
    let (wa, wb) = (a.output_weights()[i], b.output_weights()[j]);
    direct += (wa - wb) * (wa - wb);
    flipped += (wa + wb) * (wa + wb);
    direct.min(flipped)
}

/// Euclidean distance between `a` and the equivalence orbit of `b`:
/// the minimum of `||a - t(b)||` over all interchange/sign-flip transforms
/// `t`, computed exactly via minimum-cost node assignment.
pub fn equiv_distance(a: &NetworkParams, b: &NetworkParams) -> Result<f64> {
    if a.n_hidden() != b.n_hidden() || a.n_inputs() != b.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "networks of shape ({}, {}) and ({}, {})",
            a.n_hidden(),
            a.n_inputs(),
            b.n_hidden(),
            b.n_inputs()
        )));
    }
    let n = a.n_hidden();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cost[i * n + j] = node_pair_cost(a, b, i, j);
        }
    }
    let (total, _) = min_cost_assignment(&cost, n);
    let db2 = a.bias2() - b.bias2();
    Ok((total.max(0.0) + db2 * db2).sqrt())
}

/// Reference implementation of `equiv_distance` that enumerates all
/// `n_hidden! * 2^n_hidden` transforms. Exponential; intended for testing
/// at small widths.
pub fn brute_force_equiv_distance(a: &NetworkParams, b: &NetworkParams) -> Result<f64> {
    if a.n_hidden() != b.n_hidden() || a.n_inputs() != b.n_inputs() {
        return Err(Error::DimensionMismatch("architectures differ".into()));
    }
    let n = a.n_hidden();
    let flat_a = a.to_flat();
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..n).collect();
    // Heap's algorithm over permutations, sign patterns by bitmask
    fn visit(
        perm: &mut Vec<usize>,
        k: usize,
        n: usize,
        a_flat: &[f64],
        b: &NetworkParams,
        best: &mut f64,
    ) {
        if k == n {
            for mask in 0u32..(1 << n) {
                let signs: Vec<Sign> = (0..n)
                    .map(|i| if mask & (1 << i) != 0 { Sign::Minus } else { Sign::Plus })
                    .collect();
                let t = EquivTransform::new(perm.clone(), signs).unwrap();
                let tb = apply_transform(b, &t).unwrap();
                let d: f64 = a_flat
                    .iter()
                    .zip(tb.to_flat().iter())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        for j in k..n {
            perm.swap(k, j);
            visit(perm, k + 1, n, a_flat, b, best);
            perm.swap(k, j);
        }
    }
    visit(&mut perm, 0, n, &flat_a, b, &mut best);
    Ok(best)
}

/// Support mask of a ground-truth model: feature `k` is significant iff its
/// first-layer column is nonzero. Errors if the model is reducible, since
/// the support of a reducible network is not well defined.
pub fn support_mask_true(model: &GroundTruthModel) -> Result<Vec<bool>> {
    let report = check_irreducibility(&model.params, DEFAULT_IRREDUCIBILITY_TOL);
    if !report.is_irreducible() {
        return Err(Error::Reducible(report.to_string()));
    }
    Ok((0..model.params.n_inputs())
        .map(|k| model.params.column_norm(k) > 0.0)
        .collect())
}
