//! Finite Stackelberg stochastic games with vector costs.
//!
//! A [`GameModel`] holds the transition kernel `p(s, (a1, a2), s')` and the
//! vector cost `c(s, a1, a2) ∈ [-1, 1]^K` as dense arrays. Stationary policy
//! pairs induce a Markov chain on states whose invariant law and occupation
//! measure are computed exactly by a direct linear solve.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability rows summing to one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Residual accepted from the stationary linear solve.
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// Budget on deterministic policy pairs for the irreducibility check.
pub const IRREDUCIBILITY_BUDGET: f64 = 1e6;

/// A finite two-agent stochastic game where agent 1 (the leader) moves first
/// and agent 2 (the follower) observes the leader's action.
#[derive(Debug, Clone, PartialEq)]
pub struct GameModel {
    n_states: usize,
    n_actions1: usize,
    n_actions2: usize,
    cost_dim: usize,
    // [s][a1][a2][s']
    kernel: Vec<f64>,
    // [s][a1][a2][k]
    costs: Vec<f64>,
}

/// On-disk JSON layout of a model, with nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n_states: usize,
    pub n_actions1: usize,
    pub n_actions2: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub kernel: Vec<Vec<Vec<Vec<f64>>>>,
    pub costs: Vec<Vec<Vec<Vec<f64>>>>,
}

/// One failed model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape(String),
    KernelRowSum {
        s: usize,
        a1: usize,
        a2: usize,
        sum: f64,
    },
    NegativeProbability {
        s: usize,
        a1: usize,
        a2: usize,
        next: usize,
        value: f64,
    },
    CostOutOfRange {
        s: usize,
        a1: usize,
        a2: usize,
        k: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(msg) => write!(f, "shape: {msg}"),
            Violation::KernelRowSum { s, a1, a2, sum } => {
                write!(f, "kernel row ({s},{a1},{a2}) sums to {sum}, expected 1")
            }
            Violation::NegativeProbability {
                s,
                a1,
                a2,
                next,
                value,
            } => write!(
                f,
                "kernel row ({s},{a1},{a2}) has negative entry {value} at next state {next}"
            ),
            Violation::CostOutOfRange {
                s,
                a1,
                a2,
                k,
                value,
            } => write!(
                f,
                "cost out of [-1,1] at ({s},{a1},{a2}) component {k}: {value}"
            ),
        }
    }
}

/// Result of [`validate_model`]: empty means the model is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl GameModel {
    /// Builds a model from flat arrays without checking the probability and
    /// cost invariants. Only the array lengths are checked.
    pub fn from_flat_unchecked(
        n_states: usize,
        n_actions1: usize,
        n_actions2: usize,
        cost_dim: usize,
        kernel: Vec<f64>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions1 == 0 || n_actions2 == 0 || cost_dim == 0 {
            return Err(Error::InvalidModel(
                "all dimensions must be positive".into(),
            ));
        }
        let triples = n_states * n_actions1 * n_actions2;
        if kernel.len() != triples * n_states {
            return Err(Error::InvalidModel(format!(
                "kernel has {} entries, expected {}",
                kernel.len(),
                triples * n_states
            )));
        }
        if costs.len() != triples * cost_dim {
            return Err(Error::InvalidModel(format!(
                "costs have {} entries, expected {}",
                costs.len(),
                triples * cost_dim
            )));
        }
        Ok(Self {
            n_states,
            n_actions1,
            n_actions2,
            cost_dim,
            kernel,
            costs,
        })
    }

    /// Builds and validates a model from flat arrays.
    pub fn from_flat(
        n_states: usize,
        n_actions1: usize,
        n_actions2: usize,
        cost_dim: usize,
        kernel: Vec<f64>,
        costs: Vec<f64>,
    ) -> Result<Self> {
        let model =
            Self::from_flat_unchecked(n_states, n_actions1, n_actions2, cost_dim, kernel, costs)?;
        let report = validate_model(&model);
        if report.is_ok() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report.to_string()))
        }
    }

    /// Builds a model from closures over `(s, a1, a2)`.
    pub fn from_fn(
        n_states: usize,
        n_actions1: usize,
        n_actions2: usize,
        cost_dim: usize,
        mut kernel: impl FnMut(usize, usize, usize) -> Vec<f64>,
        mut cost: impl FnMut(usize, usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut k_flat = Vec::with_capacity(n_states * n_actions1 * n_actions2 * n_states);
        let mut c_flat = Vec::with_capacity(n_states * n_actions1 * n_actions2 * cost_dim);
        for s in 0..n_states {
            for a1 in 0..n_actions1 {
                for a2 in 0..n_actions2 {
                    k_flat.extend(kernel(s, a1, a2));
                    c_flat.extend(cost(s, a1, a2));
                }
            }
        }
        Self::from_flat(n_states, n_actions1, n_actions2, cost_dim, k_flat, c_flat)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions1(&self) -> usize {
        self.n_actions1
    }

    pub fn n_actions2(&self) -> usize {
        self.n_actions2
    }

    /// Cost dimension `K`.
    pub fn cost_dim(&self) -> usize {
        self.cost_dim
    }

    /// Number of `(s, a1, a2)` triples.
    pub fn n_triples(&self) -> usize {
        self.n_states * self.n_actions1 * self.n_actions2
    }

    /// Flat lexicographic index of `(s, a1, a2)`.
    #[inline]
    pub fn triple_index(&self, s: usize, a1: usize, a2: usize) -> usize {
        (s * self.n_actions1 + a1) * self.n_actions2 + a2
    }

    /// Inverse of [`GameModel::triple_index`].
    pub fn triple_of(&self, idx: usize) -> (usize, usize, usize) {
        let a2 = idx % self.n_actions2;
        let rest = idx / self.n_actions2;
        (rest / self.n_actions1, rest % self.n_actions1, a2)
    }

    /// Next-state distribution `p(s, (a1, a2), ·)`.
    #[inline]
    pub fn transition(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let start = self.triple_index(s, a1, a2) * self.n_states;
        &self.kernel[start..start + self.n_states]
    }

    /// Vector cost `c(s, a1, a2)`.
    #[inline]
    pub fn cost(&self, s: usize, a1: usize, a2: usize) -> &[f64] {
        let start = self.triple_index(s, a1, a2) * self.cost_dim;
        &self.costs[start..start + self.cost_dim]
    }

    pub fn check_indices(&self, s: usize, a1: usize, a2: usize) -> Result<()> {
        if s >= self.n_states || a1 >= self.n_actions1 || a2 >= self.n_actions2 {
            return Err(Error::IndexOutOfRange(format!(
                "(s={s}, a1={a1}, a2={a2}) for model with {}x{}x{}",
                self.n_states, self.n_actions1, self.n_actions2
            )));
        }
        Ok(())
    }

    pub fn to_file(&self) -> ModelFile {
        let nested = |flat: &[f64], inner: usize| -> Vec<Vec<Vec<Vec<f64>>>> {
            (0..self.n_states)
                .map(|s| {
                    (0..self.n_actions1)
                        .map(|a1| {
                            (0..self.n_actions2)
                                .map(|a2| {
                                    let start = self.triple_index(s, a1, a2) * inner;
                                    flat[start..start + inner].to_vec()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        };
        ModelFile {
            n_states: self.n_states,
            n_actions1: self.n_actions1,
            n_actions2: self.n_actions2,
            k: self.cost_dim,
            kernel: nested(&self.kernel, self.n_states),
            costs: nested(&self.costs, self.cost_dim),
        }
    }

    /// Reads and validates a JSON model file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = ModelFile::load(path.as_ref())?;
        let report = file.validate();
        if !report.is_ok() {
            return Err(Error::InvalidModel(report.to_string()));
        }
        file.into_model()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file()).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Checks shapes first, then the probability and cost invariants.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.n_states == 0 || self.n_actions1 == 0 || self.n_actions2 == 0 || self.k == 0 {
            violations.push(Violation::Shape("all dimensions must be positive".into()));
        }
        check_nested(&self.kernel, self, self.n_states, "kernel", &mut violations);
        check_nested(&self.costs, self, self.k, "costs", &mut violations);
        if !violations.is_empty() {
            return ValidationReport { violations };
        }
        match self.flatten() {
            Ok(model) => validate_model(&model),
            Err(e) => ValidationReport {
                violations: vec![Violation::Shape(e.to_string())],
            },
        }
    }

    pub fn into_model(self) -> Result<GameModel> {
        let model = self.flatten()?;
        let report = validate_model(&model);
        if report.is_ok() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report.to_string()))
        }
    }

    fn flatten(&self) -> Result<GameModel> {
        let flat = |nested: &Vec<Vec<Vec<Vec<f64>>>>| -> Vec<f64> {
            nested
                .iter()
                .flatten()
                .flatten()
                .flatten()
                .copied()
                .collect()
        };
        GameModel::from_flat_unchecked(
            self.n_states,
            self.n_actions1,
            self.n_actions2,
            self.k,
            flat(&self.kernel),
            flat(&self.costs),
        )
    }
}

fn check_nested(
    arr: &[Vec<Vec<Vec<f64>>>],
    file: &ModelFile,
    inner: usize,
    name: &str,
    out: &mut Vec<Violation>,
) {
    if arr.len() != file.n_states {
        out.push(Violation::Shape(format!(
            "{name} has {} states, expected {}",
            arr.len(),
            file.n_states
        )));
        return;
    }
    for (s, by_a1) in arr.iter().enumerate() {
        if by_a1.len() != file.n_actions1 {
            out.push(Violation::Shape(format!(
                "{name}[{s}] has {} leader actions, expected {}",
                by_a1.len(),
                file.n_actions1
            )));
            continue;
        }
        for (a1, by_a2) in by_a1.iter().enumerate() {
            if by_a2.len() != file.n_actions2 {
                out.push(Violation::Shape(format!(
                    "{name}[{s}][{a1}] has {} follower actions, expected {}",
                    by_a2.len(),
                    file.n_actions2
                )));
                continue;
            }
            for (a2, row) in by_a2.iter().enumerate() {
                if row.len() != inner {
                    out.push(Violation::Shape(format!(
                        "{name}[{s}][{a1}][{a2}] has length {}, expected {inner}",
                        row.len()
                    )));
                }
            }
        }
    }
}

/// Checks every kernel row and cost entry; violations name the offending index.
pub fn validate_model(model: &GameModel) -> ValidationReport {
    let mut violations = Vec::new();
    for s in 0..model.n_states {
        for a1 in 0..model.n_actions1 {
            for a2 in 0..model.n_actions2 {
                let row = model.transition(s, a1, a2);
                for (next, &p) in row.iter().enumerate() {
                    if p < 0.0 || !p.is_finite() {
                        violations.push(Violation::NegativeProbability {
                            s,
                            a1,
                            a2,
                            next,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOL || !sum.is_finite() {
                    violations.push(Violation::KernelRowSum { s, a1, a2, sum });
                }
                for (k, &c) in model.cost(s, a1, a2).iter().enumerate() {
                    if !(-1.0..=1.0).contains(&c) {
                        violations.push(Violation::CostOutOfRange {
                            s,
                            a1,
                            a2,
                            k,
                            value: c,
                        });
                    }
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Draws `s' ~ p(s, (a1, a2), ·)`.
pub fn sample_transition<R: Rng + ?Sized>(
    model: &GameModel,
    s: usize,
    a1: usize,
    a2: usize,
    rng: &mut R,
) -> Result<usize> {
    model.check_indices(s, a1, a2)?;
    Ok(sample_categorical(model.transition(s, a1, a2), rng))
}

/// Inverse-CDF draw from a probability vector.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// A row-stochastic table: one probability vector per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyTable {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl PolicyTable {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || cols == 0 {
            return Err(Error::InvalidPolicy("empty policy table".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidPolicy(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidPolicy(format!("row {i} has a negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidPolicy(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self {
            rows: n_rows,
            cols,
            probs: rows.into_iter().flatten().collect(),
        })
    }

    /// Point masses on `choices[row]`.
    pub fn deterministic(choices: &[usize], cols: usize) -> Self {
        let mut probs = vec![0.0; choices.len() * cols];
        for (r, &c) in choices.iter().enumerate() {
            assert!(c < cols, "choice {c} out of range for {cols} columns");
            probs[r * cols + c] = 1.0;
        }
        Self {
            rows: choices.len(),
            cols,
            probs,
        }
    }

    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            probs: vec![1.0 / cols as f64; rows * cols],
        }
    }

    /// `(1 - eps) * greedy + eps * uniform`.
    pub fn epsilon_mixture(greedy: &[usize], cols: usize, eps: f64) -> Self {
        let mut probs = vec![eps / cols as f64; greedy.len() * cols];
        for (r, &c) in greedy.iter().enumerate() {
            probs[r * cols + c] += 1.0 - eps;
        }
        Self {
            rows: greedy.len(),
            cols,
            probs,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.probs[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn prob(&self, r: usize, c: usize) -> f64 {
        self.probs[r * self.cols + c]
    }

    pub fn sample<R: Rng + ?Sized>(&self, r: usize, rng: &mut R) -> usize {
        sample_categorical(self.row(r), rng)
    }
}

/// A stationary leader policy `π1(a1|s)` with a follower policy
/// `π2(a2|s, a1)`; follower rows are indexed by `s * n_actions1 + a1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPolicyPair {
    pub leader: PolicyTable,
    pub follower: PolicyTable,
}

impl StationaryPolicyPair {
    pub fn new(model: &GameModel, leader: PolicyTable, follower: PolicyTable) -> Result<Self> {
        if leader.rows() != model.n_states() || leader.cols() != model.n_actions1() {
            return Err(Error::InvalidPolicy(format!(
                "leader table is {}x{}, expected {}x{}",
                leader.rows(),
                leader.cols(),
                model.n_states(),
                model.n_actions1()
            )));
        }
        let f_rows = model.n_states() * model.n_actions1();
        if follower.rows() != f_rows || follower.cols() != model.n_actions2() {
            return Err(Error::InvalidPolicy(format!(
                "follower table is {}x{}, expected {}x{}",
                follower.rows(),
                follower.cols(),
                f_rows,
                model.n_actions2()
            )));
        }
        Ok(Self { leader, follower })
    }

    /// Pair of deterministic maps `s -> a1` and `(s, a1) -> a2`.
    pub fn deterministic(model: &GameModel, leader: &[usize], follower: &[usize]) -> Result<Self> {
        if leader.iter().any(|&a| a >= model.n_actions1())
            || follower.iter().any(|&a| a >= model.n_actions2())
        {
            return Err(Error::InvalidPolicy("action out of range".into()));
        }
        Self::new(
            model,
            PolicyTable::deterministic(leader, model.n_actions1()),
            PolicyTable::deterministic(follower, model.n_actions2()),
        )
    }

    /// Probability of the joint action `(a1, a2)` in state `s`.
    #[inline]
    pub fn joint_prob(&self, n_actions1: usize, s: usize, a1: usize, a2: usize) -> f64 {
        self.leader.prob(s, a1) * self.follower.prob(s * n_actions1 + a1, a2)
    }
}

/// Long-run frequencies of `(s, a1, a2)` under a stationary pair.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure {
    /// Indexed by [`GameModel::triple_index`].
    pub psi: Vec<f64>,
    pub eta: Vec<f64>,
}

/// Row-stochastic state transition matrix induced by a policy pair, row-major.
pub fn induced_chain(model: &GameModel, pair: &StationaryPolicyPair) -> Vec<f64> {
    let n = model.n_states();
    let mut p = vec![0.0; n * n];
    for s in 0..n {
        for a1 in 0..model.n_actions1() {
            for a2 in 0..model.n_actions2() {
                let w = pair.joint_prob(model.n_actions1(), s, a1, a2);
                if w == 0.0 {
                    continue;
                }
                for (t, &q) in model.transition(s, a1, a2).iter().enumerate() {
                    p[s * n + t] += w * q;
                }
            }
        }
    }
    p
}

/// Invariant distribution of the chain induced by `pair`.
pub fn stationary_distribution(model: &GameModel, pair: &StationaryPolicyPair) -> Result<Vec<f64>> {
    stationary_of_chain(&induced_chain(model, pair), model.n_states())
}

/// Solves `η P = η`, `Σ η = 1` by replacing the last balance equation with
/// the normalization.
pub fn stationary_of_chain(p: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // Rows of A are the balance equations: (P^T - I) η = 0.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = p[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;

    let lu = a.full_piv_lu();
    let min_pivot = (0..n)
        .map(|i| lu.u()[(i, i)].abs())
        .fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 {
        return Err(Error::NotUnichain(format!(
            "balance system is singular (min pivot {min_pivot:e})"
        )));
    }
    let eta = lu
        .solve(&b)
        .ok_or_else(|| Error::NotUnichain("balance system is singular".into()))?;

    let mut eta: Vec<f64> = eta.iter().copied().collect();
    if eta.iter().any(|&e| e < -1e-9 || !e.is_finite()) {
        return Err(Error::NotUnichain(format!(
            "solution has negative mass: {eta:?}"
        )));
    }
    for e in &mut eta {
        *e = e.max(0.0);
    }
    let total: f64 = eta.iter().sum();
    for e in &mut eta {
        *e /= total;
    }
    let residual = (0..n)
        .map(|j| {
            let flow: f64 = (0..n).map(|i| eta[i] * p[i * n + j]).sum();
            (flow - eta[j]).abs()
        })
        .fold(0.0, f64::max);
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(Error::NotUnichain(format!(
            "balance residual {residual:e} too large"
        )));
    }
    Ok(eta)
}

/// `ψ(s, a1, a2) = η(s) π1(a1|s) π2(a2|s, a1)`.
pub fn occupation_measure(model: &GameModel, pair: &StationaryPolicyPair) -> Result<OccupationMeasure> {
    let eta = stationary_distribution(model, pair)?;
    let mut psi = vec![0.0; model.n_triples()];
    for s in 0..model.n_states() {
        for a1 in 0..model.n_actions1() {
            for a2 in 0..model.n_actions2() {
                psi[model.triple_index(s, a1, a2)] =
                    eta[s] * pair.joint_prob(model.n_actions1(), s, a1, a2);
            }
        }
    }
    Ok(OccupationMeasure { psi, eta })
}

/// Ergodic vector cost `c(ψ) = Σ ψ(s, a) c(s, a)`.
pub fn ergodic_cost(model: &GameModel, occupation: &OccupationMeasure) -> Vec<f64> {
    let mut out = vec![0.0; model.cost_dim()];
    for (idx, &w) in occupation.psi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (s, a1, a2) = model.triple_of(idx);
        for (o, c) in out.iter_mut().zip(model.cost(s, a1, a2)) {
            *o += w * c;
        }
    }
    out
}

/// Outcome of [`check_irreducibility`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrreducibilityReport {
    pub irreducible: bool,
    /// Pairs actually inspected.
    pub pairs_checked: u64,
    /// False when the budget was exceeded and pairs were sampled.
    pub exhaustive: bool,
    /// Deterministic `(leader, follower)` pair whose chain is reducible.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
}

impl fmt::Display for IrreducibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.exhaustive {
            format!("checked all {} deterministic pairs", self.pairs_checked)
        } else {
            format!("budget exceeded, sampled {} pairs", self.pairs_checked)
        };
        match &self.witness {
            None => write!(f, "pass ({mode})"),
            Some((l, fo)) => write!(f, "fail ({mode}); witness leader={l:?} follower={fo:?}"),
        }
    }
}

/// Checks that every deterministic stationary pair induces an irreducible
/// chain.
///
/// Randomized pairs put positive weight on every action some deterministic
/// pair uses, so their support graphs contain a deterministic pair's support
/// graph; strong connectivity therefore carries over. Only the follower's
/// choice at `(s, π1(s))` affects the chain, so it suffices to enumerate one
/// `(a1, a2)` per state.
pub fn check_irreducibility(model: &GameModel) -> IrreducibilityReport {
    check_irreducibility_with(model, IRREDUCIBILITY_BUDGET, 100_000, 0)
}

/// [`check_irreducibility`] with an explicit budget and sampling fallback.
pub fn check_irreducibility_with(
    model: &GameModel,
    budget: f64,
    samples: u64,
    seed: u64,
) -> IrreducibilityReport {
    use rand::SeedableRng;

    let n = model.n_states();
    let per_state = model.n_actions1() * model.n_actions2();
    let total = (per_state as f64).powi(n as i32);

    let mut choice = vec![0usize; n];
    let check = |choice: &[usize]| -> Option<(Vec<usize>, Vec<usize>)> {
        if strongly_connected(model, choice) {
            return None;
        }
        let leader: Vec<usize> = choice.iter().map(|c| c / model.n_actions2()).collect();
        let mut follower = vec![0usize; n * model.n_actions1()];
        for (s, c) in choice.iter().enumerate() {
            follower[s * model.n_actions1() + c / model.n_actions2()] = c % model.n_actions2();
        }
        Some((leader, follower))
    };

    if total <= budget {
        let mut checked = 0u64;
        loop {
            checked += 1;
            if let Some(w) = check(&choice) {
                return IrreducibilityReport {
                    irreducible: false,
                    pairs_checked: checked,
                    exhaustive: true,
                    witness: Some(w),
                };
            }
            // Mixed-radix increment.
            let mut i = 0;
            loop {
                if i == n {
                    return IrreducibilityReport {
                        irreducible: true,
                        pairs_checked: checked,
                        exhaustive: true,
                        witness: None,
                    };
                }
                choice[i] += 1;
                if choice[i] < per_state {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
        }
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for checked in 1..=samples {
        for c in choice.iter_mut() {
            *c = rng.random_range(0..per_state);
        }
        if let Some(w) = check(&choice) {
            return IrreducibilityReport {
                irreducible: false,
                pairs_checked: checked,
                exhaustive: false,
                witness: Some(w),
            };
        }
    }
    IrreducibilityReport {
        irreducible: true,
        pairs_checked: samples,
        exhaustive: false,
        witness: None,
    }
}

/// Strong connectivity of the support graph where state `s` plays the joint
/// action encoded by `choice[s] = a1 * n_actions2 + a2`.
fn strongly_connected(model: &GameModel, choice: &[usize]) -> bool {
    let n = model.n_states();
    let edge = |s: usize, t: usize| {
        let c = choice[s];
        model.transition(s, c / model.n_actions2(), c % model.n_actions2())[t] > 0.0
    };
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let e = if forward { edge(u, v) } else { edge(v, u) };
                if e && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|b| b)
    };
    reach(true) && reach(false)
}
