//! Target sets, Euclidean projections, steering directions and support
//! functions.
//!
//! Convex targets are balls, boxes and bounded halfspace intersections
//! (polytopes, `K <= 4`). A [`TargetSet::Union`] of convex pieces models a
//! non-convex target; its projection returns every piecewise-nearest point
//! within [`UNION_TIE_TOL`] of the minimum distance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dist, dot, norm, scale, sub};

/// Points within this distance of the target count as inside.
pub const INSIDE_TOL: f64 = 1e-12;

/// Pieces of a union whose distances differ by less than this are tied.
pub const UNION_TIE_TOL: f64 = 1e-9;

/// Tolerance for accepting a caller-supplied nearest point.
pub const NEAREST_TOL: f64 = 1e-9;

/// Largest dimension supported for halfspace intersections.
pub const MAX_POLYTOPE_DIM: usize = 4;

const DYKSTRA_MAX_SWEEPS: usize = 10_000;
const DYKSTRA_RESIDUAL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

/// One constraint `⟨normal, z⟩ <= offset` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// A bounded, nonempty intersection of halfspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    rows: Vec<Halfspace>,
    vertices: Vec<Vec<f64>>,
}

/// A closed target set `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetSpec", into = "TargetSpec")]
pub enum TargetSet {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Polytope(Polytope),
    Union(Vec<TargetSet>),
}

/// JSON form of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetSpec {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Halfspaces { rows: Vec<Halfspace> },
    Union { pieces: Vec<TargetSpec> },
}

/// Steering direction at a point.
#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    /// The point is within [`INSIDE_TOL`] of the target.
    Inside,
    /// Unit vector `(x - p) / ‖x - p‖`.
    Outward(Vec<f64>),
}

impl TryFrom<TargetSpec> for TargetSet {
    type Error = Error;

    fn try_from(spec: TargetSpec) -> Result<Self> {
        match spec {
            TargetSpec::Ball { center, radius } => TargetSet::ball(center, radius),
            TargetSpec::Box { lower, upper } => TargetSet::boxed(lower, upper),
            TargetSpec::Halfspaces { rows } => TargetSet::halfspaces(rows),
            TargetSpec::Union { pieces } => TargetSet::union(
                pieces
                    .into_iter()
                    .map(TargetSet::try_from)
                    .collect::<Result<Vec<_>>>()?,
            ),
        }
    }
}

impl From<TargetSet> for TargetSpec {
    fn from(t: TargetSet) -> Self {
        match t {
            TargetSet::Ball { center, radius } => TargetSpec::Ball { center, radius },
            TargetSet::Box { lower, upper } => TargetSpec::Box { lower, upper },
            TargetSet::Polytope(p) => TargetSpec::Halfspaces { rows: p.rows },
            TargetSet::Union(pieces) => TargetSpec::Union {
                pieces: pieces.into_iter().map(TargetSpec::from).collect(),
            },
        }
    }
}

impl TargetSet {
    /// Reads a JSON target file.
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidTarget("ball center must be a finite vector".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidTarget(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(TargetSet::Ball { center, radius })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidTarget(
                "box bounds must be nonempty and of equal length".into(),
            ));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidTarget(format!(
                "box lower[{i}] = {} exceeds upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(TargetSet::Box { lower, upper })
    }

    /// Intersection of `⟨normal, z⟩ <= offset`. Normals are rescaled to unit
    /// length; the set must be nonempty and bounded.
    pub fn halfspaces(rows: Vec<Halfspace>) -> Result<Self> {
        Polytope::new(rows).map(TargetSet::Polytope)
    }

    pub fn union(pieces: Vec<TargetSet>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidTarget("union needs at least one piece".into()));
        }
        if pieces.iter().any(|p| matches!(p, TargetSet::Union(_))) {
            return Err(Error::InvalidTarget("union pieces must be convex".into()));
        }
        let dim = pieces[0].dim();
        if pieces.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidTarget("union pieces differ in dimension".into()));
        }
        Ok(TargetSet::Union(pieces))
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Ball { center, .. } => center.len(),
            TargetSet::Box { lower, .. } => lower.len(),
            TargetSet::Polytope(p) => p.dim(),
            TargetSet::Union(pieces) => pieces[0].dim(),
        }
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self, TargetSet::Union(_))
    }

    /// All nearest points of `D` to `x`. Convex targets return one point;
    /// unions return one point per tied piece, in piece order.
    pub fn project(&self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            TargetSet::Union(pieces) => {
                let cand: Vec<(f64, Vec<f64>)> = pieces
                    .iter()
                    .map(|p| {
                        let q = p.project_convex(x);
                        (dist(x, &q), q)
                    })
                    .collect();
                let best = cand.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                cand.into_iter()
                    .filter(|(d, _)| *d <= best + UNION_TIE_TOL)
                    .map(|(_, q)| q)
                    .collect()
            }
            _ => vec![self.project_convex(x)],
        }
    }

    /// The lowest-index nearest point.
    pub fn nearest(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TargetSet::Union(_) => self.project(x).swap_remove(0),
            _ => self.project_convex(x),
        }
    }

    /// Index of the piece holding the lowest-index nearest point (0 for
    /// convex targets).
    pub fn nearest_piece(&self, x: &[f64]) -> usize {
        match self {
            TargetSet::Union(pieces) => {
                let d: Vec<f64> = pieces.iter().map(|p| p.distance(x)).collect();
                let best = d.iter().copied().fold(f64::INFINITY, f64::min);
                d.iter().position(|&v| v <= best + UNION_TIE_TOL).unwrap_or(0)
            }
            _ => 0,
        }
    }

    fn project_convex(&self, x: &[f64]) -> Vec<f64> {
        match self {
            TargetSet::Ball { center, radius } => {
                let diff = sub(x, center);
                let r = norm(&diff);
                if r <= *radius {
                    x.to_vec()
                } else {
                    center
                        .iter()
                        .zip(&diff)
                        .map(|(c, d)| c + radius * d / r)
                        .collect()
                }
            }
            TargetSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
            TargetSet::Polytope(p) => p.project(x),
            TargetSet::Union(_) => unreachable!("union handled by caller"),
        }
    }

    /// Euclidean distance `‖x - D‖`, snapped to zero within [`INSIDE_TOL`].
    pub fn distance(&self, x: &[f64]) -> f64 {
        let d = match self {
            TargetSet::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            TargetSet::Union(pieces) => pieces
                .iter()
                .map(|p| p.distance(x))
                .fold(f64::INFINITY, f64::min),
            _ => dist(x, &self.project_convex(x)),
        };
        if d <= INSIDE_TOL {
            0.0
        } else {
            d
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.distance(x) <= INSIDE_TOL
    }

    /// `λ = (x - chosen) / ‖x - chosen‖`, where `chosen` must be a nearest
    /// point of the target.
    pub fn direction(&self, x: &[f64], chosen: &[f64]) -> Result<Direction> {
        let d = self.distance(x);
        if d <= INSIDE_TOL {
            return Ok(Direction::Inside);
        }
        let gap = (dist(x, chosen) - d).abs().max(self.distance(chosen));
        if gap > NEAREST_TOL {
            return Err(Error::NotNearestPoint(gap));
        }
        let diff = sub(x, chosen);
        let n = norm(&diff);
        Ok(Direction::Outward(scale(&diff, 1.0 / n)))
    }

    /// Lowest-index nearest point and its direction, or `None` inside.
    pub fn steering(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.contains(x) {
            return None;
        }
        let p = self.nearest(x);
        let diff = sub(x, &p);
        let n = norm(&diff);
        if n <= INSIDE_TOL {
            return None;
        }
        let lambda = scale(&diff, 1.0 / n);
        Some((p, lambda))
    }

    /// Support function `h_D(λ) = max_{z ∈ D} ⟨z, λ⟩`.
    pub fn support(&self, lambda: &[f64]) -> Result<f64> {
        match self {
            TargetSet::Ball { center, radius } => Ok(dot(center, lambda) + radius * norm(lambda)),
            TargetSet::Box { lower, upper } => Ok(lambda
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(l, (lo, hi))| if *l > 0.0 { l * hi } else { l * lo })
                .sum()),
            TargetSet::Polytope(p) => Ok(p.support(lambda)),
            TargetSet::Union(_) => Err(Error::NonConvexSupport),
        }
    }

    /// Points of `D` useful for sampling checks: extreme points for boxes and
    /// polytopes, axis extremes and the center for balls.
    pub fn extreme_points(&self) -> Vec<Vec<f64>> {
        match self {
            TargetSet::Ball { center, radius } => {
                let mut pts = vec![center.clone()];
                for i in 0..center.len() {
                    for sign in [-1.0, 1.0] {
                        let mut p = center.clone();
                        p[i] += sign * radius;
                        pts.push(p);
                    }
                }
                pts
            }
            TargetSet::Box { lower, upper } => {
                let k = lower.len();
                (0..1usize << k.min(16))
                    .map(|mask| {
                        (0..k)
                            .map(|i| if mask >> i & 1 == 1 { upper[i] } else { lower[i] })
                            .collect()
                    })
                    .collect()
            }
            TargetSet::Polytope(p) => p.vertices.clone(),
            TargetSet::Union(pieces) => pieces.iter().flat_map(|p| p.extreme_points()).collect(),
        }
    }
}

impl Polytope {
    pub fn new(rows: Vec<Halfspace>) -> Result<Self> {
        let dim = rows.first().map_or(0, |r| r.normal.len());
        if dim == 0 {
            return Err(Error::InvalidTarget("halfspace list is empty".into()));
        }
        if dim > MAX_POLYTOPE_DIM {
            return Err(Error::InvalidTarget(format!(
                "halfspace targets support K <= {MAX_POLYTOPE_DIM}, got {dim}"
            )));
        }
        let mut unit_rows = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            if row.normal.len() != dim {
                return Err(Error::InvalidTarget(format!("row {i} has wrong dimension")));
            }
            let n = norm(&row.normal);
            if !(n > 1e-12) || !row.offset.is_finite() {
                return Err(Error::InvalidTarget(format!("row {i} has a zero normal")));
            }
            unit_rows.push(Halfspace {
                normal: scale(&row.normal, 1.0 / n),
                offset: row.offset / n,
            });
        }

        // Boundedness: the recession cone {d : ⟨n_i, d⟩ <= 0} must be {0}.
        // Probe its intersection with the unit box along every axis.
        let mut cone: Vec<Halfspace> = unit_rows
            .iter()
            .map(|r| Halfspace {
                normal: r.normal.clone(),
                offset: 0.0,
            })
            .collect();
        for j in 0..dim {
            for sign in [-1.0, 1.0] {
                let mut e = vec![0.0; dim];
                e[j] = sign;
                cone.push(Halfspace {
                    normal: e,
                    offset: 1.0,
                });
            }
        }
        let cone_vertices = enumerate_vertices(&cone, dim);
        let unbounded = (0..dim).any(|j| {
            cone_vertices
                .iter()
                .any(|v| v[j].abs() > FEAS_TOL)
        });
        if unbounded {
            return Err(Error::InvalidTarget("halfspace intersection is unbounded".into()));
        }

        let vertices = enumerate_vertices(&unit_rows, dim);
        if vertices.is_empty() {
            return Err(Error::InvalidTarget("halfspace intersection is empty".into()));
        }
        Ok(Self {
            rows: unit_rows,
            vertices,
        })
    }

    pub fn dim(&self) -> usize {
        self.rows[0].normal.len()
    }

    pub fn rows(&self) -> &[Halfspace] {
        &self.rows
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| dot(&r.normal, x) - r.offset)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn support(&self, lambda: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|v| dot(v, lambda))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Projection by Dykstra's alternating projections, finished with an
    /// exact solve on the identified active set when its KKT conditions hold.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        if self.max_violation(x) <= 0.0 {
            return x.to_vec();
        }
        let k = self.dim();
        let mut y = x.to_vec();
        let mut increments = vec![vec![0.0; k]; self.rows.len()];
        let mut z = vec![0.0; k];
        for _ in 0..DYKSTRA_MAX_SWEEPS {
            let prev = y.clone();
            // A sweep can leave y in place while the corrections still move,
            // so both must settle.
            let mut moved = 0.0;
            for (row, inc) in self.rows.iter().zip(increments.iter_mut()) {
                for i in 0..k {
                    z[i] = y[i] + inc[i];
                }
                let excess = dot(&row.normal, &z) - row.offset;
                for i in 0..k {
                    y[i] = if excess > 0.0 {
                        z[i] - excess * row.normal[i]
                    } else {
                        z[i]
                    };
                    let next = z[i] - y[i];
                    moved += (next - inc[i]).abs();
                    inc[i] = next;
                }
            }
            if dist(&prev, &y) + moved + self.max_violation(&y).max(0.0) <= DYKSTRA_RESIDUAL {
                break;
            }
        }
        self.polish(x, &y).unwrap_or(y)
    }

    /// Exact projection onto the affine hull of an active set. A feasible
    /// candidate with nonnegative multipliers satisfies the KKT conditions and
    /// is therefore the projection. Rows active at `approx` are tried first,
    /// then every subset of at most `dim` rows.
    fn polish(&self, x: &[f64], approx: &[f64]) -> Option<Vec<f64>> {
        let near: Vec<&Halfspace> = self
            .rows
            .iter()
            .filter(|r| r.offset - dot(&r.normal, approx) <= 1e-6)
            .collect();
        if let Some(p) = self.kkt_search(&near, x) {
            return Some(p);
        }
        let all: Vec<&Halfspace> = self.rows.iter().collect();
        self.kkt_search(&all, x)
    }

    fn kkt_search(&self, rows: &[&Halfspace], x: &[f64]) -> Option<Vec<f64>> {
        for size in 1..=rows.len().min(self.dim()) {
            for subset in combinations(rows.len(), size) {
                let picked: Vec<&Halfspace> = subset.iter().map(|&i| rows[i]).collect();
                if let Some(candidate) = kkt_projection(&picked, x) {
                    if self.max_violation(&candidate) <= 1e-12 {
                        return Some(candidate);
                    }
                }
            }
        }
        None
    }
}

/// Projection of `x` onto `{z : ⟨n_i, z⟩ = b_i}` if the multipliers are
/// nonnegative.
fn kkt_projection(rows: &[&Halfspace], x: &[f64]) -> Option<Vec<f64>> {
    let m = rows.len();
    let gram = nalgebra::DMatrix::from_fn(m, m, |i, j| dot(&rows[i].normal, &rows[j].normal));
    let rhs = nalgebra::DVector::from_fn(m, |i, _| dot(&rows[i].normal, x) - rows[i].offset);
    let lu = gram.full_piv_lu();
    if (0..m).any(|i| lu.u()[(i, i)].abs() < 1e-12) {
        return None;
    }
    let mu = lu.solve(&rhs)?;
    if mu.iter().any(|&v| v < -1e-12) {
        return None;
    }
    let mut z = x.to_vec();
    for (r, &w) in rows.iter().zip(mu.iter()) {
        for (zi, ni) in z.iter_mut().zip(&r.normal) {
            *zi -= w * ni;
        }
    }
    Some(z)
}

/// Vertices of `{z : ⟨n_i, z⟩ <= b_i}` by solving every `dim`-subset of rows
/// as equalities and keeping the feasible solutions.
fn enumerate_vertices(rows: &[Halfspace], dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    if rows.len() < dim {
        return out;
    }
    for subset in combinations(rows.len(), dim) {
        let a = nalgebra::DMatrix::from_fn(dim, dim, |i, j| rows[subset[i]].normal[j]);
        let b = nalgebra::DVector::from_fn(dim, |i, _| rows[subset[i]].offset);
        let lu = a.full_piv_lu();
        if (0..dim).any(|i| lu.u()[(i, i)].abs() < 1e-10) {
            continue;
        }
        let Some(v) = lu.solve(&b) else { continue };
        let v: Vec<f64> = v.iter().copied().collect();
        let feasible = rows
            .iter()
            .all(|r| dot(&r.normal, &v) <= r.offset + FEAS_TOL);
        if feasible && !out.iter().any(|w| dist(w, &v) <= FEAS_TOL) {
            out.push(v);
        }
    }
    out
}

/// All `size`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.clone());
        // Rightmost position that can still advance.
        let mut i = size;
        while i > 0 && idx[i - 1] == n - size + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
