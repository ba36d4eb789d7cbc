//! Exact distances and finite (pre/partial/ultra) metric spaces.
//!
//! Every distance in the crate is an [`ExtReal`]: a non-negative rational or
//! infinity. Nothing here touches floating point.

use std::fmt;
use std::ops::Add;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("structural error: {0}")]
    Structural(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// A non-negative rational, or infinity.
///
/// The derived order puts every finite value below `Infinite`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtReal {
    Finite(BigRational),
    Infinite,
}

impl ExtReal {
    pub fn zero() -> Self {
        ExtReal::Finite(BigRational::zero())
    }

    pub fn one() -> Self {
        ExtReal::Finite(BigRational::one())
    }

    pub fn inf() -> Self {
        ExtReal::Infinite
    }

    /// `num/den`; panics on a zero denominator or a negative value, so only
    /// use it with literals.
    pub fn ratio(num: i64, den: i64) -> Self {
        let r = BigRational::new(BigInt::from(num), BigInt::from(den));
        assert!(!r.is_negative(), "ExtReal must be non-negative");
        ExtReal::Finite(r)
    }

    pub fn int(n: u64) -> Self {
        ExtReal::Finite(BigRational::from_integer(BigInt::from(n)))
    }

    /// Wraps a rational, rejecting negatives.
    pub fn from_rational(r: BigRational) -> Result<Self, MetricError> {
        if r.is_negative() {
            Err(MetricError::Structural(format!("negative distance {r}")))
        } else {
            Ok(ExtReal::Finite(r))
        }
    }

    /// `1/2^m`.
    pub fn dyadic(m: u32) -> Self {
        ExtReal::Finite(BigRational::new(BigInt::one(), BigInt::one() << m))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtReal::Finite(r) if r.is_zero())
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            ExtReal::Finite(r) => Some(r),
            ExtReal::Infinite => None,
        }
    }

    pub fn max(self, other: Self) -> Self {
        std::cmp::max(self, other)
    }

    pub fn min(self, other: Self) -> Self {
        std::cmp::min(self, other)
    }

    /// `self - other` when both are finite and the result is non-negative.
    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) if a >= b => Some(ExtReal::Finite(a - b)),
            _ => None,
        }
    }

    pub fn half(&self) -> Self {
        match self {
            ExtReal::Finite(r) => ExtReal::Finite(r / BigInt::from(2)),
            ExtReal::Infinite => ExtReal::Infinite,
        }
    }

    /// The `m` with `self == 1/2^m`, if any.
    pub fn dyadic_exponent(&self) -> Option<u32> {
        let r = self.as_rational()?;
        if !r.numer().is_one() {
            return None;
        }
        let d = r.denom();
        let bits = d.bits();
        if bits == 0 {
            return None;
        }
        let m = (bits - 1) as u32;
        if *d == BigInt::one() << m {
            Some(m)
        } else {
            None
        }
    }

    pub fn parse(s: &str) -> Result<Self, MetricError> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t == "∞" {
            return Ok(ExtReal::Infinite);
        }
        let r = parse_rational(t)?;
        ExtReal::from_rational(r)
    }
}

/// Parses `p`, `p/q` or `-p/q`.
pub fn parse_rational(s: &str) -> Result<BigRational, MetricError> {
    let t = s.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n = BigInt::from_str(n.trim())
            .map_err(|_| MetricError::Structural(format!("bad rational {s:?}")))?;
        let d = BigInt::from_str(d.trim())
            .map_err(|_| MetricError::Structural(format!("bad rational {s:?}")))?;
        if d.is_zero() {
            return Err(MetricError::Structural(format!("zero denominator in {s:?}")));
        }
        Ok(BigRational::new(n, d))
    } else {
        let n = BigInt::from_str(t)
            .map_err(|_| MetricError::Structural(format!("bad rational {s:?}")))?;
        Ok(BigRational::from_integer(n))
    }
}

pub fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(r) => f.write_str(&format_rational(r)),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for ExtReal {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExtReal::parse(s)
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::Infinite,
        }
    }
}

impl<'a> Add<&'a ExtReal> for &'a ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: &ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::Infinite,
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        let s = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(n) if n.is_u64() => n.to_string(),
            other => {
                return Err(serde::de::Error::custom(format!(
                    "expected a rational string, got {other}"
                )))
            }
        };
        ExtReal::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// A finite point set with a square distance matrix.
///
/// Nothing beyond squareness is enforced at construction; use
/// [`classify_space`] to learn which axioms hold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace")]
pub struct FiniteMetricSpace {
    points: Vec<String>,
    dist: Vec<Vec<ExtReal>>,
}

#[derive(Deserialize)]
struct RawSpace {
    points: Vec<String>,
    dist: Vec<Vec<serde_json::Value>>,
}

impl TryFrom<RawSpace> for FiniteMetricSpace {
    type Error = MetricError;
    fn try_from(raw: RawSpace) -> Result<Self, MetricError> {
        let mut dist = Vec::with_capacity(raw.dist.len());
        for (i, row) in raw.dist.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (j, v) in row.into_iter().enumerate() {
                let s = match v {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
                    other => {
                        return Err(MetricError::Structural(format!(
                            "entry ({i},{j}) is not a rational string: {other}"
                        )))
                    }
                };
                let e = if s.trim().eq_ignore_ascii_case("inf") {
                    ExtReal::Infinite
                } else {
                    let r = parse_rational(&s)?;
                    if r.is_negative() {
                        return Err(MetricError::Structural(format!(
                            "negative entry {s} at ({i},{j})"
                        )));
                    }
                    ExtReal::Finite(r)
                };
                out.push(e);
            }
            dist.push(out);
        }
        FiniteMetricSpace::new(raw.points, dist)
    }
}

impl FiniteMetricSpace {
    pub fn new(points: Vec<String>, dist: Vec<Vec<ExtReal>>) -> Result<Self, MetricError> {
        let n = points.len();
        if dist.len() != n {
            return Err(MetricError::Structural(format!(
                "matrix has {} rows for {} points",
                dist.len(),
                n
            )));
        }
        for (i, row) in dist.iter().enumerate() {
            if row.len() != n {
                return Err(MetricError::Structural(format!(
                    "row {i} has {} entries for {n} points",
                    row.len()
                )));
            }
        }
        Ok(FiniteMetricSpace { points, dist })
    }

    pub fn from_fn(points: Vec<String>, mut f: impl FnMut(usize, usize) -> ExtReal) -> Self {
        let n = points.len();
        let dist = (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect();
        FiniteMetricSpace { points, dist }
    }

    /// `n` points `0..n` with every off-diagonal distance `d`.
    pub fn discrete(n: usize, d: ExtReal) -> Self {
        let pts = (0..n).map(|i| i.to_string()).collect();
        Self::from_fn(pts, |i, j| if i == j { ExtReal::zero() } else { d.clone() })
    }

    /// A subspace of the real line with the Euclidean distance; points are
    /// labelled by their rational value.
    pub fn euclidean(values: &[BigRational]) -> Self {
        let pts = values.iter().map(format_rational).collect();
        Self::from_fn(pts, |i, j| ExtReal::Finite((&values[i] - &values[j]).abs()))
    }

    /// The grid `lo, lo+step, ...` up to and including `hi` (when reached).
    pub fn grid(lo: &BigRational, hi: &BigRational, step: &BigRational) -> Self {
        Self::euclidean(&grid_values(lo, hi, step))
    }

    pub fn from_json(text: &str) -> Result<Self, MetricError> {
        serde_json::from_str(text).map_err(|e| MetricError::Structural(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn matrix(&self) -> &[Vec<ExtReal>] {
        &self.dist
    }

    pub fn d(&self, i: usize, j: usize) -> &ExtReal {
        &self.dist[i][j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.points.iter().position(|p| p == name)
    }

    /// All distinct values occurring in the matrix, ascending.
    pub fn image(&self) -> Vec<ExtReal> {
        let mut v: Vec<ExtReal> = self.dist.iter().flatten().cloned().collect();
        v.sort();
        v.dedup();
        v
    }
}

pub fn grid_values(lo: &BigRational, hi: &BigRational, step: &BigRational) -> Vec<BigRational> {
    let mut out = Vec::new();
    if !step.is_positive() {
        return out;
    }
    let mut x = lo.clone();
    while &x <= hi {
        out.push(x.clone());
        x += step;
    }
    out
}

/// Which axiom groups a space satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SpaceClass {
    pub premetric: bool,
    pub metric: bool,
    pub ultrametric: bool,
    pub partial_ultrametric: bool,
}

impl SpaceClass {
    pub fn is_consistent(&self) -> bool {
        (!self.ultrametric || self.metric) && (!self.metric || self.premetric)
    }
}

fn check_square(space: &FiniteMetricSpace) -> Result<(), MetricError> {
    let n = space.points.len();
    if space.dist.len() != n || space.dist.iter().any(|r| r.len() != n) {
        return Err(MetricError::Structural("matrix is not square".into()));
    }
    Ok(())
}

pub fn classify_space(space: &FiniteMetricSpace) -> Result<SpaceClass, MetricError> {
    check_square(space)?;
    let n = space.len();
    let d = |i: usize, j: usize| &space.dist[i][j];
    let refl = (0..n).all(|i| d(i, i).is_zero());
    let symm = (0..n).all(|i| (0..n).all(|j| d(i, j) == d(j, i)));
    let refl_star = (0..n).all(|i| (0..n).all(|j| d(i, i) <= d(i, j)));
    let mut trans = true;
    let mut trans_star = true;
    'outer: for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let lhs = d(x, y);
                if trans && *lhs > d(x, z) + d(z, y) {
                    trans = false;
                }
                if trans_star && lhs > std::cmp::max(d(x, z), d(z, y)) {
                    trans_star = false;
                }
                if !trans && !trans_star {
                    break 'outer;
                }
            }
        }
    }
    let premetric = refl && symm;
    Ok(SpaceClass {
        premetric,
        metric: premetric && trans,
        ultrametric: premetric && trans_star,
        partial_ultrametric: symm && trans_star && refl_star,
    })
}

/// Resets the diagonal of a partial ultrametric to zero.
pub fn star_completion(space: &FiniteMetricSpace) -> Result<FiniteMetricSpace, MetricError> {
    if !classify_space(space)?.partial_ultrametric {
        return Err(MetricError::Precondition(
            "star completion needs a partial ultrametric".into(),
        ));
    }
    let mut out = space.clone();
    for (i, row) in out.dist.iter_mut().enumerate() {
        row[i] = ExtReal::zero();
    }
    Ok(out)
}

/// Pairs ordered with the left component varying slowest; distance is the
/// pointwise max.
pub fn product_space(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> FiniteMetricSpace {
    let nb = b.len();
    let mut pts = Vec::with_capacity(a.len() * nb);
    for p in &a.points {
        for q in &b.points {
            pts.push(format!("({p},{q})"));
        }
    }
    FiniteMetricSpace::from_fn(pts, |i, j| {
        let (i1, i2) = (i / nb, i % nb);
        let (j1, j2) = (j / nb, j % nb);
        a.d(i1, j1).clone().max(b.d(i2, j2).clone())
    })
}

/// A total map between finite spaces, given by point indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointMap {
    pub table: Vec<usize>,
}

impl PointMap {
    pub fn new(table: Vec<usize>) -> Self {
        PointMap { table }
    }

    pub fn identity(n: usize) -> Self {
        PointMap { table: (0..n).collect() }
    }

    pub fn apply(&self, x: usize) -> usize {
        self.table[x]
    }

    fn check(&self, a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> Result<(), MetricError> {
        if self.table.len() != a.len() {
            return Err(MetricError::Structural(format!(
                "map has {} entries for a domain of {} points",
                self.table.len(),
                a.len()
            )));
        }
        if let Some(&y) = self.table.iter().find(|&&y| y >= b.len()) {
            return Err(MetricError::Structural(format!(
                "map sends a point to index {y}, outside the codomain"
            )));
        }
        Ok(())
    }
}

pub fn is_nonexpansive(a: &FiniteMetricSpace, b: &FiniteMetricSpace, f: &PointMap) -> bool {
    let n = a.len();
    f.table.len() == n
        && (0..n).all(|x| (0..n).all(|y| b.d(f.table[x], f.table[y]) <= a.d(x, y)))
}

/// Every non-expansive map, tables in lexicographic order.
pub fn enumerate_nonexpansive(a: &FiniteMetricSpace, b: &FiniteMetricSpace) -> Vec<PointMap> {
    enumerate_nonexpansive_bounded(a, b, usize::MAX).unwrap_or_default()
}

/// As [`enumerate_nonexpansive`] but gives up once more than `limit` maps
/// have been found.
pub fn enumerate_nonexpansive_bounded(
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
    limit: usize,
) -> Result<Vec<PointMap>, MetricError> {
    let n = a.len();
    let mut out = Vec::new();
    let mut table = vec![0usize; n];
    if n == 0 {
        out.push(PointMap::new(Vec::new()));
        return Ok(out);
    }
    if b.is_empty() {
        return Ok(out);
    }
    fn go(
        i: usize,
        a: &FiniteMetricSpace,
        b: &FiniteMetricSpace,
        table: &mut Vec<usize>,
        out: &mut Vec<PointMap>,
        limit: usize,
    ) -> Result<(), MetricError> {
        let n = a.len();
        if i == n {
            if out.len() >= limit {
                return Err(MetricError::Structural(format!(
                    "more than {limit} non-expansive maps"
                )));
            }
            out.push(PointMap::new(table.clone()));
            return Ok(());
        }
        for y in 0..b.len() {
            table[i] = y;
            let ok = (0..=i).all(|j| {
                b.d(y, table[j]) <= a.d(i, j) && b.d(table[j], y) <= a.d(j, i)
            });
            if ok {
                go(i + 1, a, b, table, out, limit)?;
            }
        }
        Ok(())
    }
    go(0, a, b, &mut table, &mut out, limit)?;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HomKind {
    Phi,
    Xi,
    XiPrime,
    Theta,
}

impl HomKind {
    pub const ALL: [HomKind; 4] = [HomKind::Phi, HomKind::Xi, HomKind::XiPrime, HomKind::Theta];

    pub fn name(self) -> &'static str {
        match self {
            HomKind::Phi => "phi",
            HomKind::Xi => "xi",
            HomKind::XiPrime => "xi_prime",
            HomKind::Theta => "theta",
        }
    }
}

impl fmt::Display for HomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HomKind {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, MetricError> {
        match s {
            "phi" => Ok(HomKind::Phi),
            "xi" => Ok(HomKind::Xi),
            "xi_prime" | "xi-prime" => Ok(HomKind::XiPrime),
            "theta" => Ok(HomKind::Theta),
            _ => Err(MetricError::Structural(format!("unknown hom-distance {s:?}"))),
        }
    }
}

pub fn hom_distance(
    kind: HomKind,
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
    f: &PointMap,
    g: &PointMap,
) -> Result<ExtReal, MetricError> {
    check_square(a)?;
    check_square(b)?;
    f.check(a, b)?;
    g.check(a, b)?;
    for (name, m) in [("f", f), ("g", g)] {
        if !is_nonexpansive(a, b, m) {
            return Err(MetricError::Precondition(format!("{name} is expansive")));
        }
    }
    Ok(hom_distance_unchecked(kind, a, b, &f.table, &g.table))
}

/// The hom-distance formulas without the non-expansiveness check. Tables
/// must index into `b` and have one entry per point of `a`.
pub fn hom_distance_unchecked(
    kind: HomKind,
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
    f: &[usize],
    g: &[usize],
) -> ExtReal {
    hom_distance_with(kind, a.len(), |x, y| a.d(x, y).clone(), |p, q| {
        b.d(f[p], g[q]).clone()
    }, f == g, || b.image())
}

/// Generic form: `a(x,y)` over domain indices and `fg(x,y) = b(f(x), g(y))`.
pub fn hom_distance_with(
    kind: HomKind,
    n: usize,
    a: impl Fn(usize, usize) -> ExtReal,
    fg: impl Fn(usize, usize) -> ExtReal,
    same_table: bool,
    codomain_values: impl FnOnce() -> Vec<ExtReal>,
) -> ExtReal {
    let mut best = ExtReal::zero();
    match kind {
        HomKind::Phi => {
            for x in 0..n {
                best = best.max(fg(x, x));
            }
        }
        HomKind::Xi => {
            for x in 0..n {
                for y in 0..n {
                    let v = fg(x, y);
                    if v > a(x, y) && v > best {
                        best = v;
                    }
                }
            }
        }
        HomKind::XiPrime => {
            let mut cands = codomain_values();
            cands.push(ExtReal::zero());
            cands.sort();
            cands.dedup();
            for delta in cands {
                let ok = (0..n).all(|x| (0..n).all(|y| a(x, y) > delta || fg(x, y) <= delta));
                if ok {
                    return delta;
                }
            }
            return ExtReal::Infinite;
        }
        HomKind::Theta => {
            if same_table {
                return ExtReal::zero();
            }
            for x in 0..n {
                for y in 0..n {
                    best = best.max(fg(x, y));
                }
            }
        }
    }
    best
}

/// Distance matrix of a list of maps under one hom-distance.
pub fn hom_space(
    kind: HomKind,
    a: &FiniteMetricSpace,
    b: &FiniteMetricSpace,
    maps: &[PointMap],
    labels: Vec<String>,
) -> FiniteMetricSpace {
    let img = b.image();
    FiniteMetricSpace::from_fn(labels, |i, j| {
        let (f, g) = (&maps[i].table, &maps[j].table);
        hom_distance_with(kind, a.len(), |x, y| a.d(x, y).clone(), |p, q| {
            b.d(f[p], g[q]).clone()
        }, f == g, || img.clone())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpMode {
    Full,
    ImageRestricted,
}

impl FromStr for ExpMode {
    type Err = MetricError;
    fn from_str(s: &str) -> Result<Self, MetricError> {
        match s {
            "full" => Ok(ExpMode::Full),
            "image_restricted" | "image-restricted" => Ok(ExpMode::ImageRestricted),
            _ => Err(MetricError::Structural(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpWitness {
    pub x0: String,
    pub x2: String,
    pub alpha: ExtReal,
    pub beta: ExtReal,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum ExpOutcome {
    Ok,
    Witness(ExpWitness),
}

/// Checks the midpoint condition for exponentiability on every pair of
/// points at finite distance. Infinite distances are skipped.
pub fn check_exponentiable(
    space: &FiniteMetricSpace,
    mode: ExpMode,
) -> Result<ExpOutcome, MetricError> {
    if !classify_space(space)?.metric {
        return Err(MetricError::Precondition("space is not a metric".into()));
    }
    let n = space.len();
    let image = space.image();
    let finite_vals: Vec<&ExtReal> = image.iter().filter(|v| v.is_finite()).collect();
    for x0 in 0..n {
        for x2 in 0..n {
            let total = space.d(x0, x2);
            if !total.is_finite() {
                continue;
            }
            let mut alphas: Vec<ExtReal> = vec![ExtReal::zero(), total.half()];
            for v in &finite_vals {
                if *v <= total {
                    alphas.push((*v).clone());
                }
                if let Some(r) = total.checked_sub(v) {
                    alphas.push(r);
                }
            }
            alphas.sort();
            alphas.dedup();
            for alpha in alphas {
                let beta = total.checked_sub(&alpha).expect("alpha within [0, total]");
                if mode == ExpMode::ImageRestricted
                    && !(image.contains(&alpha) && image.contains(&beta))
                {
                    continue;
                }
                let found = (0..n).any(|x1| *space.d(x0, x1) <= alpha && *space.d(x1, x2) <= beta);
                if !found {
                    return Ok(ExpOutcome::Witness(ExpWitness {
                        x0: space.points[x0].clone(),
                        x2: space.points[x2].clone(),
                        alpha,
                        beta,
                    }));
                }
            }
        }
    }
    Ok(ExpOutcome::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn space(points: &[&str], rows: &[&[&str]]) -> FiniteMetricSpace {
        FiniteMetricSpace::new(
            points.iter().map(|s| s.to_string()).collect(),
            rows.iter()
                .map(|row| row.iter().map(|s| ExtReal::parse(s).unwrap()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ext_real_order_and_sum() {
        assert!(ExtReal::ratio(1, 2) < ExtReal::one());
        assert!(ExtReal::int(1000) < ExtReal::inf());
        assert_eq!(ExtReal::ratio(1, 4) + ExtReal::ratio(1, 4), ExtReal::ratio(1, 2));
        assert_eq!(ExtReal::one() + ExtReal::inf(), ExtReal::inf());
        assert_eq!(ExtReal::parse("3/6").unwrap().to_string(), "1/2");
        assert_eq!(ExtReal::parse("inf").unwrap(), ExtReal::inf());
        assert!(ExtReal::parse("-1/2").is_err());
        assert_eq!(ExtReal::dyadic(3), ExtReal::ratio(1, 8));
        assert_eq!(ExtReal::ratio(1, 8).dyadic_exponent(), Some(3));
        assert_eq!(ExtReal::one().dyadic_exponent(), Some(0));
        assert_eq!(ExtReal::ratio(3, 8).dyadic_exponent(), None);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let s = FiniteMetricSpace::from_json(r#"{"points":["a","b"],"dist":[["0","1/2"],["1/2","0"]]}"#)
            .unwrap();
        let back = serde_json::to_string(&s).unwrap();
        assert_eq!(FiniteMetricSpace::from_json(&back).unwrap(), s);
        assert!(FiniteMetricSpace::from_json(r#"{"points":["a","b"],"dist":[["0","1"]]}"#).is_err());
        let neg = FiniteMetricSpace::from_json(r#"{"points":["a"],"dist":[["-1"]]}"#);
        assert!(matches!(neg, Err(MetricError::Structural(m)) if m.contains("negative")));
    }

    #[test]
    fn classify_examples() {
        let two = FiniteMetricSpace::discrete(2, ExtReal::one());
        let c = classify_space(&two).unwrap();
        assert!(c.premetric && c.metric && c.ultrametric && c.partial_ultrametric);

        let tri = space(&["x", "y", "z"], &[&["0", "3", "1"], &["3", "0", "1"], &["1", "1", "0"]]);
        let c = classify_space(&tri).unwrap();
        assert!(c.premetric && !c.metric && !c.ultrametric);

        let rem = space(
            &["t", "s", "u"],
            &[&["0", "1/2", "1"], &["1/2", "0", "1"], &["1", "1", "1"]],
        );
        let c = classify_space(&rem).unwrap();
        assert!(c.partial_ultrametric && !c.metric && !c.premetric);
        let star = star_completion(&rem).unwrap();
        assert!(star.d(2, 2).is_zero());
        assert_eq!(star.d(0, 1), &ExtReal::ratio(1, 2));
        assert!(classify_space(&star).unwrap().ultrametric);
    }

    #[test]
    fn star_on_one_point_and_identity() {
        let one = space(&["p"], &[&["1/4"]]);
        assert!(star_completion(&one).unwrap().d(0, 0).is_zero());
        let two = FiniteMetricSpace::discrete(2, ExtReal::one());
        assert_eq!(star_completion(&two).unwrap(), two);
        assert!(star_completion(&FiniteMetricSpace::euclidean(&[r(0, 1), r(1, 1), r(3, 1)])).is_err());
    }

    #[test]
    fn products() {
        let one = FiniteMetricSpace::discrete(1, ExtReal::one());
        assert_eq!(product_space(&one, &one).len(), 1);
        let a = FiniteMetricSpace::euclidean(&[r(0, 1), r(1, 1)]);
        let b = FiniteMetricSpace::euclidean(&[r(0, 1), r(2, 1)]);
        let p = product_space(&a, &b);
        let i = p.index_of("(0,0)").unwrap();
        let j = p.index_of("(1,2)").unwrap();
        assert_eq!(p.d(i, j), &ExtReal::int(2));
        let two = FiniteMetricSpace::discrete(2, ExtReal::one());
        let sq = product_space(&two, &two);
        assert_eq!(sq.len(), 4);
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(sq.d(x, y).is_zero(), x == y);
            }
        }
    }

    #[test]
    fn nonexpansive_enumeration() {
        let two = FiniteMetricSpace::discrete(2, ExtReal::one());
        assert_eq!(enumerate_nonexpansive(&two, &two).len(), 4);
        let a = FiniteMetricSpace::euclidean(&[r(0, 1), r(1, 1)]);
        let b = FiniteMetricSpace::euclidean(&[r(0, 1), r(2, 1)]);
        let maps = enumerate_nonexpansive(&a, &b);
        assert_eq!(maps, vec![PointMap::new(vec![0, 0]), PointMap::new(vec![1, 1])]);
        let one = FiniteMetricSpace::discrete(1, ExtReal::one());
        assert_eq!(enumerate_nonexpansive(&b, &one).len(), 1);
    }

    #[test]
    fn hom_distance_examples() {
        let g = FiniteMetricSpace::grid(&r(0, 1), &r(2, 1), &r(1, 2));
        let f = PointMap::identity(g.len());
        for k in HomKind::ALL {
            assert!(hom_distance(k, &g, &g, &f, &f).unwrap().is_zero());
        }
        let bad = PointMap::new(vec![0, 4, 0, 0, 0]);
        assert!(matches!(
            hom_distance(HomKind::Phi, &g, &g, &bad, &f),
            Err(MetricError::Precondition(_))
        ));
    }

    #[test]
    fn exponentiability_examples() {
        let two = FiniteMetricSpace::euclidean(&[r(0, 1), r(1, 1)]);
        let w = check_exponentiable(&two, ExpMode::Full).unwrap();
        assert_eq!(
            w,
            ExpOutcome::Witness(ExpWitness {
                x0: "0".into(),
                x2: "1".into(),
                alpha: ExtReal::ratio(1, 2),
                beta: ExtReal::ratio(1, 2),
            })
        );
        assert_eq!(check_exponentiable(&two, ExpMode::ImageRestricted).unwrap(), ExpOutcome::Ok);
        // adjacent grid points have no midpoint, so a finite grid never passes
        let grid = FiniteMetricSpace::grid(&r(0, 1), &r(1, 1), &r(1, 4));
        assert_eq!(
            check_exponentiable(&grid, ExpMode::Full).unwrap(),
            ExpOutcome::Witness(ExpWitness {
                x0: "0".into(),
                x2: "1/4".into(),
                alpha: ExtReal::ratio(1, 8),
                beta: ExtReal::ratio(1, 8),
            })
        );
        assert_eq!(check_exponentiable(&grid, ExpMode::ImageRestricted).unwrap(), ExpOutcome::Ok);
        assert_eq!(
            check_exponentiable(&FiniteMetricSpace::discrete(1, ExtReal::one()), ExpMode::Full).unwrap(),
            ExpOutcome::Ok
        );
        let tri = space(&["x", "y", "z"], &[&["0", "3", "1"], &["3", "0", "1"], &["1", "1", "0"]]);
        assert!(check_exponentiable(&tri, ExpMode::Full).is_err());
    }

    #[test]
    fn infinite_distances_are_skipped() {
        let s = space(&["a", "b"], &[&["0", "inf"], &["inf", "0"]]);
        assert_eq!(check_exponentiable(&s, ExpMode::Full).unwrap(), ExpOutcome::Ok);
    }
}
