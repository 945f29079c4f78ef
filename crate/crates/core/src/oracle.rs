//! Exact separation moduli of tiny instances.
//!
//! All set partitions of at most eight points are enumerated by restricted
//! growth strings; those meeting the bound become the variables of
//! `min σ` subject to `Σ_P q_P [P separates x,y] ≤ σ d(x,y)/Δ`, `Σ q = 1`,
//! `q ≥ 0`. The LP is solved by a dense two-phase simplex and the optimum is
//! certified by an explicit dual solution.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::metric::{PointSet, Space};
use crate::partition::{BoundMode, Partition};

pub const MAX_ORACLE_POINTS: usize = 8;
pub const GAP_TOLERANCE: f64 = 1e-9;
const PIVOT_EPS: f64 = 1e-9;

/// All set partitions of `{0..n}` as label vectors in restricted growth form.
pub fn restricted_growth_strings(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut a = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        out.push(a.clone());
        // Rightmost position that can still grow.
        let mut i = n - 1;
        loop {
            if i == 0 {
                return out;
            }
            if a[i] <= maxes[i - 1] {
                break;
            }
            i -= 1;
        }
        a[i] += 1;
        maxes[i] = maxes[i - 1].max(a[i]);
        for j in i + 1..n {
            a[j] = 0;
            maxes[j] = maxes[i];
        }
    }
}

/// Every partition of `s` whose clusters satisfy the bound of `mode` at `Δ`.
pub fn enumerate_bounded_partitions(s: &PointSet, delta: f64, mode: BoundMode) -> Result<Vec<Partition>> {
    let n = s.len();
    if n > MAX_ORACLE_POINTS {
        return Err(Error::Refusal(format!("exact enumeration is limited to {MAX_ORACLE_POINTS} points, got {n}")));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return domain(format!("scale {delta} must be positive"));
    }
    let mut out = Vec::new();
    for labels in restricted_growth_strings(n) {
        let p = Partition::from_labels(&labels, delta, mode);
        match p.validate(s) {
            Ok(()) => out.push(p),
            Err(Error::Validation(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Certified optimum of the separation LP.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSep {
    /// `σ*`, or `∞` when no bounded random partition exists.
    pub sigma_star: f64,
    /// Probability of each enumerated partition in an optimal solution.
    pub weights: Vec<f64>,
    pub partitions: Vec<Partition>,
    /// Lower bound from the dual solution.
    pub dual_bound: f64,
    pub gap: f64,
}

pub fn exact_sep(s: &PointSet, delta: f64, mode: BoundMode) -> Result<ExactSep> {
    let parts = enumerate_bounded_partitions(s, delta, mode)?;
    let n = s.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let infeasible = |parts: Vec<Partition>| ExactSep {
        sigma_star: f64::INFINITY,
        weights: vec![0.0; parts.len()],
        partitions: parts,
        dual_bound: f64::INFINITY,
        gap: 0.0,
    };
    if parts.is_empty() {
        return Ok(infeasible(parts));
    }
    if pairs.is_empty() {
        let mut w = vec![0.0; parts.len()];
        w[0] = 1.0;
        return Ok(ExactSep { sigma_star: 0.0, weights: w, partitions: parts, dual_bound: 0.0, gap: 0.0 });
    }
    let w: Vec<f64> = pairs.iter().map(|&(i, j)| s.d(i, j) / delta).collect();
    let sep: Vec<Vec<f64>> = parts
        .iter()
        .map(|p| pairs.iter().map(|&(i, j)| if p.separates(i, j) { 1.0 } else { 0.0 }).collect())
        .collect();
    // Coincident points force σ = ∞ if every partition separates them.
    for (k, &wk) in w.iter().enumerate() {
        if wk == 0.0 && sep.iter().all(|row| row[k] == 1.0) {
            return Ok(infeasible(parts));
        }
    }
    let np = parts.len();
    let m = pairs.len();
    // Columns: q_P (np), σ, slacks (m). Rows: pairs, then Σq = 1.
    let cols = np + 1 + m;
    let rows = m + 1;
    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for (pi, row) in sep.iter().enumerate() {
        for k in 0..m {
            a[(k, pi)] = row[k];
        }
        a[(m, pi)] = 1.0;
    }
    for k in 0..m {
        a[(k, np)] = -w[k];
        a[(k, np + 1 + k)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(rows);
    b[m] = 1.0;
    let mut c = DVector::<f64>::zeros(cols);
    c[np] = 1.0;
    let sol = match simplex(&a, &b, &c)? {
        LpOutcome::Optimal(sol) => sol,
        LpOutcome::Infeasible => return Ok(infeasible(parts)),
        LpOutcome::Unbounded => return Err(Error::Numerical { msg: "separation LP reported unbounded".into(), achieved: f64::NAN }),
    };
    // Primal value recomputed from the weights alone.
    let mut q: Vec<f64> = sol.x[..np].iter().map(|v| v.max(0.0)).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= total);
    let mut primal = 0.0f64;
    for k in 0..m {
        let prob: f64 = (0..np).map(|pi| q[pi] * sep[pi][k]).sum();
        if w[k] == 0.0 {
            if prob > GAP_TOLERANCE {
                return Err(Error::Numerical { msg: "coincident points separated in the optimum".into(), achieved: prob });
            }
        } else {
            primal = primal.max(prob / w[k]);
        }
    }
    // Dual: λ_k = −y_k ≥ 0 scaled to Σ λ w = 1, bound min_P Σ λ sep_P.
    let lambda: Vec<f64> = (0..m).map(|k| (-sol.y[k]).max(0.0)).collect();
    let mass: f64 = lambda.iter().zip(&w).map(|(l, w)| l * w).sum();
    let dual = if mass > 0.0 {
        sep.iter()
            .map(|row| row.iter().zip(&lambda).map(|(s, l)| s * l).sum::<f64>() / mass)
            .fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    let gap = primal - dual;
    if gap.abs() > GAP_TOLERANCE {
        return Err(Error::Numerical { msg: format!("duality gap {gap} above tolerance"), achieved: gap });
    }
    Ok(ExactSep { sigma_star: primal, weights: q, partitions: parts, dual_bound: dual, gap })
}

#[derive(Clone, Debug)]
struct LpSolution {
    x: Vec<f64>,
    /// Row duals `y` with `A^T y ≤ c` at optimality.
    y: Vec<f64>,
}

#[derive(Clone, Debug)]
enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

/// `min c·x` subject to `Ax = b`, `x ≥ 0`, `b ≥ 0`, by a two-phase revised
/// simplex with Bland's rule. The basis is refactored from `A` at every
/// step, so no error accumulates across pivots.
fn simplex(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Result<LpOutcome> {
    let (m, n) = a.shape();
    if b.iter().any(|v| *v < 0.0) {
        return domain("right-hand side must be nonnegative");
    }
    // Columns n..n+m are artificials, one per row.
    let mut basis: Vec<usize> = (n..n + m).collect();
    let phase1 = DVector::from_fn(n + m, |j, _| if j >= n { 1.0 } else { 0.0 });
    if !run_phase(a, b, &mut basis, &phase1, n + m)? {
        return Err(Error::Numerical { msg: "phase one unbounded".into(), achieved: f64::NAN });
    }
    let xb = basic_values(a, b, &basis)?;
    let infeas: f64 = basis.iter().zip(xb.iter()).filter(|(&j, _)| j >= n).map(|(_, v)| v.max(0.0)).sum();
    if infeas > 1e-9 {
        return Ok(LpOutcome::Infeasible);
    }
    // Swap zero-level artificials for structural columns where possible.
    for i in 0..m {
        if basis[i] >= n {
            let binv = factor(a, &basis)?;
            let row = binv.row(i).into_owned();
            if let Some(j) = (0..n).filter(|j| !basis.contains(j)).find(|&j| (&row * a.column(j))[0].abs() > 1e-9) {
                basis[i] = j;
            }
        }
    }
    let cost = DVector::from_fn(n + m, |j, _| if j < n { c[j] } else { 0.0 });
    // Artificials may not re-enter.
    if !run_phase(a, b, &mut basis, &cost, n)? {
        return Ok(LpOutcome::Unbounded);
    }
    let xb = basic_values(a, b, &basis)?;
    let mut x = vec![0.0; n];
    for (k, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = xb[k];
        }
    }
    let y = duals(a, &basis, &cost)?;
    Ok(LpOutcome::Optimal(LpSolution { x, y: y.iter().cloned().collect() }))
}

fn column(a: &DMatrix<f64>, j: usize) -> DVector<f64> {
    let (m, n) = a.shape();
    if j < n {
        a.column(j).into_owned()
    } else {
        DVector::from_fn(m, |r, _| if r == j - n { 1.0 } else { 0.0 })
    }
}

/// `B^{-1}` of the basis columns.
fn factor(a: &DMatrix<f64>, basis: &[usize]) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let mut bmat = DMatrix::<f64>::zeros(m, m);
    for (k, &j) in basis.iter().enumerate() {
        bmat.set_column(k, &column(a, j));
    }
    bmat.try_inverse().ok_or_else(|| Error::Numerical { msg: "singular basis".into(), achieved: f64::NAN })
}

fn basic_values(a: &DMatrix<f64>, b: &DVector<f64>, basis: &[usize]) -> Result<DVector<f64>> {
    Ok(factor(a, basis)? * b)
}

/// `y` with `B^T y = c_B`.
fn duals(a: &DMatrix<f64>, basis: &[usize], cost: &DVector<f64>) -> Result<DVector<f64>> {
    let binv = factor(a, basis)?;
    let cb = DVector::from_fn(basis.len(), |k, _| cost[basis[k]]);
    Ok(binv.transpose() * cb)
}

/// Minimizes `cost` with entering columns below `enter_limit`. Returns false
/// if unbounded.
fn run_phase(a: &DMatrix<f64>, b: &DVector<f64>, basis: &mut [usize], cost: &DVector<f64>, enter_limit: usize) -> Result<bool> {
    let m = a.nrows();
    for _ in 0..50_000 {
        let binv = factor(a, basis)?;
        let xb = &binv * b;
        let cb = DVector::from_fn(m, |k, _| cost[basis[k]]);
        let y = binv.transpose() * cb;
        let mut entering = None;
        for j in 0..enter_limit {
            if basis.contains(&j) {
                continue;
            }
            let r = cost[j] - column(a, j).dot(&y);
            if r < -1e-11 {
                entering = Some(j);
                break;
            }
        }
        let Some(j) = entering else { return Ok(true) };
        let dir = &binv * column(a, j);
        let mut leave: Option<(f64, usize)> = None;
        for i in 0..m {
            if dir[i] > PIVOT_EPS {
                let ratio = xb[i].max(0.0) / dir[i];
                let better = match leave {
                    None => true,
                    Some((best, k)) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[k]),
                };
                if better {
                    leave = Some((ratio, i));
                }
            }
        }
        let Some((_, i)) = leave else { return Ok(false) };
        basis[i] = j;
    }
    Err(Error::Numerical { msg: "simplex iteration limit reached".into(), achieved: f64::NAN })
}

/// Named tiny instances in the plain Euclidean norm, with unit side length.
pub fn named_instance(name: &str) -> Result<PointSet> {
    let h = (0.75f64).sqrt();
    let rows: Vec<Vec<f64>> = match name {
        "two-point" => vec![vec![0.0], vec![1.0]],
        "equilateral3" => vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]],
        "square4" => vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        "path5" => (0..5).map(|i| vec![i as f64]).collect(),
        "cube8" => (0..8).map(|b: u32| (0..3).map(|k| ((b >> k) & 1) as f64).collect()).collect(),
        _ => return domain(format!("unknown instance {name:?}; known: {}", INSTANCE_NAMES.join(", "))),
    };
    // Unit weights keep the side lengths exact.
    let dim = rows[0].len();
    PointSet::new(Space::new(2.0, vec![1.0; dim])?, rows, None)
}

pub const INSTANCE_NAMES: [&str; 5] = ["two-point", "equilateral3", "square4", "path5", "cube8"];

#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub instance: String,
    pub delta: f64,
    pub mode: BoundMode,
    pub sigma_star: f64,
}

pub const ORACLE_CSV_HEADER: &str = "instance,delta,mode,sigma_star";

/// `σ*` for every instance, scale and mode.
pub fn oracle_table(instances: &[&str], deltas: &[f64], modes: &[BoundMode]) -> Result<Vec<OracleRow>> {
    let mut out = Vec::new();
    for name in instances {
        let s = Arc::new(named_instance(name)?);
        for &delta in deltas {
            for &mode in modes {
                let r = exact_sep(&s, delta, mode)?;
                out.push(OracleRow { instance: name.to_string(), delta, mode, sigma_star: r.sigma_star });
            }
        }
    }
    Ok(out)
}

pub fn write_oracle_csv(rows: &[OracleRow], out: &mut dyn std::io::Write) -> Result<()> {
    writeln!(out, "{ORACLE_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{},{:e},{},{:e}", r.instance, r.delta, r.mode.name(), r.sigma_star)?;
    }
    Ok(())
}

/// Tabulated reference values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AnalyticRef {
    /// Euclidean distortion `k^{1/p−1/2}` of `{0,1}^k ⊂ ℓ_p`, `1 ≤ p ≤ 2`.
    HypercubeDistortion { k: usize, p: f64 },
    /// Exponent `max{1/p, 1/2}` of `σ(p, k)` in `k`.
    SeparationExponent { p: f64 },
    /// The upper template `p² √(ln n)`.
    SepUpperTemplate { p: f64, n: usize },
}

impl AnalyticRef {
    pub fn value(&self) -> Result<f64> {
        match *self {
            AnalyticRef::HypercubeDistortion { k, p } => {
                if !(1.0..=2.0).contains(&p) || k == 0 {
                    return domain(format!("hypercube distortion needs k >= 1 and 1 <= p <= 2, got k = {k}, p = {p}"));
                }
                Ok((k as f64).powf(1.0 / p - 0.5))
            }
            AnalyticRef::SeparationExponent { p } => {
                if !(p >= 1.0) {
                    return domain(format!("p = {p} must be >= 1"));
                }
                Ok((1.0 / p).max(0.5))
            }
            AnalyticRef::SepUpperTemplate { p, n } => {
                if !(p >= 2.0) || n < 2 {
                    return domain(format!("template needs p >= 2 and n >= 2, got p = {p}, n = {n}"));
                }
                Ok(p * p * (n as f64).ln().sqrt())
            }
        }
    }
}

impl fmt::Display for AnalyticRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalyticRef::HypercubeDistortion { k, p } => write!(f, "hypercube-distortion:k={k},p={p}"),
            AnalyticRef::SeparationExponent { p } => write!(f, "separation-exponent:p={p}"),
            AnalyticRef::SepUpperTemplate { p, n } => write!(f, "sep-upper-template:p={p},n={n}"),
        }
    }
}

/// Parses names such as `hypercube-distortion:k=4,p=1` and returns the value.
pub fn analytic_reference(name: &str) -> Result<f64> {
    parse_reference(name)?.value()
}

pub fn parse_reference(name: &str) -> Result<AnalyticRef> {
    let (kind, args) = name.split_once(':').unwrap_or((name, ""));
    let mut k = None;
    let mut p = None;
    let mut n = None;
    for kv in args.split(',').filter(|s| !s.is_empty()) {
        let (key, val) = kv.split_once('=').ok_or_else(|| Error::Parse(format!("bad argument {kv:?}")))?;
        let bad = |_| Error::Parse(format!("bad value {val:?} for {key}"));
        match key {
            "k" => k = Some(val.parse::<usize>().map_err(bad)?),
            "n" => n = Some(val.parse::<usize>().map_err(bad)?),
            "p" => p = Some(val.parse::<f64>().map_err(|_| Error::Parse(format!("bad value {val:?} for p")))?),
            _ => return Err(Error::Parse(format!("unknown argument {key:?}"))),
        }
    }
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| Error::Parse(format!("{kind} needs {key}")));
    match kind {
        "hypercube-distortion" => Ok(AnalyticRef::HypercubeDistortion {
            k: k.ok_or_else(|| Error::Parse("hypercube-distortion needs k".into()))?,
            p: need(p, "p")?,
        }),
        "separation-exponent" => Ok(AnalyticRef::SeparationExponent { p: need(p, "p")? }),
        "sep-upper-template" => Ok(AnalyticRef::SepUpperTemplate {
            p: need(p, "p")?,
            n: n.ok_or_else(|| Error::Parse("sep-upper-template needs n".into()))?,
        }),
        _ => Err(Error::Parse(format!("unknown reference {kind:?}"))),
    }
}
