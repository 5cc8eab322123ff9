//! Finite Markov kernels, lumpability, and first-passage series for ℤ₊ birth-death chains.

use crate::error::{Error, Result};

/// Tolerance on row sums of a stochastic matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Tolerance used by [`lump`] when checking the lumpability precondition.
pub const LUMP_TOL: f64 = 1e-12;

/// Row-stochastic n×n matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteKernel {
    n: usize,
    data: Vec<f64>,
}

impl FiniteKernel {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidKernel("a kernel needs at least one state".into()));
        }
        if data.len() != n * n {
            return Err(Error::InvalidKernel(format!("expected {} entries, got {}", n * n, data.len())));
        }
        for (i, row) in data.chunks(n).enumerate() {
            if let Some((j, v)) = row.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidKernel(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidKernel(format!("row {i} sums to {sum}")));
            }
        }
        Ok(FiniteKernel { n, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::InvalidKernel(format!("row {bad} has {} entries, expected {n}", rows[bad].len())));
        }
        Self::new(n, rows.into_iter().flatten().collect())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        FiniteKernel { n, data }
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks(self.n)
    }

    /// μQ, accumulated row by row in index order.
    pub fn step(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (m, row) in mu.iter().zip(self.rows()) {
            if *m != 0.0 {
                for (o, q) in out.iter_mut().zip(row) {
                    *o += m * q;
                }
            }
        }
        out
    }
}

/// A labelling f: state → label with labels contiguous from 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lumping {
    labels: Vec<usize>,
    n_labels: usize,
}

impl Lumping {
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let n_labels = labels.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_labels];
        for &l in &labels {
            seen[l] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidParameter(format!(
                "labels must be contiguous from 0; label {missing} is unused"
            )));
        }
        Ok(Lumping { labels, n_labels })
    }

    pub fn identity(n: usize) -> Self {
        Lumping {
            labels: (0..n).collect(),
            n_labels: n,
        }
    }

    pub fn label(&self, state: usize) -> usize {
        self.labels[state]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn states(&self) -> usize {
        self.labels.len()
    }

    /// First state carrying each label.
    pub fn canonical_representatives(&self) -> Vec<usize> {
        let mut reps = vec![usize::MAX; self.n_labels];
        for (s, &l) in self.labels.iter().enumerate() {
            if reps[l] == usize::MAX {
                reps[l] = s;
            }
        }
        reps
    }

    /// Image of a distribution on states.
    pub fn push(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_labels];
        for (m, &l) in mu.iter().zip(&self.labels) {
            out[l] += m;
        }
        out
    }
}

/// Outcome of a lumpability check.
#[derive(Clone, Debug, PartialEq)]
pub struct LumpabilityReport {
    /// Every same-label pair has equal pushforward rows Q(s, f⁻¹(·)) within tolerance.
    pub pushforward_lumpable: bool,
    /// Every same-label pair has equal full rows, i.e. equal laws of X₁.
    pub rows_equal: bool,
    /// First same-label pair whose pushforward rows differ.
    pub witness: Option<(usize, usize)>,
}

fn check_dims(q: &FiniteKernel, f: &Lumping) -> Result<()> {
    if q.states() != f.states() {
        return Err(Error::InvalidParameter(format!(
            "kernel has {} states but the lumping labels {}",
            q.states(),
            f.states()
        )));
    }
    Ok(())
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Checks both the pushforward condition (sufficient for f(X) to be Markov) and full row
/// equality (equality of the laws of X₁), reporting them separately.
pub fn check_lumpability(q: &FiniteKernel, f: &Lumping, tol: f64) -> Result<LumpabilityReport> {
    check_dims(q, f)?;
    let pushed: Vec<Vec<f64>> = q.rows().map(|r| f.push(r)).collect();
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); f.n_labels()];
    for s in 0..q.states() {
        classes[f.label(s)].push(s);
    }
    let mut witness = None;
    let mut rows_equal = true;
    for class in &classes {
        for (k, &s) in class.iter().enumerate() {
            for &r in &class[k + 1..] {
                if witness.is_none() && !close(&pushed[s], &pushed[r], tol) {
                    witness = Some((s, r));
                }
                if rows_equal && !close(q.row(s), q.row(r), tol) {
                    rows_equal = false;
                }
            }
        }
    }
    Ok(LumpabilityReport {
        pushforward_lumpable: witness.is_none(),
        rows_equal,
        witness,
    })
}

/// True iff states with equal labels have pushforward rows equal within `tol`.
pub fn is_lumpable(q: &FiniteKernel, f: &Lumping, tol: f64) -> bool {
    check_lumpability(q, f, tol).is_ok_and(|r| r.pushforward_lumpable)
}

/// Lumped kernel Q̄(y, B) = Q(x, f⁻¹(B)) using the first state of each label as representative.
pub fn lump(q: &FiniteKernel, f: &Lumping) -> Result<FiniteKernel> {
    lump_with_representatives(q, f, &f.canonical_representatives())
}

/// [`lump`] with caller-chosen representatives, one state per label.
pub fn lump_with_representatives(q: &FiniteKernel, f: &Lumping, reps: &[usize]) -> Result<FiniteKernel> {
    let report = check_lumpability(q, f, LUMP_TOL)?;
    if let Some((s, r)) = report.witness {
        return Err(Error::NotLumpable(s, r));
    }
    if reps.len() != f.n_labels() {
        return Err(Error::InvalidParameter(format!(
            "need one representative per label ({}), got {}",
            f.n_labels(),
            reps.len()
        )));
    }
    let mut data = Vec::with_capacity(f.n_labels() * f.n_labels());
    for (y, &x) in reps.iter().enumerate() {
        if x >= q.states() || f.label(x) != y {
            return Err(Error::InvalidParameter(format!("state {x} does not represent label {y}")));
        }
        data.extend(f.push(q.row(x)));
    }
    FiniteKernel::new(f.n_labels(), data)
}

/// Max over n = 1..=n_max of the total-variation distance between the law of f(Xₙ) under Q
/// from μ₀ and the law of the Q̄-chain started from f#μ₀.
pub fn pushforward_equivalence(q: &FiniteKernel, f: &Lumping, mu0: &[f64], n_max: usize) -> Result<f64> {
    check_dims(q, f)?;
    if mu0.len() != q.states() {
        return Err(Error::InvalidParameter(format!(
            "initial distribution has {} entries for {} states",
            mu0.len(),
            q.states()
        )));
    }
    let lumped = lump(q, f)?;
    let mut mu = mu0.to_vec();
    let mut nu = f.push(mu0);
    let mut worst: f64 = 0.0;
    for _ in 0..n_max {
        mu = q.step(&mu);
        nu = lumped.step(&nu);
        let tv = 0.5 * f.push(&mu).iter().zip(&nu).map(|(a, b)| (a - b).abs()).sum::<f64>();
        worst = worst.max(tv);
    }
    Ok(worst)
}

/// Result of summing a first-passage series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SeriesExtinction {
    /// The series converged; `log_probability` is the natural log of the hitting probability.
    Converged { log_probability: f64, terms: u64 },
    /// The series diverges, so the target is hit almost surely.
    Certain,
    /// Neither convergence nor divergence was established within the term budget.
    Inconclusive { terms: u64 },
}

impl SeriesExtinction {
    pub fn probability(&self) -> Option<f64> {
        match *self {
            SeriesExtinction::Converged { log_probability, .. } => Some(log_probability.exp()),
            SeriesExtinction::Certain => Some(1.0),
            SeriesExtinction::Inconclusive { .. } => None,
        }
    }

    pub fn log_probability(&self) -> Option<f64> {
        match *self {
            SeriesExtinction::Converged { log_probability, .. } => Some(log_probability),
            SeriesExtinction::Certain => Some(0.0),
            SeriesExtinction::Inconclusive { .. } => None,
        }
    }
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
struct LogSum {
    max: f64,
    scaled: f64,
}

impl LogSum {
    fn new() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    fn add(&mut self, log_term: f64) {
        if log_term == f64::NEG_INFINITY {
            return;
        }
        if log_term <= self.max {
            self.scaled += (log_term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - log_term).exp() + 1.0;
            self.max = log_term;
        }
    }

    fn value(&self) -> f64 {
        if self.scaled == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Relative size below which the next term ends the summation.
pub const SERIES_REL_TOL: f64 = 1e-16;
/// Partial sums above this mean the series diverges.
pub const SERIES_DIVERGENCE: f64 = 1e30;
const SERIES_MAX_TERMS: u64 = 1_000_000;

/// P(hit s) from q for a ℤ₊ birth-death chain, given log ρ_j(s) for j ≥ s + 1:
/// Σ_{j≥q} ρ_j(s) / (1 + Σ_{j≥s+1} ρ_j(s)), summed in log space.
///
/// Summation stops once the current term is decreasing and below
/// [`SERIES_REL_TOL`] times both partial sums. The series is declared divergent when its
/// partial sum exceeds [`SERIES_DIVERGENCE`] while terms still grow, or when after the term
/// budget its terms have stopped decaying.
pub fn series_hitting<F: Fn(u64) -> f64>(log_rho: F, first: u64, q: u64) -> SeriesExtinction {
    sum_series(log_rho, first, q, true)
}

/// [`series_hitting`] for series known to converge: partial sums may exceed
/// [`SERIES_DIVERGENCE`] (large early ρ terms) without being reported as divergent.
pub(crate) fn convergent_series_hitting<F: Fn(u64) -> f64>(log_rho: F, first: u64, q: u64) -> SeriesExtinction {
    sum_series(log_rho, first, q, false)
}

fn sum_series<F: Fn(u64) -> f64>(log_rho: F, first: u64, q: u64, detect_divergence: bool) -> SeriesExtinction {
    let log_tol = SERIES_REL_TOL.ln();
    let log_div = SERIES_DIVERGENCE.ln();
    let mut all = LogSum::new();
    let mut tail = LogSum::new();
    let mut prev = f64::INFINITY;
    let mut half_way = f64::NAN;
    let budget = SERIES_MAX_TERMS + q.saturating_sub(first);
    let mut j = first;
    loop {
        let lt = log_rho(j);
        all.add(lt);
        if j >= q {
            tail.add(lt);
        }
        let terms = j - first + 1;
        if detect_divergence && all.value() > log_div && lt >= prev {
            return SeriesExtinction::Certain;
        }
        if j >= q && lt < prev && lt < tail.value() + log_tol && lt < all.value() + log_tol {
            let mut den = LogSum::new();
            den.add(0.0);
            den.add(all.value());
            let log_den = den.value();
            return SeriesExtinction::Converged {
                log_probability: tail.value() - log_den,
                terms,
            };
        }
        if terms == budget / 2 {
            half_way = lt;
        }
        if detect_divergence && terms >= budget {
            return if lt >= half_way {
                SeriesExtinction::Certain
            } else {
                SeriesExtinction::Inconclusive { terms }
            };
        }
        prev = lt;
        j += 1;
    }
}

/// Extinction probability p_q = Σ_{j≥q} ρ_j / (1 + Σ_{j≥1} ρ_j) from log ρ_j.
pub fn series_extinction<F: Fn(u64) -> f64>(log_rho: F, q: u64) -> SeriesExtinction {
    series_hitting(log_rho, 1, q.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_state() -> FiniteKernel {
        FiniteKernel::from_rows(vec![
            vec![0.3, 0.3, 0.4],
            vec![0.3, 0.3, 0.4],
            vec![0.1, 0.2, 0.7],
        ])
        .unwrap()
    }

    fn f01() -> Lumping {
        Lumping::new(vec![0, 0, 1]).unwrap()
    }

    #[test]
    fn equal_rows_are_lumpable() {
        let r = check_lumpability(&three_state(), &f01(), 1e-12).unwrap();
        assert!(r.pushforward_lumpable && r.rows_equal);
        let lumped = lump(&three_state(), &f01()).unwrap();
        let expected = [0.6, 0.4, 0.3, 0.7];
        for (i, e) in expected.iter().enumerate() {
            assert!((lumped.get(i / 2, i % 2) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn pushforward_equal_but_rows_differ() {
        let q = FiniteKernel::from_rows(vec![
            vec![0.3, 0.3, 0.4],
            vec![0.4, 0.2, 0.4],
            vec![0.1, 0.2, 0.7],
        ])
        .unwrap();
        let r = check_lumpability(&q, &f01(), 1e-12).unwrap();
        assert!(r.pushforward_lumpable);
        assert!(!r.rows_equal);
        assert!(is_lumpable(&q, &f01(), 1e-12));
    }

    #[test]
    fn non_lumpable_names_witness() {
        let q = FiniteKernel::from_rows(vec![
            vec![0.3, 0.3, 0.4],
            vec![0.1, 0.1, 0.8],
            vec![0.1, 0.2, 0.7],
        ])
        .unwrap();
        assert!(!is_lumpable(&q, &f01(), 1e-12));
        assert!(matches!(lump(&q, &f01()), Err(Error::NotLumpable(0, 1))));
    }

    #[test]
    fn identity_lumping_is_trivial() {
        let q = FiniteKernel::from_rows(vec![
            vec![0.5, 0.25, 0.25],
            vec![0.1, 0.6, 0.3],
            vec![0.2, 0.2, 0.6],
        ])
        .unwrap();
        let id = Lumping::identity(3);
        assert!(is_lumpable(&q, &id, 0.0));
        assert_eq!(lump(&q, &id).unwrap(), q);
        assert_eq!(pushforward_equivalence(&q, &id, &[0.2, 0.3, 0.5], 25).unwrap(), 0.0);
    }

    #[test]
    fn unvisited_class_row_is_stochastic() {
        // label 1 is transient: never re-entered once left
        let q = FiniteKernel::from_rows(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.5, 0.0, 0.5],
            vec![0.5, 0.5, 0.0],
        ])
        .unwrap();
        let f = Lumping::new(vec![0, 1, 1]).unwrap();
        let lumped = lump(&q, &f).unwrap();
        assert!((lumped.row(1).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_state_pushforward_discrepancy() {
        let d = pushforward_equivalence(&three_state(), &f01(), &[1.0, 0.0, 0.0], 20).unwrap();
        assert!(d <= 1e-12, "{d}");
    }

    #[test]
    fn kernel_validation() {
        assert!(FiniteKernel::from_rows(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(FiniteKernel::from_rows(vec![vec![1.5, -0.5], vec![0.5, 0.5]]).is_err());
        assert!(FiniteKernel::from_rows(vec![vec![1.0], vec![0.5, 0.5]]).is_err());
        assert!(Lumping::new(vec![0, 2]).is_err());
    }

    #[test]
    fn geometric_series() {
        // ρ_j = 2^{-j}: Σ_{j≥1} = 1, so p_1 = 1/2
        let out = series_extinction(|j| -(j as f64) * 2f64.ln(), 1);
        assert!((out.probability().unwrap() - 0.5).abs() < 1e-15, "{out:?}");
        // p_3 = (1/4) / 2
        let out = series_extinction(|j| -(j as f64) * 2f64.ln(), 3);
        assert!((out.probability().unwrap() - 0.125).abs() < 1e-15, "{out:?}");
    }

    #[test]
    fn divergent_series_is_certain() {
        assert_eq!(series_extinction(|_| 0.0, 1), SeriesExtinction::Certain);
        assert_eq!(series_extinction(|j| j as f64, 4), SeriesExtinction::Certain);
    }

    #[test]
    fn slowly_convergent_series_is_inconclusive() {
        let out = series_extinction(|j| -2.0 * (j as f64).ln(), 1);
        assert!(matches!(out, SeriesExtinction::Inconclusive { .. }), "{out:?}");
    }
}
