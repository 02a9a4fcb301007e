//! Markov-modulated Poisson process baseline for binary interval data.
//!
//! A hidden continuous-time chain with generator `G` switches between `K`
//! Poisson rates; an interval is marked 1 when it holds at least one event.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frap::BinaryPanel;
use crate::rng;

const ROW_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmppParams {
    /// Row-major `K × K` generator.
    generator: Vec<Vec<f64>>,
    rates: Vec<f64>,
}

impl MmppParams {
    pub fn new(generator: DMatrix<f64>, rates: Vec<f64>) -> Result<Self> {
        let k = rates.len();
        if k == 0 || generator.shape() != (k, k) {
            return Err(Error::InvalidArgument(format!(
                "generator {:?} does not match {k} rates",
                generator.shape()
            )));
        }
        if rates.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rates must be finite and >= 0: {rates:?}"
            )));
        }
        for i in 0..k {
            let row = generator.row(i);
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("generator".into()));
            }
            if (0..k).any(|j| j != i && row[j] < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "negative off-diagonal in row {i}"
                )));
            }
            if row.sum().abs() > ROW_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "generator row {i} does not sum to 0"
                )));
            }
        }
        Ok(MmppParams {
            generator: generator
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            rates,
        })
    }

    /// Two states with switching rates `q12`, `q21`.
    pub fn two_state(q12: f64, q21: f64, rate1: f64, rate2: f64) -> Result<Self> {
        MmppParams::new(
            DMatrix::from_row_slice(2, 2, &[-q12, q12, q21, -q21]),
            vec![rate1, rate2],
        )
    }

    pub fn states(&self) -> usize {
        self.rates.len()
    }

    pub fn generator(&self) -> DMatrix<f64> {
        let k = self.states();
        DMatrix::from_fn(k, k, |i, j| self.generator[i][j])
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Relabels states by `perm`: new state `i` is old state `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let g = self.generator();
        let k = self.states();
        let pg = DMatrix::from_fn(k, k, |i, j| g[(perm[i], perm[j])]);
        MmppParams::new(pg, perm.iter().map(|&p| self.rates[p]).collect())
    }

    fn sorted_by_rate(&self) -> Result<Self> {
        let mut perm: Vec<usize> = (0..self.states()).collect();
        perm.sort_by(|&a, &b| self.rates[a].total_cmp(&self.rates[b]));
        self.permuted(&perm)
    }
}

/// `exp(M)` by scaling and squaring with a Padé approximant.
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(
            "matrix exponential needs a square matrix".into(),
        ));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential input".into()));
    }
    let e = m.clone().exp();
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential overflowed".into()));
    }
    Ok(e)
}

fn strongly_connected(g: &DMatrix<f64>) -> bool {
    let k = g.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; k];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                let w = if forward { g[(i, j)] } else { g[(j, i)] };
                if j != i && w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Stationary law of an irreducible generator: `πG = 0`, `π·1 = 1`.
pub fn mmpp_stationary(g: &DMatrix<f64>) -> Result<DVector<f64>> {
    let k = g.nrows();
    if k == 0 || !g.is_square() {
        return Err(Error::InvalidArgument(
            "generator must be square and non-empty".into(),
        ));
    }
    if !strongly_connected(g) {
        return Err(Error::ReducibleGenerator);
    }
    let mut a = g.transpose();
    a.row_mut(k - 1).fill(1.0);
    let mut b = DVector::zeros(k);
    b[k - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NotPositiveDefinite("stationary system is singular".into()))?;
    Ok(pi.map(|v| v.max(0.0)))
}

/// `(M0, M1)`: state transition over `Δ` jointly with no event / at least one.
pub fn mmpp_interval_matrices(params: &MmppParams, delta: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let g = params.generator();
    let lam = DMatrix::from_diagonal(&DVector::from_column_slice(params.rates()));
    let m0 = matrix_exponential(&((&g - lam) * delta))?;
    let full = matrix_exponential(&(g * delta))?;
    let clamp = |m: DMatrix<f64>| m.map(|v| if v < 0.0 { 0.0 } else { v });
    let m1 = clamp(full - &m0);
    Ok((clamp(m0), m1))
}

fn series_loglik(series: &[u8], pi: &DVector<f64>, m0: &DMatrix<f64>, m1: &DMatrix<f64>) -> f64 {
    let mut alpha = pi.transpose();
    let mut ll = 0.0;
    for &z in series {
        alpha = if z == 1 { &alpha * m1 } else { &alpha * m0 };
        let s = alpha.sum();
        if !(s > 0.0) {
            return f64::NEG_INFINITY;
        }
        ll += s.ln();
        alpha /= s;
    }
    ll
}

/// Sum over replicates of `log(π Π_i M_{Z_i} 1)`, using the panel's `Δ`.
pub fn mmpp_loglik(panel: &BinaryPanel, params: &MmppParams) -> Result<f64> {
    let pi = stationary_or_single(params)?;
    let (m0, m1) = mmpp_interval_matrices(params, panel.grid().delta)?;
    let ll: f64 = panel.rows().iter().map(|z| series_loglik(z, &pi, &m0, &m1)).sum();
    if ll.is_nan() {
        return Err(Error::NonFinite("MMPP log-likelihood".into()));
    }
    Ok(ll)
}

fn stationary_or_single(params: &MmppParams) -> Result<DVector<f64>> {
    if params.states() == 1 {
        Ok(DVector::from_element(1, 1.0))
    } else {
        mmpp_stationary(&params.generator())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MmppFitOptions {
    pub starts: usize,
    pub seed: u64,
    pub max_iters: u64,
    /// Simplex standard-deviation tolerance on the objective.
    pub tolerance: f64,
}

impl Default for MmppFitOptions {
    fn default() -> Self {
        MmppFitOptions {
            starts: 8,
            seed: 0,
            max_iters: 5000,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmppFit {
    pub params: MmppParams,
    pub loglik: f64,
    pub start_logliks: Vec<f64>,
    pub iterations: u64,
    pub converged: bool,
}

/// Unconstrained coordinates: logs of off-diagonal generator entries
/// (row-major) followed by log rates.
fn unpack(theta: &[f64], k: usize) -> Result<MmppParams> {
    let mut g = DMatrix::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                g[(i, j)] = theta[idx].exp();
                idx += 1;
            }
        }
        let s: f64 = g.row(i).sum();
        g[(i, i)] = -s;
    }
    MmppParams::new(g, theta[idx..].iter().map(|v| v.exp()).collect())
}

struct NegLogLik<'a> {
    panel: &'a BinaryPanel,
    k: usize,
}

impl CostFunction for NegLogLik<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let ll = unpack(theta, self.k)
            .and_then(|p| mmpp_loglik(self.panel, &p))
            .unwrap_or(f64::NEG_INFINITY);
        Ok(if ll.is_finite() { -ll } else { f64::MAX })
    }
}

struct Run {
    theta: Vec<f64>,
    cost: f64,
    iters: u64,
    converged: bool,
}

fn nelder_mead(panel: &BinaryPanel, k: usize, start: Vec<f64>, opts: &MmppFitOptions) -> Result<Run> {
    let mut simplex = vec![start.clone()];
    for i in 0..start.len() {
        let mut v = start.clone();
        v[i] += 0.5;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(opts.tolerance)
        .map_err(|e| Error::Optimization(e.to_string()))?;
    let res = Executor::new(NegLogLik { panel, k }, solver)
        .configure(|s| s.max_iters(opts.max_iters))
        .run()
        .map_err(|e| Error::Optimization(e.to_string()))?;
    let state = res.state();
    Ok(Run {
        theta: state
            .get_best_param()
            .cloned()
            .ok_or_else(|| Error::Optimization("no best parameter".into()))?,
        cost: state.get_best_cost(),
        iters: state.get_iter(),
        converged: state.get_iter() < opts.max_iters,
    })
}

/// Maximum-likelihood fit by multi-start Nelder–Mead; states are returned in
/// increasing order of rate.
pub fn mmpp_fit(panel: &BinaryPanel, k: usize, opts: &MmppFitOptions) -> Result<MmppFit> {
    if !(2..=3).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "MMPP fit supports K in {{2, 3}}, got {k}"
        )));
    }
    if opts.starts == 0 {
        return Err(Error::InvalidArgument("need at least one start".into()));
    }
    let p_hat = panel.event_rate().clamp(1e-3, 1.0 - 1e-3);
    let base_rate = -(1.0 - p_hat).ln() / panel.grid().delta;
    let mut r = rng::seeded(opts.seed);
    let starts: Vec<Vec<f64>> = (0..opts.starts)
        .map(|_| {
            let mut theta: Vec<f64> = (0..k * (k - 1))
                .map(|_| r.random_range((1e-3f64).ln()..=0.0))
                .collect();
            theta.extend((0..k).map(|_| base_rate.ln() + r.random_range((1e-3f64).ln()..=10f64.ln())));
            theta
        })
        .collect();
    let runs: Vec<Result<Run>> = starts
        .into_par_iter()
        .map(|s| {
            let first = nelder_mead(panel, k, s, opts)?;
            // Restarting from the optimum guards against a collapsed simplex.
            let polished = nelder_mead(panel, k, first.theta.clone(), opts)?;
            Ok(if polished.cost <= first.cost {
                Run {
                    iters: first.iters + polished.iters,
                    ..polished
                }
            } else {
                first
            })
        })
        .collect();
    let mut start_logliks = Vec::with_capacity(runs.len());
    let mut best: Option<Run> = None;
    let mut failures = Vec::new();
    for run in runs {
        match run {
            Ok(run) if run.cost < f64::MAX => {
                start_logliks.push(-run.cost);
                if best.as_ref().map_or(true, |b| run.cost < b.cost) {
                    best = Some(run);
                }
            }
            Ok(_) => {
                start_logliks.push(f64::NEG_INFINITY);
                failures.push("non-finite likelihood".to_string());
            }
            Err(e) => {
                start_logliks.push(f64::NEG_INFINITY);
                failures.push(e.to_string());
            }
        }
    }
    let best = best.ok_or_else(|| {
        Error::Optimization(format!(
            "all {} starts failed: {}",
            opts.starts,
            failures.join("; ")
        ))
    })?;
    let params = unpack(&best.theta, k)?.sorted_by_rate()?;
    Ok(MmppFit {
        loglik: mmpp_loglik(panel, &params)?,
        params,
        start_logliks,
        iterations: best.iters,
        converged: best.converged,
    })
}

/// Exact simulation of the hidden chain and its events; interval `i` is 1
/// when an event falls in `[iΔ, (i+1)Δ)`.
pub fn mmpp_simulate<R: Rng + ?Sized>(
    params: &MmppParams,
    n_intervals: usize,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<u8>> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let k = params.states();
    let g = params.generator();
    let pi = stationary_or_single(params)?;
    let horizon = n_intervals as f64 * delta;
    let mut out = vec![0u8; n_intervals];
    let mut state = draw_index(pi.as_slice(), rng);
    let mut t = 0.0;
    while t < horizon {
        let exit = -g[(state, state)];
        let end = if exit > 0.0 {
            (t + Exp::new(exit).expect("positive rate").sample(rng)).min(horizon)
        } else {
            horizon
        };
        let lam = params.rates[state];
        if lam > 0.0 {
            let gap = Exp::new(lam).expect("positive rate");
            let mut s = t + gap.sample(rng);
            while s < end {
                let i = ((s / delta) as usize).min(n_intervals - 1);
                out[i] = 1;
                // Later events in a marked interval change nothing; restart the
                // memoryless clock at its right edge.
                s = s.max((i + 1) as f64 * delta) + gap.sample(rng);
            }
        }
        t = end;
        if t < horizon && k > 1 {
            let weights: Vec<f64> = (0..k)
                .map(|j| if j == state { 0.0 } else { g[(state, j)] })
                .collect();
            state = draw_index(&weights, rng);
        }
    }
    Ok(out)
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn exponential_examples() {
        let z = matrix_exponential(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(z, DMatrix::identity(3, 3));
        let d = matrix_exponential(&DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0]))).unwrap();
        assert!((d[(0, 0)] - 1f64.exp()).abs() < 1e-13);
        assert!((d[(1, 1)] - (-2f64).exp()).abs() < 1e-13);
        let r = matrix_exponential(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let (s, c) = 1f64.sin_cos();
        let expect = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        assert!((r - expect).abs().max() < 1e-12);
        assert!(matrix_exponential(&DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }

    #[test]
    fn stationary_examples() {
        let pi = mmpp_stationary(&DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 2.0, -2.0])).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-14);
        let pi = mmpp_stationary(&DMatrix::from_row_slice(2, 2, &[-0.3, 0.3, 0.3, -0.3])).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-14);
        let reducible = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0]);
        assert!(matches!(
            mmpp_stationary(&reducible),
            Err(Error::ReducibleGenerator)
        ));
    }

    #[test]
    fn interval_matrices() {
        let p = MmppParams::two_state(0.3, 0.7, 0.0, 0.0).unwrap();
        let (m0, m1) = mmpp_interval_matrices(&p, 1.5).unwrap();
        assert!(
            (m0 - matrix_exponential(&(p.generator() * 1.5)).unwrap())
                .abs()
                .max()
                < 1e-15
        );
        assert_eq!(m1.max(), 0.0);

        let single = MmppParams::new(DMatrix::zeros(1, 1), vec![0.8]).unwrap();
        let (m0, m1) = mmpp_interval_matrices(&single, 0.5).unwrap();
        assert!((m0[(0, 0)] - (-0.4f64).exp()).abs() < 1e-14);
        assert!((m1[(0, 0)] - (1.0 - (-0.4f64).exp())).abs() < 1e-14);

        let eq = MmppParams::two_state(0.2, 0.9, 0.6, 0.6).unwrap();
        let (m0, m1) = mmpp_interval_matrices(&eq, 1.0).unwrap();
        for i in 0..2 {
            assert!((m1.row(i).sum() - (1.0 - (-0.6f64).exp())).abs() < 1e-12);
            assert!((m0.row(i).sum() + m1.row(i).sum() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn validation() {
        assert!(MmppParams::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -0.5]),
            vec![1.0, 1.0]
        )
        .is_err());
        assert!(MmppParams::two_state(-0.1, 0.1, 1.0, 1.0).is_err());
        assert!(MmppParams::two_state(0.1, 0.1, -1.0, 1.0).is_err());
    }

    #[test]
    fn simulate_examples() {
        let zero = MmppParams::two_state(0.3, 0.3, 0.0, 0.0).unwrap();
        assert!(mmpp_simulate(&zero, 500, 1.0, &mut seeded(1))
            .unwrap()
            .iter()
            .all(|&z| z == 0));
        let single = MmppParams::new(DMatrix::zeros(1, 1), vec![0.5]).unwrap();
        let z = mmpp_simulate(&single, 100_000, 1.0, &mut seeded(2)).unwrap();
        let rate = z.iter().map(|&v| v as f64).sum::<f64>() / 1e5;
        assert!((rate - (1.0 - (-0.5f64).exp())).abs() < 0.01, "{rate}");
        let p = MmppParams::two_state(0.1, 0.2, 0.05, 1.0).unwrap();
        let a = mmpp_simulate(&p, 200, 1.0, &mut seeded(3)).unwrap();
        assert_eq!(a, mmpp_simulate(&p, 200, 1.0, &mut seeded(3)).unwrap());
    }
}
