//! Site-wise Gibbs sampling of the corners process and Monte Carlo estimates.
//!
//! Every site `x^k_i` is resampled from its one-dimensional full conditional on
//! the open interval cut out by its neighbours on levels `k ± 1`. The
//! conditional comes from [`site_log_conditional`] and is sampled by slice
//! sampling (stepping out and shrinkage), or by random-walk Metropolis when
//! requested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beta_infinity::jacobi_roots;
use crate::error::{domain, numeric, Error, Result};
use crate::model::{
    observable_value, site_exponents, site_interval, site_log_conditional, CornersArray, ObservableSpec,
    SiteExponents,
};
use crate::params::EnsembleParams;
use crate::stats;

/// Minimal distance from an interval endpoint for an accepted point.
pub const ENDPOINT_GAP: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKernel {
    #[default]
    Slice,
    Metropolis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub seed: u64,
    pub burn_in: usize,
    pub thin: usize,
    /// Initial slice bracket as a fraction of the admissible interval.
    pub slice_expand: f64,
    pub max_slice_steps: usize,
    /// Independent chains; the retained samples are split evenly among them.
    pub chains: usize,
    pub random_scan: bool,
    pub kernel: UpdateKernel,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in: 500,
            thin: 1,
            slice_expand: 1.0,
            max_slice_steps: 200,
            chains: 1,
            random_scan: false,
            kernel: UpdateKernel::Slice,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return domain("thin must be at least 1");
        }
        if !(self.slice_expand > 0.0) {
            return domain("slice_expand must be positive");
        }
        if self.max_slice_steps == 0 {
            return domain("max_slice_steps must be positive");
        }
        if self.chains == 0 {
            return domain("at least one chain is required");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub corners: CornersArray,
    pub sweeps_done: usize,
    rng: ChaCha8Rng,
}

impl ChainState {
    pub fn rng_word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }
}

fn chain_rng(seed: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain);
    rng
}

/// A single level is drawn from `Beta(θα, θM)`. Deeper processes start from the
/// `θ → ∞` roots on the top level and gap midpoints below. Then `burn_in` sweeps.
pub fn init_chain(params: &EnsembleParams, big_n: usize, config: &SamplerConfig) -> Result<ChainState> {
    init_chain_stream(params, big_n, config, 0)
}

fn init_chain_stream(params: &EnsembleParams, big_n: usize, config: &SamplerConfig, stream: u64) -> Result<ChainState> {
    config.validate()?;
    if big_n == 0 {
        return domain("the process needs at least one level");
    }
    let m = params.m_param();
    let mut rng = chain_rng(config.seed, stream);
    let levels = if big_n == 1 {
        let beta = Beta::new(params.theta() * params.alpha(), params.theta() * m as f64)
            .map_err(|e| Error::Domain(e.to_string()))?;
        let x: f64 = beta.sample(&mut rng);
        vec![vec![x.clamp(1e-12, 1.0 - 1e-12)]]
    } else {
        initial_levels(params, big_n)?
    };
    let corners = CornersArray::new(levels, m)?;
    let mut state = ChainState {
        corners,
        sweeps_done: 0,
        rng,
    };
    let exps = level_exponents(params, big_n);
    for _ in 0..config.burn_in {
        sweep_in_place(&exps, &mut state, config)?;
    }
    Ok(state)
}

/// Top level at its `θ → ∞` positions, each lower level at the midpoints of the
/// gaps of the level above.
fn initial_levels(params: &EnsembleParams, big_n: usize) -> Result<Vec<Vec<f64>>> {
    let top = jacobi_roots(big_n, params.m_param(), params.alpha())?.roots;
    let mut levels = vec![top];
    for n in (1..big_n).rev() {
        let y = levels.last().unwrap();
        let len = params.level_len(n);
        let z: Vec<f64> = (0..len)
            .map(|i| 0.5 * (y[i] + y.get(i + 1).copied().unwrap_or(1.0)))
            .collect();
        levels.push(z);
    }
    levels.reverse();
    Ok(levels)
}

fn level_exponents(params: &EnsembleParams, big_n: usize) -> Vec<SiteExponents> {
    (1..=big_n).map(|k| site_exponents(params, big_n, k)).collect()
}

fn slice_update(
    rng: &mut ChaCha8Rng,
    x0: f64,
    lo: f64,
    hi: f64,
    logf: impl Fn(f64) -> f64,
    config: &SamplerConfig,
) -> std::result::Result<f64, usize> {
    let f0 = logf(x0);
    let e: f64 = Exp1.sample(rng);
    let level = f0 - e;
    let span = hi - lo;
    let w = (config.slice_expand * span).min(span);
    let u: f64 = rng.random();
    let l0 = x0 - w * u;
    let mut l = l0.max(lo);
    let mut r = (l0 + w).min(hi);
    let mut steps = 0;
    while l > lo && steps < config.max_slice_steps && logf(l) > level {
        l = (l - w).max(lo);
        steps += 1;
    }
    while r < hi && steps < config.max_slice_steps && logf(r) > level {
        r = (r + w).min(hi);
        steps += 1;
    }
    while steps < config.max_slice_steps {
        steps += 1;
        let x = l + (r - l) * rng.random::<f64>();
        if x - lo < ENDPOINT_GAP || hi - x < ENDPOINT_GAP {
            continue;
        }
        if logf(x) > level {
            return Ok(x);
        }
        if x < x0 {
            l = x;
        } else {
            r = x;
        }
    }
    Err(steps)
}

fn metropolis_update(
    rng: &mut ChaCha8Rng,
    x0: f64,
    lo: f64,
    hi: f64,
    logf: impl Fn(f64) -> f64,
    config: &SamplerConfig,
) -> f64 {
    let sigma = 0.5 * config.slice_expand.min(1.0) * (hi - lo);
    let z: f64 = StandardNormal.sample(rng);
    let x = x0 + sigma * z;
    if x - lo < ENDPOINT_GAP || hi - x < ENDPOINT_GAP {
        return x0;
    }
    let a = logf(x) - logf(x0);
    let e: f64 = Exp1.sample(rng);
    if -e < a {
        x
    } else {
        x0
    }
}

fn update_site(exps: &[SiteExponents], state: &mut ChainState, k: usize, i: usize, config: &SamplerConfig) -> Result<()> {
    let (lo, hi) = site_interval(&state.corners, k, i);
    let x0 = state.corners.level(k)[i];
    let e = &exps[k - 1];
    let corners = &state.corners;
    let logf = |x: f64| site_log_conditional(e, corners, k, i, x);
    let x = match config.kernel {
        UpdateKernel::Slice => slice_update(&mut state.rng, x0, lo, hi, logf, config).map_err(|steps| {
            Error::Numeric(format!(
                "slice sampler exceeded {steps} steps at level {k}, site {} (x = {x0}, interval ({lo}, {hi}))",
                i + 1
            ))
        })?,
        UpdateKernel::Metropolis => metropolis_update(&mut state.rng, x0, lo, hi, logf, config),
    };
    state.corners.levels_mut()[k - 1][i] = x;
    Ok(())
}

fn sweep_in_place(exps: &[SiteExponents], state: &mut ChainState, config: &SamplerConfig) -> Result<()> {
    let depth = state.corners.depth();
    if config.random_scan {
        let sites: usize = state.corners.levels().iter().map(Vec::len).sum();
        for _ in 0..sites {
            let k = state.rng.random_range(1..=depth);
            let i = state.rng.random_range(0..state.corners.level(k).len());
            update_site(exps, state, k, i, config)?;
        }
    } else {
        for k in (1..=depth).rev() {
            for i in 0..state.corners.level(k).len() {
                update_site(exps, state, k, i, config)?;
            }
        }
    }
    state.sweeps_done += 1;
    Ok(())
}

/// One Gibbs sweep: levels top-down, sites left to right (or a random scan).
pub fn gibbs_sweep(params: &EnsembleParams, big_n: usize, mut state: ChainState, config: &SamplerConfig) -> Result<ChainState> {
    if state.corners.depth() != big_n {
        return domain(format!(
            "state has {} levels, expected {big_n}",
            state.corners.depth()
        ));
    }
    let exps = level_exponents(params, big_n);
    sweep_in_place(&exps, &mut state, config)?;
    Ok(state)
}

fn chain_counts(count: usize, chains: usize) -> Vec<usize> {
    (0..chains)
        .map(|c| count / chains + usize::from(c < count % chains))
        .collect()
}

/// Runs the chains and calls `visit(chain, &corners)` on every retained state.
/// Chains run in parallel; each visitor sees its own chain in order.
fn run_chains<T, F>(params: &EnsembleParams, big_n: usize, config: &SamplerConfig, count: usize, visit: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(&CornersArray) -> Result<T> + Sync,
{
    config.validate()?;
    let counts = chain_counts(count, config.chains);
    let exps = level_exponents(params, big_n);
    counts
        .into_par_iter()
        .enumerate()
        .map(|(c, n)| {
            let mut state = init_chain_stream(params, big_n, config, c as u64)?;
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                for _ in 0..config.thin {
                    sweep_in_place(&exps, &mut state, config)?;
                }
                debug_assert!(state.corners.validate(params.m_param()).is_ok());
                out.push(visit(&state.corners)?);
            }
            Ok(out)
        })
        .collect()
}

/// `count` thinned post-burn-in states.
pub fn sample_corners(params: &EnsembleParams, big_n: usize, config: &SamplerConfig, count: usize) -> Result<Vec<CornersArray>> {
    if count == 0 {
        return Ok(vec![]);
    }
    let chains = run_chains(params, big_n, config, count, |c| Ok(c.clone()))?;
    Ok(chains.into_iter().flatten().collect())
}

/// Observable values along the chains, without storing the arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub specs: Vec<ObservableSpec>,
    /// `values[j][s]`: observable `j` on retained sample `s`.
    pub values: Vec<Vec<f64>>,
    /// Number of retained samples from each chain, in order.
    pub chain_lengths: Vec<usize>,
}

impl ObservableSeries {
    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j]
    }
}

fn check_specs(specs: &[ObservableSpec], big_n: usize) -> Result<()> {
    if let Some(s) = specs.iter().find(|s| s.level == 0 || s.level > big_n) {
        return domain(format!("observable {} refers to a level outside 1..={big_n}", s.label()));
    }
    Ok(())
}

pub fn sample_observables(
    params: &EnsembleParams,
    big_n: usize,
    config: &SamplerConfig,
    count: usize,
    specs: &[ObservableSpec],
) -> Result<ObservableSeries> {
    check_specs(specs, big_n)?;
    let m = params.m_param();
    let chains = run_chains(params, big_n, config, count, |c| {
        specs
            .iter()
            .map(|s| observable_value(s, c.level(s.level), m))
            .collect::<Result<Vec<f64>>>()
    })?;
    series_from_rows(specs, chains)
}

fn series_from_rows(specs: &[ObservableSpec], chains: Vec<Vec<Vec<f64>>>) -> Result<ObservableSeries> {
    let chain_lengths = chains.iter().map(Vec::len).collect();
    let mut values = vec![Vec::new(); specs.len()];
    for row in chains.into_iter().flatten() {
        for (j, v) in row.into_iter().enumerate() {
            values[j].push(v);
        }
    }
    Ok(ObservableSeries {
        specs: specs.to_vec(),
        values,
        chain_lengths,
    })
}

pub fn evaluate_observables(samples: &[CornersArray], specs: &[ObservableSpec], m_param: usize) -> Result<ObservableSeries> {
    let depth = samples.iter().map(CornersArray::depth).min().unwrap_or(0);
    check_specs(specs, depth)?;
    let rows = samples
        .iter()
        .map(|c| {
            specs
                .iter()
                .map(|s| observable_value(s, c.level(s.level), m_param))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len();
    let mut series = series_from_rows(specs, vec![rows])?;
    series.chain_lengths = vec![n];
    Ok(series)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_effective: f64,
    pub raw_count: usize,
}

/// Default number of batches for batch-means standard errors.
pub const BATCHES: usize = 50;
pub const MIN_SAMPLES: usize = 100;

fn estimate(xs: &[f64]) -> MomentEstimate {
    let mean = stats::mean(xs);
    let se = stats::batch_means_stderr(xs, BATCHES);
    let var = stats::variance(xs);
    let n_eff = if se > 0.0 {
        (var / (se * se)).min(xs.len() as f64)
    } else {
        xs.len() as f64
    };
    MomentEstimate {
        mean,
        std_error: se,
        n_effective: n_eff,
        raw_count: xs.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableEstimates {
    pub means: Vec<MomentEstimate>,
    /// `covariance[a][b]`: estimate of `Cov(X_a, X_b)` with its standard error.
    pub covariance: Vec<Vec<MomentEstimate>>,
}

/// Means and covariances with batch-means standard errors.
pub fn estimate_observables(series: &ObservableSeries) -> Result<ObservableEstimates> {
    let n = series.len();
    if n < MIN_SAMPLES {
        return domain(format!("at least {MIN_SAMPLES} samples are needed, got {n}"));
    }
    let means: Vec<MomentEstimate> = series.values.iter().map(|c| estimate(c)).collect();
    let k = series.values.len();
    let mut covariance = vec![Vec::with_capacity(k); k];
    for a in 0..k {
        for b in 0..k {
            let (ma, mb) = (means[a].mean, means[b].mean);
            let prods: Vec<f64> = series.values[a]
                .iter()
                .zip(&series.values[b])
                .map(|(x, y)| (x - ma) * (y - mb))
                .collect();
            let mut e = estimate(&prods);
            e.mean *= n as f64 / (n as f64 - 1.0);
            covariance[a].push(e);
        }
    }
    Ok(ObservableEstimates { means, covariance })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantEstimate {
    pub order: usize,
    /// The cumulant `κ_r` (k-statistic).
    pub value: f64,
    /// `κ_r / κ_2^{r/2}`.
    pub standardized: f64,
    /// Batch-means standard error of `standardized`.
    pub std_error: f64,
}

/// Unbiased k-statistics `k_2, k_3, k_4`.
fn k_statistics(xs: &[f64]) -> [f64; 3] {
    let n = xs.len() as f64;
    let m = stats::mean(xs);
    let (mut s2, mut s3, mut s4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - m;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
    }
    let (m2, m3, m4) = (s2 / n, s3 / n, s4 / n);
    let k2 = n / (n - 1.0) * m2;
    let k3 = n * n / ((n - 1.0) * (n - 2.0)) * m3;
    let k4 = n * n * ((n + 1.0) * m4 - 3.0 * (n - 1.0) * m2 * m2) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    [k2, k3, k4]
}

fn standardized_cumulant(xs: &[f64], order: usize) -> (f64, f64) {
    let k = k_statistics(xs);
    let value = k[order - 2];
    let std = if order == 2 { 1.0 } else { value / k[0].powf(order as f64 / 2.0) };
    (value, std)
}

/// Cumulants of each observable, of order 2 to 4, with batch-means errors on
/// the standardized values.
pub fn empirical_cumulants(series: &ObservableSeries, order: usize) -> Result<Vec<CumulantEstimate>> {
    if !(2..=4).contains(&order) {
        return domain(format!("cumulant order must be 2, 3 or 4, got {order}"));
    }
    let n = series.len();
    if n < MIN_SAMPLES {
        return domain(format!("at least {MIN_SAMPLES} samples are needed, got {n}"));
    }
    let batches = BATCHES.min(n / 20).max(2);
    let size = n / batches;
    Ok(series
        .values
        .iter()
        .map(|xs| {
            let (value, standardized) = standardized_cumulant(xs, order);
            let per_batch: Vec<f64> = (0..batches)
                .map(|b| standardized_cumulant(&xs[b * size..(b + 1) * size], order).1)
                .collect();
            let std_error = if order == 2 {
                0.0
            } else {
                (stats::variance(&per_batch) / batches as f64).sqrt()
            };
            CumulantEstimate {
                order,
                value,
                standardized,
                std_error,
            }
        })
        .collect())
}

/// Lower `quantile` of the smallest particle and upper `quantile` of the
/// largest particle on `level`.
pub fn empirical_support(samples: &[CornersArray], level: usize, quantile: f64) -> Result<(f64, f64)> {
    if !(quantile > 0.0 && quantile < 0.5) {
        return domain("quantile must lie in (0, 0.5)");
    }
    if samples.is_empty() {
        return domain("no samples");
    }
    let mut lows = Vec::with_capacity(samples.len());
    let mut highs = Vec::with_capacity(samples.len());
    for c in samples {
        if level == 0 || level > c.depth() {
            return domain(format!("level {level} is not present in the samples"));
        }
        let l = c.level(level);
        lows.push(l[0]);
        highs.push(l[l.len() - 1]);
    }
    Ok((empirical_quantile(&mut lows, quantile), empirical_quantile(&mut highs, 1.0 - quantile)))
}

fn empirical_quantile(xs: &mut [f64], q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let pos = q * (xs.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < xs.len() {
        xs[i] * (1.0 - frac) + xs[i + 1] * frac
    } else {
        xs[i]
    }
}

/// Sample extremes of a level, recorded while sampling.
pub fn sample_support(
    params: &EnsembleParams,
    big_n: usize,
    level: usize,
    config: &SamplerConfig,
    count: usize,
    quantile: f64,
) -> Result<(f64, f64)> {
    if !(quantile > 0.0 && quantile < 0.5) {
        return domain("quantile must lie in (0, 0.5)");
    }
    if level == 0 || level > big_n {
        return domain(format!("level {level} is outside 1..={big_n}"));
    }
    let ext = run_chains(params, big_n, config, count, |c| {
        let l = c.level(level);
        Ok((l[0], l[l.len() - 1]))
    })?;
    let (mut lows, mut highs): (Vec<f64>, Vec<f64>) = ext.into_iter().flatten().unzip();
    if lows.is_empty() {
        return numeric("no samples were drawn");
    }
    Ok((empirical_quantile(&mut lows, quantile), empirical_quantile(&mut highs, 1.0 - quantile)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::log_backward_density;

    fn cfg(seed: u64) -> SamplerConfig {
        SamplerConfig {
            burn_in: 50,
            ..SamplerConfig::with_seed(seed)
        }
    }

    #[test]
    fn initial_state_is_valid() {
        let p = EnsembleParams::new(0.5, 1.0, 2).unwrap();
        for n in [1, 2, 5, 12] {
            let s = init_chain(&p, n, &cfg(3)).unwrap();
            s.corners.validate(2).unwrap();
            assert_eq!(s.corners.depth(), n);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let p = EnsembleParams::new(1.0, 2.0, 3).unwrap();
        let a = sample_corners(&p, 3, &cfg(11), 20).unwrap();
        let b = sample_corners(&p, 3, &cfg(11), 20).unwrap();
        let c = sample_corners(&p, 3, &cfg(12), 20).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(sample_corners(&p, 3, &cfg(11), 0).unwrap().is_empty());
    }

    #[test]
    fn level_one_is_beta() {
        let p = EnsembleParams::new(1.5, 2.0, 3).unwrap();
        let xs: Vec<f64> = (0..4000)
            .map(|s| init_chain(&p, 1, &SamplerConfig { burn_in: 0, ..cfg(s) }).unwrap().corners.level(1)[0])
            .collect();
        let mean = stats::mean(&xs);
        let se = (stats::variance(&xs) / xs.len() as f64).sqrt();
        assert!((mean - 0.4).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn conditional_matches_backward_density() {
        // x^1_1 given level 2: histogram against the backward density by a χ² statistic
        for theta in [1.0, 0.5] {
        let p = EnsembleParams::new(theta, 2.0, 3).unwrap();
        let mut state = init_chain(&p, 2, &cfg(5)).unwrap();
        let y = state.corners.level(2).to_vec();
        let exps = level_exponents(&p, 2);
        let conf = cfg(5);
        let bins = 10;
        let mut counts = vec![0usize; bins];
        let draws = 20000;
        for _ in 0..draws {
            update_site(&exps, &mut state, 1, 0, &conf).unwrap();
            let x = state.corners.level(1)[0];
            let b = (((x - y[0]) / (y[1] - y[0])) * bins as f64) as usize;
            counts[b.min(bins - 1)] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let (a, z) = (
                y[0] + (y[1] - y[0]) * b as f64 / bins as f64,
                y[0] + (y[1] - y[0]) * (b + 1) as f64 / bins as f64,
            );
            let prob = crate::quadrature::adaptive_gauss_kronrod(a, z, 1e-12, 1e-10, |x| {
                log_backward_density(&p, 2, &y, &[x]).map(f64::exp).unwrap_or(0.0)
            })
            .unwrap();
            let e = prob * draws as f64;
            chi2 += (c as f64 - e).powi(2) / e;
        }
        // 9 degrees of freedom, 99.9% quantile ≈ 27.9
        assert!(chi2 < 27.9, "θ = {theta}: chi2 = {chi2}, {counts:?}");
        }
    }

    #[test]
    fn estimates_of_constants() {
        let series = ObservableSeries {
            specs: vec![ObservableSpec::power(1, 1)],
            values: vec![vec![2.0; 200]],
            chain_lengths: vec![200],
        };
        let e = estimate_observables(&series).unwrap();
        assert_eq!(e.means[0].mean, 2.0);
        assert_eq!(e.means[0].std_error, 0.0);
        assert_eq!(e.covariance[0][0].mean, 0.0);
        assert!(empirical_cumulants(&series, 5).is_err());
    }

    #[test]
    fn gaussian_cumulants_vanish() {
        let mut rng = chain_rng(1, 0);
        let xs: Vec<f64> = (0..20000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let series = ObservableSeries {
            specs: vec![ObservableSpec::power(1, 1)],
            values: vec![xs],
            chain_lengths: vec![20000],
        };
        for order in [3, 4] {
            let c = empirical_cumulants(&series, order).unwrap()[0];
            assert!(c.standardized.abs() < 3.0 * c.std_error, "{c:?}");
        }
    }

    #[test]
    fn support_quantiles() {
        let p = EnsembleParams::new(1.0, 2.0, 3).unwrap();
        let s = sample_corners(&p, 2, &cfg(2), 500).unwrap();
        let (lo, hi) = empirical_support(&s, 2, 0.05).unwrap();
        assert!(0.0 < lo && lo < hi && hi < 1.0);
        assert!(empirical_support(&s, 2, 0.6).is_err());
    }
}
