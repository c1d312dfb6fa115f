//! Uncertainty quantification by resampling, percentile confidence
//! intervals, and margin-based hypothesis conclusions.
//!
//! The default strategy resamples hierarchically: slides with replacement,
//! then frames with replacement within each sampled slide. Replicates are
//! driven by independent streams of a ChaCha12 generator keyed by the
//! master seed (stream = replicate index), so any parallel schedule gives
//! identical results.
//!
//! Draw order, documented so alternates can match bit-for-bit: frames are
//! indexed slide-major (slides in manifest order, frames within a slide in
//! manifest order). Hierarchical draws S slide indices in sequence and,
//! per drawn slide, as many frame indices as the slide holds; frames-only
//! draws N frame indices in sequence; slides-only draws S slide indices
//! and takes every frame of each. A uniform choice over a single candidate
//! consumes no randomness, which makes frames-only and hierarchical
//! streams identical whenever every slide holds exactly one frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleStrategy {
    Hierarchical,
    FramesOnly,
    SlidesOnly,
}

impl std::str::FromStr for ResampleStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(ResampleStrategy::Hierarchical),
            "frames" => Ok(ResampleStrategy::FramesOnly),
            "slides" => Ok(ResampleStrategy::SlidesOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown resample strategy {other:?} (expected hierarchical, frames or slides)"
            ))),
        }
    }
}

/// Resampling configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResampleSpec {
    pub strategy: ResampleStrategy,
    pub replicates: u32,
    pub alpha: f64,
    pub master_seed: u64,
}

impl Default for ResampleSpec {
    fn default() -> Self {
        Self {
            strategy: ResampleStrategy::Hierarchical,
            replicates: 1000,
            alpha: 0.05,
            master_seed: 0,
        }
    }
}

impl ResampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidConfig("replicates must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// The slide/frame shape a resampler draws from. Positions are slide-major
/// frame indices, 0..n_frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResampleStructure {
    n_frames: usize,
    slide_groups: Vec<Vec<usize>>,
}

impl ResampleStructure {
    pub fn new(slide_groups: Vec<Vec<usize>>) -> Self {
        let n_frames = slide_groups.iter().map(Vec::len).sum();
        debug_assert!({
            let mut seen: Vec<usize> = slide_groups.iter().flatten().copied().collect();
            seen.sort_unstable();
            seen == (0..n_frames).collect::<Vec<_>>()
        });
        Self {
            n_frames,
            slide_groups,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    /// One multiset draw: `result[pos]` = multiplicity of frame position.
    pub fn draw<G: Rng>(&self, strategy: ResampleStrategy, rng: &mut G) -> Vec<u64> {
        let mut mult = vec![0u64; self.n_frames];
        let n_slides = self.slide_groups.len();
        match strategy {
            ResampleStrategy::Hierarchical => {
                for _ in 0..n_slides {
                    let group = &self.slide_groups[choose(rng, n_slides)];
                    for _ in 0..group.len() {
                        mult[group[choose(rng, group.len())]] += 1;
                    }
                }
            }
            ResampleStrategy::FramesOnly => {
                for _ in 0..self.n_frames {
                    mult[choose(rng, self.n_frames)] += 1;
                }
            }
            ResampleStrategy::SlidesOnly => {
                for _ in 0..n_slides {
                    for &pos in &self.slide_groups[choose(rng, n_slides)] {
                        mult[pos] += 1;
                    }
                }
            }
        }
        mult
    }
}

/// Uniform index draw that consumes no randomness when there is no choice.
fn choose<G: Rng>(rng: &mut G, n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        rng.gen_range(0..n)
    }
}

/// The generator for one replicate: ChaCha12 keyed by the master seed, on
/// the stream numbered by the replicate index.
pub fn replicate_rng(master_seed: u64, replicate: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate);
    rng
}

/// Hierarchical slide-then-frame resample of a whole dataset.
///
/// Returns per-frame multiplicities in dataset frame order. Deterministic
/// given the seed.
pub fn hierarchical_resample<R: Real>(dataset: &Dataset<R>, seed: u64) -> Vec<u64> {
    // Slide-major position order, mapped back to dataset frame indices.
    let groups_dataset = dataset.slide_frame_groups();
    let flat: Vec<usize> = groups_dataset.iter().flatten().copied().collect();
    let mut next = 0usize;
    let groups_positions: Vec<Vec<usize>> = groups_dataset
        .iter()
        .map(|g| {
            let positions = (next..next + g.len()).collect();
            next += g.len();
            positions
        })
        .collect();
    let structure = ResampleStructure::new(groups_positions);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let by_position = structure.draw(ResampleStrategy::Hierarchical, &mut rng);
    let mut by_frame = vec![0u64; dataset.n_frames()];
    for (pos, &count) in by_position.iter().enumerate() {
        by_frame[flat[pos]] = count;
    }
    by_frame
}

/// Replicate statistics, point estimate and percentile interval for one
/// resampled statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult<R> {
    pub point_estimate: Option<R>,
    /// One entry per replicate; `None` marks an undefined replicate.
    pub replicate_values: Vec<Option<R>>,
    pub undefined_replicate_count: u32,
    /// Percentile interval over the defined replicates; `None` when every
    /// replicate was undefined.
    pub ci: Option<(R, R)>,
    pub spec: ResampleSpec,
}

/// Percentile interval with nearest-rank (ceiling) order statistics:
/// the ceil(alpha/2 * n)-th and ceil((1-alpha/2) * n)-th smallest values,
/// 1-based.
pub fn percentile_ci<R: Real>(defined: &[R], alpha: f64) -> Option<(R, R)> {
    if defined.is_empty() {
        return None;
    }
    let mut sorted = defined.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("replicate values are comparable"));
    let n = sorted.len();
    let rank = |q: f64| -> usize {
        let r = (q * n as f64).ceil() as usize;
        r.clamp(1, n)
    };
    let lo = sorted[rank(alpha / 2.0) - 1];
    let hi = sorted[rank(1.0 - alpha / 2.0) - 1];
    Some((lo, hi))
}

/// Bootstraps a vector-valued statistic; all components share each
/// replicate's frame multiset. Component CIs may be absent when every
/// replicate of that component is undefined.
pub fn bootstrap_many<R, F>(
    structure: &ResampleStructure,
    stat: F,
    n_components: usize,
    spec: &ResampleSpec,
) -> Result<Vec<BootstrapResult<R>>>
where
    R: Real,
    F: Fn(&[u64]) -> Vec<Option<R>> + Sync,
{
    spec.validate()?;
    let unit = vec![1u64; structure.n_frames()];
    let points = stat(&unit);
    assert_eq!(points.len(), n_components, "statistic arity mismatch");

    let replicates: Vec<Vec<Option<R>>> = (0..spec.replicates as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(spec.master_seed, i);
            let mult = structure.draw(spec.strategy, &mut rng);
            let values = stat(&mult);
            assert_eq!(values.len(), n_components, "statistic arity mismatch");
            values
        })
        .collect();

    Ok((0..n_components)
        .map(|c| {
            let replicate_values: Vec<Option<R>> = replicates.iter().map(|r| r[c]).collect();
            let defined: Vec<R> = replicate_values.iter().copied().flatten().collect();
            let undefined_replicate_count = (replicate_values.len() - defined.len()) as u32;
            BootstrapResult {
                point_estimate: points[c],
                ci: percentile_ci(&defined, spec.alpha),
                replicate_values,
                undefined_replicate_count,
                spec: *spec,
            }
        })
        .collect())
}

/// Bootstraps a scalar statistic of the frame multiset.
///
/// Errors when every replicate is undefined.
pub fn bootstrap_statistic<R, F>(
    structure: &ResampleStructure,
    stat: F,
    spec: &ResampleSpec,
) -> Result<BootstrapResult<R>>
where
    R: Real,
    F: Fn(&[u64]) -> Option<R> + Sync,
{
    let mut results = bootstrap_many(structure, |mult| vec![stat(mult)], 1, spec)?;
    let result = results.remove(0);
    if result.ci.is_none() {
        return Err(Error::AllReplicatesUndefined);
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    NonInferiority,
    Equivalence,
    Superiority,
}

impl std::str::FromStr for TestMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noninferiority" => Ok(TestMode::NonInferiority),
            "equivalence" => Ok(TestMode::Equivalence),
            "superiority" => Ok(TestMode::Superiority),
            other => Err(Error::InvalidConfig(format!(
                "unknown test mode {other:?} (expected noninferiority, equivalence or superiority)"
            ))),
        }
    }
}

impl std::fmt::Display for TestMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TestMode::NonInferiority => "noninferiority",
            TestMode::Equivalence => "equivalence",
            TestMode::Superiority => "superiority",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    NonInferior,
    Equivalent,
    Superior,
    Inconclusive,
}

impl Conclusion {
    pub fn as_str(&self) -> &'static str {
        match self {
            Conclusion::NonInferior => "non_inferior",
            Conclusion::Equivalent => "equivalent",
            Conclusion::Superior => "superior",
            Conclusion::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Conclusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Margin-based conclusion on a bootstrapped difference (positive = model
/// better).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestOutcome<R> {
    pub margin: R,
    pub mode: TestMode,
    pub conclusion: Conclusion,
}

/// Applies the margin rules to a bootstrap interval:
/// non-inferiority concludes when ci_low > -margin, equivalence when the
/// whole interval lies inside (-margin, margin), superiority when
/// ci_low > 0; anything else is inconclusive.
pub fn hypothesis_test<R: Real>(
    b: &BootstrapResult<R>,
    margin: R,
    mode: TestMode,
) -> Result<TestOutcome<R>> {
    if !(margin.is_finite() && margin > R::zero()) {
        return Err(Error::InvalidMargin(margin.to_f64().unwrap_or(f64::NAN)));
    }
    let (lo, hi) = b.ci.ok_or(Error::AllReplicatesUndefined)?;
    let conclusion = match mode {
        TestMode::NonInferiority => {
            if lo > -margin {
                Conclusion::NonInferior
            } else {
                Conclusion::Inconclusive
            }
        }
        TestMode::Equivalence => {
            if -margin < lo && hi < margin {
                Conclusion::Equivalent
            } else {
                Conclusion::Inconclusive
            }
        }
        TestMode::Superiority => {
            if lo > R::zero() {
                Conclusion::Superior
            } else {
                Conclusion::Inconclusive
            }
        }
    };
    Ok(TestOutcome {
        margin,
        mode,
        conclusion,
    })
}
