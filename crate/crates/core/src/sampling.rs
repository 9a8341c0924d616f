//! Finite-shot estimation of outcome probabilities.
//!
//! Shot noise is the only noise model: every probability vector is replaced
//! by the relative frequencies of a multinomial draw of `N` outcomes.

use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::measurement::EffectivePovm;
use crate::qcore::{hs_inner, DensityMatrix, SeededRng};

/// Lowest raw probability accepted before clipping to zero.
pub const NEGATIVE_PROBABILITY_TOL: f64 = -1e-10;

/// How outcome probabilities are observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShotConfig {
    /// Probabilities are known exactly (the `N → ∞` limit).
    Exact,
    /// Frequencies estimated from this many shots per state.
    Finite(u64),
}

impl ShotConfig {
    pub fn finite(shots: u64) -> Result<Self> {
        if shots == 0 {
            return Err(Error::InvalidArgument("shot count must be at least 1".into()));
        }
        Ok(ShotConfig::Finite(shots))
    }

    pub fn shots(&self) -> Option<u64> {
        match self {
            ShotConfig::Exact => None,
            ShotConfig::Finite(n) => Some(*n),
        }
    }
}

/// `p_b = ⟨μ̃_b, ρ⟩ + c_b`, clipped to `[0, 1]` and renormalised.
pub fn outcome_probabilities(p: &EffectivePovm, rho: &DensityMatrix) -> Result<Vec<f64>> {
    if p.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "POVM acts on dimension {}, state has dimension {}",
            p.dim(),
            rho.dim()
        )));
    }
    let raw = p
        .elements()
        .iter()
        .zip(p.offsets())
        .map(|(e, c)| Ok(hs_inner(e, rho)? + c))
        .collect::<Result<Vec<f64>>>()?;
    clip_probabilities(raw)
}

pub(crate) fn clip_probabilities(mut raw: Vec<f64>) -> Result<Vec<f64>> {
    for (b, &v) in raw.iter().enumerate() {
        if v < NEGATIVE_PROBABILITY_TOL || !v.is_finite() {
            return Err(Error::NegativeProbability { outcome: b, value: v });
        }
    }
    for v in raw.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("probabilities sum to zero".into()));
    }
    for v in raw.iter_mut() {
        *v /= total;
    }
    Ok(raw)
}

/// Multinomial outcome counts for `shots` draws.
///
/// Drawn as a chain of conditional binomials, which is exact and costs
/// `O(|Σ|)` regardless of the shot count.
pub fn sample_counts(probs: &[f64], shots: u64, rng: &mut SeededRng) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be at least 1".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 || probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "not a probability vector (sum {total})"
        )));
    }
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = total;
    let last = probs.len() - 1;
    for (b, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if b == last {
            counts[b] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidArgument(format!("binomial parameters: {e}")))?
            .sample(rng);
        counts[b] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}

/// Relative frequencies of a multinomial draw.
pub fn sample_frequencies(probs: &[f64], shots: u64, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let n = shots as f64;
    Ok(sample_counts(probs, shots, rng)?
        .into_iter()
        .map(|c| c as f64 / n)
        .collect())
}

/// Applies the shot configuration to an exact probability vector.
pub fn observe(probs: Vec<f64>, shots: ShotConfig, rng: &mut SeededRng) -> Result<Vec<f64>> {
    match shots {
        ShotConfig::Exact => Ok(probs),
        ShotConfig::Finite(n) => sample_frequencies(&probs, n, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::{computational_basis_povm, Povm};
    use crate::qcore::{random_density_matrix, HermitianOperator};
    use crate::reservoirs::{apply_channel, build_isometry_reservoir, effective_povm};

    #[test]
    fn eigenstate_probabilities() {
        let p = computational_basis_povm(2).to_effective();
        let probs = outcome_probabilities(&p, &DensityMatrix::basis_state(2, 0)).unwrap();
        assert_eq!(probs, vec![1.0, 0.0]);
    }

    #[test]
    fn maximally_mixed_probabilities() {
        let mut rng = SeededRng::new(1, 1);
        let povm = Povm::random_rank_one(2, 5, &mut rng).unwrap().to_effective();
        let probs = outcome_probabilities(&povm, &DensityMatrix::maximally_mixed(2)).unwrap();
        for (p, e) in probs.iter().zip(povm.elements()) {
            assert!((p - e.trace() / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_channel_side_probabilities() {
        let mut rng = SeededRng::new(2, 0);
        let res = build_isometry_reservoir(2, 6, &mut rng).unwrap();
        let meas = computational_basis_povm(6);
        let eff = effective_povm(&res, &meas).unwrap();
        for _ in 0..20 {
            let rho = random_density_matrix(2, 2, &mut rng).unwrap();
            let out = apply_channel(&res, &rho).unwrap();
            let probs = outcome_probabilities(&eff, &rho).unwrap();
            for (b, mu) in meas.elements().iter().enumerate() {
                let direct = hs_inner(mu, &out).unwrap();
                assert!((direct - probs[b]).abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn rejects_negative_probability() {
        let bad = EffectivePovm::unchecked(
            vec![
                HermitianOperator::identity(2).scale(1.5),
                HermitianOperator::identity(2).scale(-0.5),
            ],
            vec![0.0, 0.0],
        );
        let err = outcome_probabilities(&bad, &DensityMatrix::maximally_mixed(2)).unwrap_err();
        assert!(matches!(err, Error::NegativeProbability { outcome: 1, .. }));
    }

    #[test]
    fn clips_round_off() {
        let p = clip_probabilities(vec![1.0 + 5e-11, -5e-11]).unwrap();
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_distribution() {
        let mut rng = SeededRng::new(3, 0);
        for n in [1, 7, 1000] {
            assert_eq!(sample_frequencies(&[1.0, 0.0, 0.0], n, &mut rng).unwrap(), vec![1.0, 0.0, 0.0]);
        }
        assert_eq!(sample_frequencies(&[0.0, 0.0, 1.0], 9, &mut rng).unwrap(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn counts_sum_to_shots() {
        let mut rng = SeededRng::new(4, 0);
        let probs = [0.1, 0.2, 0.3, 0.4];
        for n in [1u64, 3, 17, 1_000_003] {
            let c = sample_counts(&probs, n, &mut rng).unwrap();
            assert_eq!(c.iter().sum::<u64>(), n);
            let f = sample_frequencies(&probs, n, &mut rng).unwrap();
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            assert!(f.iter().all(|&x| x >= 0.0));
        }
        assert!(sample_counts(&probs, 0, &mut rng).is_err());
        assert!(sample_counts(&[0.5, 0.4], 10, &mut rng).is_err());
    }

    #[test]
    fn fair_coin_at_a_million_shots() {
        // σ = ½/√N = 5e-4, so 5e-3 is a 10σ envelope.
        let mut rng = SeededRng::new(5, 0);
        let f = sample_frequencies(&[0.5, 0.5], 1_000_000, &mut rng).unwrap();
        assert!((f[0] - 0.5).abs() < 5e-3);
        assert!((f[1] - 0.5).abs() < 5e-3);
    }

    #[test]
    fn multinomial_mean_and_variance() {
        let probs = [0.05, 0.15, 0.3, 0.5];
        let n = 200u64;
        let reps = 10_000;
        let mut rng = SeededRng::new(6, 0);
        let mut sum = [0.0; 4];
        let mut sumsq = [0.0; 4];
        for _ in 0..reps {
            let f = sample_frequencies(&probs, n, &mut rng).unwrap();
            for b in 0..4 {
                sum[b] += f[b];
                sumsq[b] += f[b] * f[b];
            }
        }
        for b in 0..4 {
            let mean = sum[b] / reps as f64;
            let var = sumsq[b] / reps as f64 - mean * mean;
            let expected = probs[b] * (1.0 - probs[b]) / n as f64;
            assert!((mean - probs[b]).abs() < 5.0 * (expected / reps as f64).sqrt());
            assert!((var / expected - 1.0).abs() < 0.1, "outcome {b}: {var} vs {expected}");
        }
    }

    #[test]
    fn exact_mode_is_large_shot_limit() {
        let probs = vec![0.123, 0.456, 0.021, 0.4];
        let mut rng = SeededRng::new(7, 0);
        let n = 1_000_000_000u64;
        let exact = observe(probs.clone(), ShotConfig::Exact, &mut rng).unwrap();
        let finite = observe(probs.clone(), ShotConfig::finite(n).unwrap(), &mut rng).unwrap();
        for b in 0..probs.len() {
            let sigma = (probs[b] * (1.0 - probs[b]) / n as f64).sqrt();
            assert!((exact[b] - finite[b]).abs() <= 5.0 * sigma);
        }
        assert!(ShotConfig::finite(0).is_err());
    }
}
