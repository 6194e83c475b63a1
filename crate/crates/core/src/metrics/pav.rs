//! Optimal score calibration by pool-adjacent-violators isotonic regression.
//!
//! Scores with labels (impostor 0, target 1) are pooled into blocks whose
//! posteriors are non-decreasing in score; subtracting the empirical prior
//! log-odds turns block posteriors into calibrated LLRs. Block arithmetic is
//! exact (integer counts compared by cross-multiplication), so the block
//! structure never depends on floating-point rounding.

use super::ScoreSet;

#[derive(Debug, Clone, Copy)]
struct Block {
    score_min: f64,
    score_max: f64,
    count: u64,
    targets: u64,
}

impl Block {
    /// mean(self) > mean(other), exactly.
    fn violates(&self, next: &Block) -> bool {
        (self.targets as u128) * (next.count as u128)
            > (next.targets as u128) * (self.count as u128)
    }

    /// mean(self) == mean(other), exactly.
    fn mean_equals(&self, other: &Block) -> bool {
        (self.targets as u128) * (other.count as u128)
            == (other.targets as u128) * (self.count as u128)
    }

    fn merge(&mut self, other: &Block) {
        self.score_max = other.score_max;
        self.count += other.count;
        self.targets += other.targets;
    }

    fn posterior(&self) -> f64 {
        self.targets as f64 / self.count as f64
    }
}

/// Isotonic fit of the 0/1 labels against scores; adjacent blocks with equal
/// posteriors are merged, so posteriors strictly increase across blocks.
fn pav_blocks(scores: &ScoreSet) -> Vec<Block> {
    // pool tied scores first: a calibration map must be a function of the score
    let mut labeled: Vec<(f64, u64)> = scores
        .target()
        .iter()
        .map(|&s| (s, 1u64))
        .chain(scores.impostor().iter().map(|&s| (s, 0u64)))
        .collect();
    labeled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let mut stack: Vec<Block> = Vec::new();
    let mut idx = 0;
    while idx < labeled.len() {
        let score = labeled[idx].0;
        let mut block = Block {
            score_min: score,
            score_max: score,
            count: 0,
            targets: 0,
        };
        while idx < labeled.len() && labeled[idx].0 == score {
            block.count += 1;
            block.targets += labeled[idx].1;
            idx += 1;
        }
        stack.push(block);
        while stack.len() >= 2 {
            let last = stack.len() - 1;
            if stack[last - 1].violates(&stack[last]) || stack[last - 1].mean_equals(&stack[last]) {
                let top = stack.pop().unwrap();
                stack.last_mut().unwrap().merge(&top);
            } else {
                break;
            }
        }
    }
    stack
}

/// One step of the calibration map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBlock {
    /// Smallest raw score pooled into this block.
    pub score_min: f64,
    /// Largest raw score pooled into this block.
    pub score_max: f64,
    pub count: usize,
    pub targets: usize,
    /// Block posterior after boundary clipping.
    pub posterior: f64,
    /// Calibrated LLR: `logit(posterior) - prior log-odds`.
    pub llr: f64,
}

/// Monotone score-to-LLR map produced by [`pav_calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMap {
    pub blocks: Vec<CalibrationBlock>,
    /// `ln(N_tar / N_imp)`, removed from posterior log-odds.
    pub prior_log_odds: f64,
}

impl CalibrationMap {
    /// Look up the calibrated LLR for a raw score (step interpolation;
    /// scores outside the observed range take the nearest block's value).
    pub fn map_score(&self, score: f64) -> f64 {
        let idx = self
            .blocks
            .partition_point(|b| b.score_max < score)
            .min(self.blocks.len() - 1);
        self.blocks[idx].llr
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fit the PAV-to-LLR calibration map.
///
/// Boundary posteriors (pure blocks at 0 or 1) are clipped into
/// `[1/(2N), 1 - 1/(2N)]`, N the total trial count, so the exported map
/// never returns an infinite LLR. Interior block posteriors `k/n` with
/// `0 < k < n` always lie inside that interval already.
pub fn pav_calibrate(scores: &ScoreSet) -> CalibrationMap {
    let blocks = pav_blocks(scores);
    let total = (scores.n_target() + scores.n_impostor()) as f64;
    let eps = 1.0 / (2.0 * total);
    let prior_log_odds = (scores.n_target() as f64 / scores.n_impostor() as f64).ln();
    let blocks = blocks
        .iter()
        .map(|b| {
            let posterior = b.posterior().clamp(eps, 1.0 - eps);
            CalibrationBlock {
                score_min: b.score_min,
                score_max: b.score_max,
                count: b.count as usize,
                targets: b.targets as usize,
                posterior,
                llr: logit(posterior) - prior_log_odds,
            }
        })
        .collect();
    CalibrationMap {
        blocks,
        prior_log_odds,
    }
}

/// Discrimination loss: Cllr after optimal monotone recalibration.
///
/// Evaluated on the exact (unclipped) isotonic posteriors. Pure blocks
/// correspond to LLRs of +-infinity whose cost terms vanish in the limit,
/// so the value is finite, never exceeds [`cllr`], and never exceeds 1:
/// the constant map (one block) is always a feasible calibration and
/// costs exactly 1 bit.
pub fn cllr_min(scores: &ScoreSet) -> f64 {
    let blocks = pav_blocks(scores);
    let prior_log_odds = (scores.n_target() as f64 / scores.n_impostor() as f64).ln();
    let ln2 = std::f64::consts::LN_2;
    let mut target_cost = 0.0;
    let mut impostor_cost = 0.0;
    for b in &blocks {
        let n_tar = b.targets;
        let n_imp = b.count - b.targets;
        if n_tar > 0 && n_imp > 0 {
            let llr = logit(b.posterior()) - prior_log_odds;
            target_cost += n_tar as f64 * ((-llr).exp().ln_1p() / ln2);
            impostor_cost += n_imp as f64 * (llr.exp().ln_1p() / ln2);
        }
        // pure blocks: llr -> +-inf, both cost terms -> 0
    }
    0.5 * (target_cost / scores.n_target() as f64 + impostor_cost / scores.n_impostor() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::cllr;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn perfectly_ordered_scores_give_two_pure_blocks() {
        let s = ScoreSet::new(vec![1.0, 2.0, 3.0], vec![-3.0, -2.0, -1.0]).unwrap();
        let map = pav_calibrate(&s);
        assert_eq!(map.blocks.len(), 2);
        assert_eq!(map.blocks[0].targets, 0);
        assert_eq!(map.blocks[1].targets, 3);
        assert!(map.blocks[0].llr < map.blocks[1].llr);
        // strictly increasing llrs
        for w in map.blocks.windows(2) {
            assert!(w[0].llr < w[1].llr);
        }
    }

    #[test]
    fn identical_scores_map_to_llr_zero() {
        let s = ScoreSet::new(vec![0.7; 3], vec![0.7; 5]).unwrap();
        let map = pav_calibrate(&s);
        assert_eq!(map.blocks.len(), 1);
        // posterior = 3/8 equals the prior, so the mapped LLR is zero
        assert_abs_diff_eq!(map.blocks[0].llr, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(map.map_score(0.7), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cllr_min(&s), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn separated_sets_have_near_zero_min_cllr() {
        let t: Vec<f64> = (0..20).map(|i| 1.0 + i as f64 * 0.1).collect();
        let i: Vec<f64> = (0..20).map(|i| -3.0 + i as f64 * 0.1).collect();
        let s = ScoreSet::new(t, i).unwrap();
        let c = cllr_min(&s);
        assert!((0.0..=0.01).contains(&c), "cllr_min {c}");
    }

    #[test]
    fn label_independent_scores_approach_one() {
        // same distribution for both classes: discrimination is a coin toss
        let mut rng = ChaCha20Rng::seed_from_u64(404);
        let t: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let i: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = ScoreSet::new(t, i).unwrap();
        let c = cllr_min(&s);
        assert!(c > 0.9 && c <= 1.0 + 1e-9, "cllr_min {c}");
    }

    #[test]
    fn map_score_steps_monotonically() {
        let s = ScoreSet::new(vec![0.9, 1.5, 2.0], vec![-1.0, 0.1, 1.1]).unwrap();
        let map = pav_calibrate(&s);
        let xs: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| map.map_score(x)).collect();
        for w in ys.windows(2) {
            assert!(w[0] <= w[1]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decomposition_holds(seed in 0u64..1 << 32) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..rng.gen_range(1..40)).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let i: Vec<f64> = (0..rng.gen_range(1..40)).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let s = ScoreSet::new(t, i).unwrap();
            let c = cllr(&s);
            let cmin = cllr_min(&s);
            prop_assert!(cmin <= c + 1e-9, "cllr_min {cmin} > cllr {c}");
            prop_assert!(cmin <= 1.0 + 1e-9);
            prop_assert!(cmin >= 0.0);
        }

        #[test]
        fn min_cllr_invariant_under_monotone_transform(seed in 0u64..1 << 32) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let i: Vec<f64> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let s = ScoreSet::new(t.clone(), i.clone()).unwrap();
            let warp = |x: f64| x.exp() / (1.0 + x.exp()) * 3.0 + 0.2 * x;
            let sw = ScoreSet::new(
                t.iter().map(|&x| warp(x)).collect(),
                i.iter().map(|&x| warp(x)).collect(),
            ).unwrap();
            prop_assert!((cllr_min(&s) - cllr_min(&sw)).abs() < 1e-12);
        }

        #[test]
        fn posteriors_non_decreasing(seed in 0u64..1 << 32) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let t: Vec<f64> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let i: Vec<f64> = (0..rng.gen_range(1..30)).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let s = ScoreSet::new(t, i).unwrap();
            let map = pav_calibrate(&s);
            for w in map.blocks.windows(2) {
                prop_assert!(w[0].posterior < w[1].posterior);
                prop_assert!(w[0].llr < w[1].llr);
                prop_assert!(w[0].score_max < w[1].score_min);
            }
        }
    }
}
