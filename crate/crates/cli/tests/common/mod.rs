//! Shared helpers and independent oracles for the acceptance suite.
//!
//! Everything in here deliberately avoids the library's own code paths:
//! spectra come from a local radix-2 FFT, error rates from naive counting
//! sweeps, calibration from exhaustive partition search, and alignments from
//! plain recursion. The suite compares the product against these.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

// ---------------------------------------------------------------- signals

/// White noise pushed through a cascade of two-pole resonators, peak-scaled.
pub fn ar_noise(seed: u64, len: usize, sections: &[(f64, f64)]) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..len).map(|_| rng.gen_range(-0.1..0.1)).collect();
    for &(r, w) in sections {
        let (a1, a2) = (2.0 * r * w.cos(), -r * r);
        let mut y = vec![0.0; len];
        for n in 0..len {
            let y1 = if n >= 1 { y[n - 1] } else { 0.0 };
            let y2 = if n >= 2 { y[n - 2] } else { 0.0 };
            y[n] = x[n] + a1 * y1 + a2 * y2;
        }
        x = y;
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    x.iter().map(|v| 0.5 * v / peak).collect()
}

pub fn snr_db(reference: &[f64], test: &[f64]) -> f64 {
    assert_eq!(reference.len(), test.len());
    let sig: f64 = reference.iter().map(|v| v * v).sum();
    let err: f64 = reference
        .iter()
        .zip(test)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    10.0 * (sig / err.max(1e-300)).log10()
}

// ------------------------------------------------------------------- FFT

/// In-place iterative radix-2 FFT over (re, im) pairs; `n` a power of two.
fn fft(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert!(n.is_power_of_two());
    // bit reversal
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -2.0 * std::f64::consts::PI / len as f64;
        let (wr, wi) = (ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let (mut cr, mut ci) = (1.0f64, 0.0f64);
            for k in 0..len / 2 {
                let (ar, ai) = (re[start + k], im[start + k]);
                let (br, bi) = (re[start + k + len / 2], im[start + k + len / 2]);
                let (tr, ti) = (br * cr - bi * ci, br * ci + bi * cr);
                re[start + k] = ar + tr;
                im[start + k] = ai + ti;
                re[start + k + len / 2] = ar - tr;
                im[start + k + len / 2] = ai - ti;
                let next_cr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = next_cr;
            }
        }
        len <<= 1;
    }
}

/// Welch-averaged power spectrum: hann segments, 50% overlap.
pub fn welch_spectrum(signal: &[f64], n_fft: usize) -> Vec<f64> {
    assert!(n_fft.is_power_of_two());
    let hop = n_fft / 2;
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / (n_fft - 1) as f64).cos()))
        .collect();
    let mut power = vec![0.0; n_fft / 2];
    let mut segments = 0usize;
    let mut start = 0usize;
    while start + n_fft <= signal.len() {
        let mut re: Vec<f64> = signal[start..start + n_fft]
            .iter()
            .zip(&window)
            .map(|(s, w)| s * w)
            .collect();
        let mut im = vec![0.0; n_fft];
        fft(&mut re, &mut im);
        for k in 0..n_fft / 2 {
            power[k] += re[k] * re[k] + im[k] * im[k];
        }
        segments += 1;
        start += hop;
    }
    assert!(segments > 0, "signal shorter than one FFT segment");
    for p in power.iter_mut() {
        *p /= segments as f64;
    }
    power
}

/// Index of the largest spectral bin inside [lo_hz, hi_hz).
pub fn peak_bin(power: &[f64], n_fft: usize, sample_rate: f64, lo_hz: f64, hi_hz: f64) -> usize {
    let bin_hz = sample_rate / n_fft as f64;
    let lo = (lo_hz / bin_hz).floor() as usize;
    let hi = ((hi_hz / bin_hz).ceil() as usize).min(power.len());
    (lo..hi)
        .max_by(|&a, &b| power[a].partial_cmp(&power[b]).unwrap())
        .expect("non-empty band")
}

// ----------------------------------------------------------- EER oracle

/// Exhaustive threshold sweep with naive counting: rates are evaluated at
/// every observed score, at midpoints between consecutive distinct scores,
/// and at sentinels beyond both ends.
pub fn eer_oracle(targets: &[f64], impostors: &[f64]) -> f64 {
    let mut all: Vec<f64> = targets.iter().chain(impostors).copied().collect();
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    all.dedup();
    let mut candidates = vec![all[0] - 1.0];
    for w in all.windows(2) {
        candidates.push(w[0]);
        candidates.push((w[0] + w[1]) / 2.0);
    }
    candidates.push(*all.last().unwrap());
    candidates.push(all.last().unwrap() + 1.0);

    let mut best: Option<(f64, f64, f64)> = None; // (|diff|, sum, midpoint)
    for &theta in &candidates {
        let fa = impostors.iter().filter(|&&s| s > theta).count() as f64 / impostors.len() as f64;
        let miss = targets.iter().filter(|&&s| s <= theta).count() as f64 / targets.len() as f64;
        let key = ((fa - miss).abs(), fa + miss);
        let better = match &best {
            None => true,
            Some((d, s, _)) => key.0 < *d || (key.0 == *d && key.1 < *s),
        };
        if better {
            best = Some((key.0, key.1, (fa + miss) / 2.0));
        }
    }
    100.0 * best.unwrap().2
}

// ------------------------------------------------- calibration oracle

fn softplus_log2(x: f64) -> f64 {
    let nats = if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    };
    nats / std::f64::consts::LN_2
}

/// Cllr of a blockwise-constant calibration, with pure blocks contributing
/// zero cost (their LLRs sit at +-infinity in the limit).
fn block_cllr(blocks: &[(u64, u64)], n_tar: u64, n_imp: u64) -> f64 {
    let prior_log_odds = (n_tar as f64 / n_imp as f64).ln();
    let mut t_cost = 0.0;
    let mut i_cost = 0.0;
    for &(bt, bi) in blocks {
        if bt > 0 && bi > 0 {
            let p = bt as f64 / (bt + bi) as f64;
            let llr = (p / (1.0 - p)).ln() - prior_log_odds;
            t_cost += bt as f64 * softplus_log2(-llr);
            i_cost += bi as f64 * softplus_log2(llr);
        }
    }
    0.5 * (t_cost / n_tar as f64 + i_cost / n_imp as f64)
}

/// Exhaustive monotone-partition optimization of Cllr.
///
/// Scores are pooled into groups of identical value, every split of the
/// group sequence into consecutive blocks is enumerated, partitions whose
/// block posteriors decrease are discarded, and the minimum Cllr over the
/// rest is returned. Feasible only for small score sets (2^(k-1) partitions).
pub fn cllr_min_oracle(targets: &[f64], impostors: &[f64]) -> f64 {
    let mut labeled: Vec<(f64, u64)> = targets
        .iter()
        .map(|&s| (s, 1u64))
        .chain(impostors.iter().map(|&s| (s, 0u64)))
        .collect();
    labeled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut groups: Vec<(u64, u64)> = Vec::new(); // (targets, impostors)
    let mut idx = 0;
    while idx < labeled.len() {
        let score = labeled[idx].0;
        let (mut t, mut i) = (0u64, 0u64);
        while idx < labeled.len() && labeled[idx].0 == score {
            if labeled[idx].1 == 1 {
                t += 1;
            } else {
                i += 1;
            }
            idx += 1;
        }
        groups.push((t, i));
    }
    let k = groups.len();
    assert!(k <= 20, "partition oracle explodes beyond ~20 groups");
    let n_tar = targets.len() as u64;
    let n_imp = impostors.len() as u64;

    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << (k - 1)) {
        let mut blocks: Vec<(u64, u64)> = Vec::new();
        let (mut t, mut i) = (0u64, 0u64);
        for (g, &(gt, gi)) in groups.iter().enumerate() {
            t += gt;
            i += gi;
            let boundary = g == k - 1 || mask & (1 << g) != 0;
            if boundary {
                blocks.push((t, i));
                t = 0;
                i = 0;
            }
        }
        // keep only non-decreasing posterior sequences (valid monotone maps)
        let monotone = blocks.windows(2).all(|w| {
            let (t0, i0) = w[0];
            let (t1, i1) = w[1];
            // t0/(t0+i0) <= t1/(t1+i1), cross-multiplied
            (t0 as u128) * ((t1 + i1) as u128) <= (t1 as u128) * ((t0 + i0) as u128)
        });
        if monotone {
            best = best.min(block_cllr(&blocks, n_tar, n_imp));
        }
    }
    best
}

// ------------------------------------------------------- WER oracles

/// Plain recursive edit distance over token sequences (no DP table).
pub fn edit_distance_oracle(a: &[u8], b: &[u8]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let sub = edit_distance_oracle(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
    let del = edit_distance_oracle(&a[1..], b) + 1;
    let ins = edit_distance_oracle(a, &b[1..]) + 1;
    sub.min(del).min(ins)
}

/// Lexicographically minimal (cost, insertions, deletions) alignment triple
/// over all alignments, by exhaustive recursion.
pub fn alignment_oracle(a: &[u8], b: &[u8]) -> (usize, usize, usize) {
    if a.is_empty() {
        return (b.len(), b.len(), 0);
    }
    if b.is_empty() {
        return (a.len(), 0, a.len());
    }
    let (c, i, d) = alignment_oracle(&a[1..], &b[1..]);
    let sub = (c + usize::from(a[0] != b[0]), i, d);
    let (c, i, d) = alignment_oracle(&a[1..], b);
    let del = (c + 1, i, d + 1);
    let (c, i, d) = alignment_oracle(a, &b[1..]);
    let ins = (c + 1, i + 1, d);
    [sub, del, ins].into_iter().min().unwrap()
}

// -------------------------------------------------- selection oracle

/// Full-sort farthest-N selection: every pool entry ranked by
/// (distance descending, id ascending), top N returned as sorted ids.
pub fn farthest_oracle(
    source: &[f64],
    pool: &[(String, Vec<f64>)],
    exclude_id: Option<&str>,
    n: usize,
) -> Vec<String> {
    let dist = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        1.0 - dot / (na * nb)
    };
    let mut ranked: Vec<(f64, &str)> = pool
        .iter()
        .filter(|(id, _)| Some(id.as_str()) != exclude_id)
        .map(|(id, v)| (dist(source, v), id.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
    let mut ids: Vec<String> = ranked[..n].iter().map(|(_, id)| id.to_string()).collect();
    ids.sort();
    ids
}

// ------------------------------------------- convex-hull certificate

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            rho = i;
            theta = t;
        }
    }
    let _ = rho;
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Residual of the best convex combination of `candidates` approximating
/// `point`, found by accelerated projected gradient on the simplex. A small
/// residual certifies that the point lies in the candidates' convex hull.
pub fn convex_hull_residual(candidates: &[Vec<f64>], point: &[f64]) -> f64 {
    let k = candidates.len();
    let dim = point.len();
    let residual_of = |w: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; dim];
        for d in 0..dim {
            r[d] = -point[d];
            for (j, c) in candidates.iter().enumerate() {
                r[d] += w[j] * c[d];
            }
        }
        r
    };
    let gradient_of = |r: &[f64]| -> Vec<f64> {
        candidates
            .iter()
            .map(|c| 2.0 * c.iter().zip(r).map(|(x, y)| x * y).sum::<f64>())
            .collect()
    };
    // largest eigenvalue of V^T V by power iteration, for the step size
    let mut v = vec![1.0 / (k as f64).sqrt(); k];
    let mut lambda = 1.0f64;
    for _ in 0..100 {
        let r = {
            let mut r = vec![0.0; dim];
            for d in 0..dim {
                for (j, c) in candidates.iter().enumerate() {
                    r[d] += v[j] * c[d];
                }
            }
            r
        };
        let next: Vec<f64> = candidates
            .iter()
            .map(|c| c.iter().zip(&r).map(|(x, y)| x * y).sum::<f64>())
            .collect();
        lambda = next.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v = next.iter().map(|x| x / lambda).collect();
    }
    let step = 1.0 / (2.0 * lambda * 1.01);

    // FISTA, started away from the known uniform solution so the check is
    // not circular
    let mut w = vec![0.0; k];
    w[0] = 1.0;
    let mut y = w.clone();
    let mut t = 1.0f64;
    let mut best = f64::INFINITY;
    for _ in 0..200_000 {
        let r = residual_of(&y);
        let g = gradient_of(&r);
        let proposal: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect();
        let w_next = project_simplex(&proposal);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = w_next
            .iter()
            .zip(&w)
            .map(|(wn, wo)| wn + (t - 1.0) / t_next * (wn - wo))
            .collect();
        w = w_next;
        t = t_next;
        let norm: f64 = residual_of(&w).iter().map(|x| x * x).sum::<f64>().sqrt();
        best = best.min(norm);
        if best < 1e-10 {
            break;
        }
    }
    best
}
