//! Small statistical toolbox: rank correlations, two-sample KS distance,
//! a bounded 1-D maximizer, and standard-normal helpers.
//!
//! Everything here is deterministic and allocation-light; the heavier
//! numerics (SVD, Cholesky) live with their callers.

use statrs::distribution::{ContinuousCDF, Normal};

/// Arithmetic mean. Returns 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n−1 denominator). Returns 0 for fewer than two
/// points.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Median of an unsorted slice (average of the middle two for even length).
pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pearson correlation. Returns 0 when either side is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Ranks with ties assigned their average rank (1-based).
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[idx[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b in O(n log n): sort by (x, y), correct for tie pair counts,
/// and count discordant pairs as merge-sort inversions of the y sequence.
/// Returns 0 when either variable is entirely tied.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let tie_pairs = |run: usize| (run * (run - 1) / 2) as f64;
    let n0 = tie_pairs(n);

    // Tie counts in x and joint (x, y) ties, from runs of the sorted order.
    let mut n1 = 0.0;
    let mut n3 = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        n1 += tie_pairs(j - i + 1);
        let mut k = i;
        while k <= j {
            let mut l = k;
            while l < j && y[idx[l + 1]] == y[idx[k]] {
                l += 1;
            }
            n3 += tie_pairs(l - k + 1);
            k = l + 1;
        }
        i = j + 1;
    }

    let mut n2 = 0.0;
    let mut ys: Vec<f64> = y.to_vec();
    ys.sort_by(|a, b| a.total_cmp(b));
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ys[j + 1] == ys[i] {
            j += 1;
        }
        n2 += tie_pairs(j - i + 1);
        i = j + 1;
    }

    let y_in_x_order: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let swaps = merge_count(&y_in_x_order) as f64;

    let concordant_minus_discordant = n0 - n1 - n2 + n3 - 2.0 * swaps;
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    concordant_minus_discordant / denom
}

/// Number of strict inversions (i < j with a[i] > a[j]) via merge sort.
fn merge_count(a: &[f64]) -> u64 {
    fn rec(a: &mut [f64], buf: &mut [f64]) -> u64 {
        let n = a.len();
        if n <= 1 {
            return 0;
        }
        let mid = n / 2;
        let mut inv = {
            let (lo, hi) = a.split_at_mut(mid);
            rec(lo, buf) + rec(hi, buf)
        };
        let (mut i, mut j, mut k) = (0, mid, 0);
        while i < mid && j < n {
            if a[j] < a[i] {
                inv += (mid - i) as u64;
                buf[k] = a[j];
                j += 1;
            } else {
                buf[k] = a[i];
                i += 1;
            }
            k += 1;
        }
        buf[k..k + mid - i].copy_from_slice(&a[i..mid]);
        a[..k + mid - i].copy_from_slice(&buf[..k + mid - i]);
        inv
    }
    let mut v = a.to_vec();
    let mut buf = vec![0.0; v.len()];
    rec(&mut v, &mut buf)
}

/// Two-sample Kolmogorov–Smirnov statistic: sup |F_a − F_b| over the pooled
/// sample points.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.total_cmp(y));
    sb.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let t = sa[i].min(sb[j]);
        while i < sa.len() && sa[i] <= t {
            i += 1;
        }
        while j < sb.len() && sb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d.max(1.0 - (i as f64 / na).min(j as f64 / nb))
}

/// Golden-section search for the maximum of a unimodal `f` on `[lo, hi]`.
/// Shrinks the bracket below `tol` and returns `(argmax, max)`. Non-finite
/// objective values are treated as arbitrarily poor, so the search survives
/// regions where `f` is undefined.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let clean = |v: f64| if v.is_finite() { v } else { f64::NEG_INFINITY };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = clean(f(c));
    let mut fd = clean(f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = clean(f(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = clean(f(d));
        }
    }
    let x = 0.5 * (a + b);
    (x, clean(f(x)))
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Standard normal quantile (inverse CDF). `p` must lie in (0, 1).
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// FNV-1a hash of a seed and a purpose tag. Used to derive independent,
/// platform-stable RNG streams for the pipeline's stochastic stages.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in base.to_le_bytes().iter().chain(tag.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
