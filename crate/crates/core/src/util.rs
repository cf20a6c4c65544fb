//! Small shared helpers: seed derivation, rank statistics and serde glue.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent stream seed from a root seed and a path of labels.
/// Streams depend only on the labels, never on scheduling.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(root), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, path))
}

/// Purpose tags for [`derive_seed`] paths.
pub mod purpose {
    pub const INIT: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const MUTATE: u64 = 3;
    pub const PRUNE: u64 = 4;
    pub const SURROGATE: u64 = 5;
    pub const RESET: u64 = 6;
    pub const RANDOM_GRAPHS: u64 = 7;
}

/// Average ranks (1-based), ties share the mean rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.len() < 2 {
        return 0.0;
    }
    pearson(&ranks(a), &ranks(b))
}

/// One-sided Mann-Whitney U test of `x > y`. Returns `(U_x, p)` where `p`
/// is exact for small tie-free samples and uses the tie-corrected normal
/// approximation otherwise.
pub fn mann_whitney_greater(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (n, m) = (x.len(), y.len());
    let mut u = 0.0;
    for a in x {
        for b in y {
            u += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
        }
    }
    let mut all: Vec<f64> = x.iter().chain(y).copied().collect();
    all.sort_by(f64::total_cmp);
    let has_ties = all.windows(2).any(|w| w[0] == w[1]);
    if !has_ties && n + m <= 20 {
        // Count rank assignments whose U is at least the observed one.
        let counts = u_distribution(n, m);
        let total: f64 = counts.iter().sum();
        let tail: f64 = counts.iter().enumerate().filter(|(k, _)| *k as f64 >= u).map(|(_, c)| c).sum();
        return (u, tail / total);
    }
    let (nf, mf) = (n as f64, m as f64);
    let mean = nf * mf / 2.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1] == all[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let big_n = nf + mf;
    let var = nf * mf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return (u, if u > mean { 0.0 } else { 1.0 });
    }
    let z = (u - mean - 0.5) / var.sqrt();
    (u, 0.5 * erfc(z / std::f64::consts::SQRT_2))
}

/// Number of arrangements yielding each U value for sample sizes `n`, `m`.
fn u_distribution(n: usize, m: usize) -> Vec<f64> {
    // f[i][j][u]: arrangements of i x-values and j y-values with statistic u.
    let max_u = n * m;
    let mut f = vec![vec![vec![0.0; max_u + 1]; m + 1]; n + 1];
    for row in f.iter_mut() {
        row[0][0] = 1.0;
    }
    for j in 0..=m {
        f[0][j][0] = 1.0;
    }
    for i in 1..=n {
        for j in 1..=m {
            for u in 0..=max_u {
                // Largest element is an x (beats all j y-values) or a y.
                let from_x = if u >= j { f[i - 1][j][u - j] } else { 0.0 };
                f[i][j][u] = from_x + f[i][j - 1][u];
            }
        }
    }
    f[n][m].clone()
}

/// Complementary error function (Numerical Recipes `erfcc`, |err| < 1.2e-7).
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t * (-z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98 + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
        .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
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

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Serializes `Option<f64>` so that infinities survive JSON: non-finite
/// values are written as the strings `"inf"`, `"-inf"` or `"nan"`.
pub mod opt_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_some(x),
            Some(x) => s.serialize_some(&super::f64_text(*x)),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => super::parse_f64_text(&t).map(Some).map_err(serde::de::Error::custom),
        }
    }
}

/// Same as [`opt_f64`] for a bare `f64`.
pub mod any_f64 {
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::opt_f64::serialize(&Some(*v), s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        super::opt_f64::deserialize(d)?.ok_or_else(|| serde::de::Error::custom("expected a number"))
    }
}

fn f64_text(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_f64_text(t: &str) -> Result<f64, String> {
    match t {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        other => Err(format!("not a number: {other:?}")),
    }
}

/// Formats a float for CSV output; shortest round-trip representation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        f64_text(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_of_monotone_maps_is_one() {
        let a = [0.1, 0.5, -2.0, 3.0, 1.0];
        let b: Vec<f64> = a.iter().map(|x: &f64| x.exp()).collect();
        assert!((spearman(&a, &b) - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((spearman(&a, &c) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_mann_whitney_matches_enumeration() {
        // Complete separation with n = m = 5 has p = 1 / C(10, 5).
        let x = [6.0, 7.0, 8.0, 9.0, 10.0];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (u, p) = mann_whitney_greater(&x, &y);
        assert_eq!(u, 25.0);
        assert!((p - 1.0 / 252.0).abs() < 1e-15);
        let (_, p) = mann_whitney_greater(&y, &x);
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derived_seeds_differ_by_path() {
        assert_ne!(derive_seed(0, &[1, 2]), derive_seed(0, &[2, 1]));
        assert_eq!(derive_seed(5, &[1, 2]), derive_seed(5, &[1, 2]));
    }

    #[test]
    fn erfc_reference_values() {
        assert!((erfc(0.0) - 1.0).abs() < 1e-7);
        assert!((erfc(1.0) - 0.157_299_207).abs() < 1e-7);
        assert!((erfc(-1.0) - 1.842_700_793).abs() < 1e-7);
    }

    #[test]
    fn infinite_fitness_survives_json() {
        #[derive(serde::Serialize, serde::Deserialize)]
        struct W {
            #[serde(with = "opt_f64")]
            f: Option<f64>,
        }
        for v in [None, Some(1.5), Some(f64::NEG_INFINITY)] {
            let s = serde_json::to_string(&W { f: v }).unwrap();
            let back: W = serde_json::from_str(&s).unwrap();
            assert_eq!(back.f, v);
        }
    }
}
