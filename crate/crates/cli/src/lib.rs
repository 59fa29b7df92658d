//! Experiment harness around `dfotr`: benchmark checkpoint tables, cross-validated
//! AUC maximization on LIBSVM datasets, and hyperparameter tuning of external
//! programs over a line protocol.

pub mod auc;
pub mod bench;
pub mod report;
pub mod tune;

/// Derives an independent seed for one (repeat, fold) cell of an experiment.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    // SplitMix64 finalizer over a simple combination.
    let mut z = base
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
