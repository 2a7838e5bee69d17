use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};

/// Disjoint train/validation/test column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train_idx.len(), self.val_idx.len(), self.test_idx.len())
    }
}

/// Part sizes by largest-remainder rounding; ties go to the earlier part.
pub fn part_sizes(n: usize, fractions: [f64; 3]) -> Result<[usize; 3]> {
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::config(format!("split fractions must be positive, got {fractions:?}")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("split fractions sum to {total}, not 1")));
    }
    let ideal: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    // Snap values within rounding noise of an integer so 0.6 * 5970 is 3582.
    let floors: Vec<usize> = ideal
        .iter()
        .map(|x| {
            let r = x.round();
            if (x - r).abs() < 1e-6 { r as usize } else { x.floor() as usize }
        })
        .collect();
    let mut sizes = [floors[0], floors[1], floors[2]];
    let assigned: usize = sizes.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - floors[a] as f64;
        let rb = ideal[b] - floors[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        sizes[k] += 1;
    }
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        let name = ["train", "validation", "test"][k];
        return Err(Error::config(format!(
            "fractions {fractions:?} leave the {name} part empty for {n} atoms"
        )));
    }
    Ok(sizes)
}

/// Seeded uniform shuffle of the dictionary's columns cut into three parts.
pub fn split_dataset(dict: &Dictionary, fractions: [f64; 3], seed: u64) -> Result<DatasetSplit> {
    let n = dict.n_atoms();
    if n == 0 {
        return Err(Error::config("cannot split an empty dictionary"));
    }
    let [a, b, _] = part_sizes(n, fractions)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_idx = idx.split_off(a + b);
    let val_idx = idx.split_off(a);
    Ok(DatasetSplit {
        train_idx: idx,
        val_idx,
        test_idx,
    })
}
