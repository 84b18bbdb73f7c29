use std::collections::HashMap;

use super::partition::Partition;
use crate::error::{Error, Result};

/// Normalised mutual information with arithmetic-mean normalisation,
/// `2·I(X;Y) / (H(X) + H(Y))`. Two single-block partitions score 1.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::PartitionMismatch(a.len(), b.len()));
    }
    let n = a.len() as f64;
    if a.is_empty() {
        return Ok(1.0);
    }
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.assignment().iter().zip(b.assignment()) {
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    let (sa, sb) = (a.sizes(), b.sizes());
    let entropy = |sizes: &[usize]| -> f64 {
        sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let (ha, hb) = (entropy(&sa), entropy(&sb));
    if ha + hb == 0.0 {
        return Ok(1.0);
    }
    let mut keys: Vec<_> = joint.into_iter().collect();
    keys.sort_unstable();
    let mi: f64 = keys
        .into_iter()
        .map(|((x, y), c)| {
            let pxy = c as f64 / n;
            pxy * (pxy * n * n / (sa[x] as f64 * sb[y] as f64)).ln()
        })
        .sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_partitions() {
        let p = Partition::from_labels(&[0, 0, 1, 1, 2]);
        assert!((nmi(&p, &p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singletons_vs_one_block() {
        let v = nmi(&Partition::singletons(5), &Partition::single_block(5)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn crossed_halves_share_nothing() {
        // {ab|cd} vs {ac|bd}: every cell of the contingency table holds one node.
        let p1 = Partition::from_labels(&[0, 0, 1, 1]);
        let p2 = Partition::from_labels(&[0, 1, 0, 1]);
        assert!(nmi(&p1, &p2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn relabelling_is_irrelevant() {
        let p1 = Partition::from_labels(&[0, 0, 1, 1, 1, 2]);
        let p2 = Partition::from_labels(&[5, 5, 9, 9, 9, 1]);
        assert!((nmi(&p1, &p2).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_sizes_error() {
        assert!(nmi(&Partition::singletons(3), &Partition::singletons(4)).is_err());
    }
}
