use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::EvalError;
use crate::model_blstm::{predict, BlstmParams, Sequence};

/// Epoch-weighted accuracy over the labeled steps of all sequences.
pub fn sequence_accuracy(params: &BlstmParams, seqs: &[Sequence]) -> Result<f64, EvalError> {
    let (mut hit, mut n) = (0usize, 0usize);
    for s in seqs {
        let pred = predict(params, &s.features)?;
        for (p, y) in pred.iter().zip(&s.labels) {
            if let Some(y) = y {
                hit += usize::from(p == y);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    Ok(hit as f64 / n as f64)
}

/// Mean accuracy drop when one feature column is shuffled across the steps
/// of each sequence, for every feature, sorted by decreasing drop (ties keep
/// column order). Feature `j` draws its permutations from `seed + j`.
pub fn permutation_importance(
    params: &BlstmParams,
    sequences: &[Sequence],
    names: &[String],
    seed: u64,
    repeats: usize,
) -> Result<Vec<(String, f64)>, EvalError> {
    if repeats == 0 {
        return Err(EvalError::InvalidRepeats);
    }
    let dim = params.dims.input;
    if names.len() != dim {
        return Err(EvalError::Model(crate::model_blstm::ModelError::ShapeMismatch(
            format!("{} feature names for {dim} inputs", names.len()),
        )));
    }
    let base = sequence_accuracy(params, sequences)?;
    let drops: Vec<f64> = (0..dim)
        .into_par_iter()
        .map(|j| -> Result<f64, EvalError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(j as u64));
            let mut total = 0.0;
            for _ in 0..repeats {
                let shuffled: Vec<Sequence> = sequences
                    .iter()
                    .map(|s| {
                        let mut column: Vec<f64> = s.features.iter().skip(j).step_by(dim).copied().collect();
                        column.shuffle(&mut rng);
                        let mut features = s.features.clone();
                        for (t, v) in column.into_iter().enumerate() {
                            features[t * dim + j] = v;
                        }
                        Sequence {
                            features,
                            labels: s.labels.clone(),
                        }
                    })
                    .collect();
                total += base - sequence_accuracy(params, &shuffled)?;
            }
            Ok(total / repeats as f64)
        })
        .collect::<Result<_, _>>()?;
    let mut ranked: Vec<(String, f64)> = names.iter().cloned().zip(drops).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_blstm::{init_params, BlstmDims};
    use rand::{Rng, SeedableRng};

    fn setup() -> (BlstmParams, Vec<Sequence>, Vec<String>) {
        let dims = BlstmDims {
            input: 6,
            hidden: 5,
            layers: 2,
            classes: 4,
            bidirectional: true,
        };
        let mut p = init_params(8, dims);
        // cut feature 2 out of the network
        for d in 0..2 {
            let blk = dims.block(0, d);
            for r in 0..4 * dims.hidden {
                p.values[blk.w + r * dims.input + 2] = 0.0;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let seqs = (0..3)
            .map(|_| Sequence {
                features: (0..20 * 6).map(|_| rng.random_range(-2.0..2.0)).collect(),
                labels: (0..20).map(|_| Some(rng.random_range(0..4))).collect(),
            })
            .collect();
        let names = (0..6).map(|j| format!("f{j}")).collect();
        (p, seqs, names)
    }

    #[test]
    fn ignored_feature_has_no_effect() {
        let (p, seqs, names) = setup();
        let ranked = permutation_importance(&p, &seqs, &names, 3, 4).unwrap();
        let f2 = ranked.iter().find(|(n, _)| n == "f2").unwrap();
        assert_eq!(f2.1, 0.0);
        let mut got: Vec<&String> = ranked.iter().map(|(n, _)| n).collect();
        got.sort();
        assert_eq!(got, names.iter().collect::<Vec<_>>());
        assert!(ranked.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn deterministic_and_validated() {
        let (p, seqs, names) = setup();
        let a = permutation_importance(&p, &seqs, &names, 3, 2).unwrap();
        assert_eq!(a, permutation_importance(&p, &seqs, &names, 3, 2).unwrap());
        assert!(matches!(
            permutation_importance(&p, &seqs, &names, 3, 0),
            Err(EvalError::InvalidRepeats)
        ));
    }
}
