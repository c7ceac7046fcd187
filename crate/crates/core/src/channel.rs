//! Binary symmetric channel and the branch reward `n - d_H(x, y)`.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::codebook::{word_mask, Symbol, Word};
use crate::seeds;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("crossover probability {0} outside [0, 0.5]")]
    BadProbability(f64),
    #[error("input error: {0}")]
    Input(String),
}

/// Channel output `y_1..y_d`, each an `n`-bit word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReceivedSequence {
    n: u32,
    symbols: Vec<Word>,
}

impl ReceivedSequence {
    pub fn new(n: u32, symbols: Vec<Word>) -> Result<Self, ChannelError> {
        if n == 0 || n > 64 {
            return Err(ChannelError::Input(format!(
                "word width {n} outside 1..=64"
            )));
        }
        let mask = word_mask(n);
        if let Some(i) = symbols.iter().position(|&w| w & !mask != 0) {
            return Err(ChannelError::Input(format!(
                "symbol {i} is wider than {n} bits"
            )));
        }
        Ok(Self { n, symbols })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Word] {
        &self.symbols
    }

    pub fn into_symbols(self) -> Vec<Word> {
        self.symbols
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChannelConfig {
    pub crossover_p: f64,
    pub seed: u64,
}

impl ChannelConfig {
    pub fn new(crossover_p: f64, seed: u64) -> Result<Self, ChannelError> {
        check_probability(crossover_p)?;
        Ok(Self { crossover_p, seed })
    }
}

pub(crate) fn check_probability(p: f64) -> Result<(), ChannelError> {
    if (0.0..=0.5).contains(&p) {
        Ok(())
    } else {
        Err(ChannelError::BadProbability(p))
    }
}

/// An `n`-bit mask with each bit set independently with probability `p`.
pub(crate) fn flip_mask<R: Rng>(n: u32, p: f64, rng: &mut R) -> Word {
    (0..n).fold(0, |mask, bit| {
        if rng.gen_bool(p) {
            mask | (1 << bit)
        } else {
            mask
        }
    })
}

/// Sends `codeword` through BSC(`cfg.crossover_p`), flipping every bit
/// independently. The flips depend only on `cfg`, not on the codeword.
pub fn transmit_bsc(
    codeword: &[Word],
    n: u32,
    cfg: &ChannelConfig,
) -> Result<ReceivedSequence, ChannelError> {
    let mut rng = seeds::rng_from(cfg.seed, &[]);
    transmit_bsc_with(codeword, n, cfg.crossover_p, &mut rng)
}

/// [`transmit_bsc`] drawing flips from a caller-owned generator.
pub fn transmit_bsc_with<R: Rng>(
    codeword: &[Word],
    n: u32,
    crossover_p: f64,
    rng: &mut R,
) -> Result<ReceivedSequence, ChannelError> {
    check_probability(crossover_p)?;
    if codeword.is_empty() {
        return Err(ChannelError::Input("empty codeword".into()));
    }
    let input = ReceivedSequence::new(n, codeword.to_vec())?;
    let symbols = input
        .symbols
        .iter()
        .map(|&w| w ^ flip_mask(n, crossover_p, rng))
        .collect();
    Ok(ReceivedSequence { n, symbols })
}

#[inline]
pub fn hamming_distance(a: Word, b: Word) -> u32 {
    (a ^ b).count_ones()
}

/// Unchecked `n - d_H(label, received)`.
#[inline]
pub(crate) fn branch_reward(label: Word, received: Word, n: u32) -> u32 {
    n - hamming_distance(label, received)
}

/// Reward of a branch with label `label` against received word `received`:
/// `n` minus their Hamming distance, in `[0, n]`.
pub fn reward(label: Word, received: Word, n: u32) -> Result<u32, ChannelError> {
    if n == 0 || n > 64 {
        return Err(ChannelError::Input(format!(
            "word width {n} outside 1..=64"
        )));
    }
    let mask = word_mask(n);
    if (label | received) & !mask != 0 {
        return Err(ChannelError::Input(format!("word wider than {n} bits")));
    }
    Ok(branch_reward(label, received, n))
}

/// Number of positions where two symbol sequences differ.
pub fn symbol_errors(truth: &[Symbol], estimate: &[Symbol]) -> usize {
    truth.iter().zip(estimate).filter(|(a, b)| a != b).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        assert_eq!(reward(0b01, 0b01, 2), Ok(2));
        assert_eq!(reward(0b00, 0b11, 2), Ok(0));
        assert_eq!(reward(0b01, 0b00, 2), Ok(1));
        assert!(reward(0b100, 0b00, 2).is_err());
        assert!(reward(0, 0, 0).is_err());
    }

    #[test]
    fn reward_plus_distance_is_n() {
        for n in 1..=8 {
            for x in 0..(1u64 << n) {
                for y in 0..(1u64 << n) {
                    let r = reward(x, y, n).unwrap();
                    assert_eq!(r + hamming_distance(x, y), n);
                    assert_eq!(r, reward(y, x, n).unwrap());
                }
            }
        }
    }

    #[test]
    fn noiseless_channel_is_identity() {
        let cw = vec![0b01, 0b10, 0b11, 0b00];
        let cfg = ChannelConfig::new(0.0, 3).unwrap();
        assert_eq!(transmit_bsc(&cw, 2, &cfg).unwrap().symbols(), &cw[..]);
    }

    #[test]
    fn transmit_is_deterministic() {
        let cw = vec![0b1011; 50];
        let cfg = ChannelConfig::new(0.2, 99).unwrap();
        assert_eq!(
            transmit_bsc(&cw, 4, &cfg).unwrap(),
            transmit_bsc(&cw, 4, &cfg).unwrap()
        );
    }

    #[test]
    fn flip_rate_matches_crossover() {
        // 10^6 bits; 3 sigma binomial band around p.
        let n = 50;
        let words = 20_000;
        let cw = vec![0; words];
        let cfg = ChannelConfig::new(0.1, 2024).unwrap();
        let y = transmit_bsc(&cw, n, &cfg).unwrap();
        let flips: u64 = y.symbols().iter().map(|w| w.count_ones() as u64).sum();
        let total = (n as usize * words) as f64;
        let rate = flips as f64 / total;
        let sigma = (0.1 * 0.9 / total).sqrt();
        assert!((rate - 0.1).abs() < 3.0 * sigma, "rate {rate}");
    }

    #[test]
    fn half_crossover_is_uniform() {
        let n = 10;
        let words = 10_000;
        let cw: Vec<Word> = (0..words as u64).map(|i| i & 0x3ff).collect();
        let cfg = ChannelConfig::new(0.5, 5).unwrap();
        let y = transmit_bsc(&cw, n, &cfg).unwrap();
        let agree: u64 = cw
            .iter()
            .zip(y.symbols())
            .map(|(a, b)| (n - hamming_distance(*a, *b)) as u64)
            .sum();
        let total = (n as usize * words) as f64;
        let sigma = (0.25 / total).sqrt();
        assert!((agree as f64 / total - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            ChannelConfig::new(0.6, 0),
            Err(ChannelError::BadProbability(0.6))
        );
        let cfg = ChannelConfig::new(0.1, 0).unwrap();
        assert!(transmit_bsc(&[], 2, &cfg).is_err());
        assert!(transmit_bsc(&[0b111], 2, &cfg).is_err());
    }
}
