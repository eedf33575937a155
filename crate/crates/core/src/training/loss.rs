//! Negative log-likelihood over the answer distribution.

use super::TrainError;

/// Floor inside the logarithm; keeps early linear-start batches finite when
/// the answer softmax saturates.
pub const LOSS_EPS: f64 = 1e-12;

pub fn cross_entropy_loss(distribution: &[f64], gold: usize) -> Result<f64, TrainError> {
    if gold >= distribution.len() {
        return Err(TrainError::GoldIndexOutOfRange {
            gold,
            answer_size: distribution.len(),
        });
    }
    Ok(-(distribution[gold] + LOSS_EPS).ln())
}
