use crate::error::{Error, Result};

/// Returned by [`psnr`] for identical images.
pub const PSNR_IDENTICAL: f64 = 200.0;

/// Peak signal-to-noise ratio in dB for unit peak: `10 log₁₀(1 / MSE)`.
pub fn psnr(x: &[f64], reference: &[f64]) -> Result<f64> {
    if x.len() != reference.len() || x.is_empty() {
        return Err(Error::shape(format!(
            "psnr needs equal nonempty images, got {} and {} pixels",
            x.len(),
            reference.len()
        )));
    }
    let mse = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_IDENTICAL);
    }
    Ok((-10.0 * mse.log10()).min(PSNR_IDENTICAL))
}
