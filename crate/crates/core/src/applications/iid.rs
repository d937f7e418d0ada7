use crate::error::{Error, Result};
use crate::model::{BaseVariable, LocalStatisticModel, Summand};

/// Standardized i.i.d. sum `W = sum_i (X_i - mu) / (sd sqrt(n))`.
#[derive(Debug, Clone)]
pub struct IidModel {
    pub model: LocalStatisticModel,
    /// Standard deviation of one base variable; 1 when no rescaling was needed.
    pub base_sd: f64,
}

pub fn iid_model(n: usize, base: BaseVariable) -> Result<IidModel> {
    if n == 0 {
        return Err(Error::InvalidModel("n must be positive".into()));
    }
    base.validate()?;
    let var = base.variance();
    if !(var > 0.0) {
        return Err(Error::InvalidModel("base variable is degenerate (zero variance)".into()));
    }
    let base_sd = var.sqrt();
    let model = LocalStatisticModel::new(vec![base; n], (0..n).map(|i| vec![i]).collect(), Summand::CenteredIdentity)?
        .with_scale(base_sd * (n as f64).sqrt())?;
    Ok(IidModel { model, base_sd })
}
