use super::{rk4, stable_dt, FlowConfig};
use crate::error::{LabError, Result};
use crate::grid_tensor::{sup_norm, MetricField};

/// Initial differences below this are treated as zero.
const ZERO_DIFFERENCE: f64 = 1e-14;

/// Evolves two metrics with a shared step sequence and returns
/// `(‖g¹_0 - g²_0‖, sup_t ‖g¹_t - g²_t‖)` in the sup norm, sampled every step.
pub fn lockstep_difference(g1: &MetricField, g2: &MetricField, cfg: &FlowConfig) -> Result<(f64, f64)> {
    cfg.validate()?;
    g1.grid().check_same(g2.grid())?;
    super::check_initial(g1, cfg)?;
    super::check_initial(g2, cfg)?;
    let initial = sup_norm(&g1.tensor().sub(g2.tensor())?);
    let (mut a, mut b) = (g1.clone(), g2.clone());
    let mut worst = initial;
    let mut t = 0.0;
    while cfg.t_end - t > 1e-14 {
        let limit = stable_dt(&a, cfg.cfl_fraction).min(stable_dt(&b, cfg.cfl_fraction));
        let nominal = match cfg.fixed_dt {
            Some(dt) if dt > limit * (1.0 + 1e-12) => return Err(LabError::Cfl { dt, limit }),
            Some(dt) => dt,
            None => limit,
        };
        let count = ((cfg.t_end - t) / nominal - 1e-9).ceil().max(1.0);
        let dt = (cfg.t_end - t) / count;
        let (na, nb) = rayon::join(|| rk4(&a, dt), || rk4(&b, dt));
        a = na?.0;
        b = nb?.0;
        t = if count <= 1.0 { cfg.t_end } else { t + dt };
        worst = worst.max(sup_norm(&a.tensor().sub(b.tensor())?));
    }
    Ok((initial, worst))
}

/// Empirical ratio `sup_t ‖g¹_t - g²_t‖ / ‖g¹_0 - g²_0‖`; zero when the
/// initial metrics coincide.
pub fn continuous_dependence_harness(g1: &MetricField, g2: &MetricField, cfg: &FlowConfig) -> Result<f64> {
    let (initial, worst) = lockstep_difference(g1, g2, cfg)?;
    if initial < ZERO_DIFFERENCE {
        return Ok(0.0);
    }
    Ok(worst / initial)
}
