use std::fmt;

use crate::error::Result;
use crate::train::params::{Gradients, HasParams, ParamId};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Worst coordinate found by [`grad_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct Offender {
    pub param: String,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<Offender>,
    pub checked: usize,
    /// Max relative error per parameter name, in store order.
    pub per_param: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error < tol
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "checked {} scalars, max relative error {:.3e}",
            self.checked, self.max_rel_error
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                " at {}[{},{}] (analytic {:.6e}, numeric {:.6e})",
                w.param, w.row, w.col, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare the analytic gradient produced by `loss_and_grad` against central
/// differences for every trainable, non-frozen scalar.
///
/// `loss_and_grad` must return the loss and accumulate its gradient into the
/// supplied accumulator.
pub fn grad_check<M, F>(model: &mut M, eps: f64, loss_and_grad: F) -> Result<GradCheckReport>
where
    M: HasParams,
    F: Fn(&M, &mut Gradients) -> Result<f64>,
{
    let mut analytic = Gradients::zeros_for(model.params());
    loss_and_grad(model, &mut analytic)?;
    let mut scratch = Gradients::zeros_for(model.params());

    let ids: Vec<ParamId> = model.params().ids().collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        per_param: Vec::new(),
    };
    for id in ids {
        let Some(g) = analytic.get(id) else { continue };
        let g = g.clone();
        let param = model.params().param(id);
        let name = param.name().to_string();
        let frozen = param.frozen_rows().to_vec();
        let (rows, cols) = g.shape();
        let mut param_max = 0.0f64;
        for r in 0..rows {
            if frozen.contains(&r) {
                continue;
            }
            for c in 0..cols {
                let orig = model.params().get(id).get(r, c);
                model.params_mut().get_mut(id).set(r, c, orig + eps);
                let plus = loss_and_grad(model, &mut scratch)?;
                model.params_mut().get_mut(id).set(r, c, orig - eps);
                let minus = loss_and_grad(model, &mut scratch)?;
                model.params_mut().get_mut(id).set(r, c, orig);
                scratch.zero();

                let numeric = (plus - minus) / (2.0 * eps);
                let a = g.get(r, c);
                let err = relative_error(a, numeric);
                report.checked += 1;
                param_max = param_max.max(err);
                if err > report.max_rel_error || report.worst.is_none() {
                    report.max_rel_error = report.max_rel_error.max(err);
                    report.worst = Some(Offender {
                        param: name.clone(),
                        row: r,
                        col: c,
                        analytic: a,
                        numeric,
                    });
                }
            }
        }
        report.per_param.push((name, param_max));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::dot;
    use crate::train::params::{Init, InitScheme, ParamStore};

    /// y = w·x with squared loss against a fixed target.
    struct Linear {
        store: ParamStore,
        w: ParamId,
    }

    impl HasParams for Linear {
        fn params(&self) -> &ParamStore {
            &self.store
        }
        fn params_mut(&mut self) -> &mut ParamStore {
            &mut self.store
        }
    }

    fn linear() -> Linear {
        let mut store = ParamStore::new();
        let w = store.add("w", 3, 1, Init::Weight);
        store.init(InitScheme::GlorotUniform, 3);
        Linear { store, w }
    }

    const X: [f64; 3] = [0.5, -1.5, 2.0];
    const Y: f64 = 0.7;

    fn loss_grad(m: &Linear, g: &mut Gradients, factor: f64) -> Result<f64> {
        let pred = dot(m.store.get(m.w).as_slice(), &X);
        let r = pred - Y;
        let grad: Vec<f64> = X.iter().map(|x| factor * 2.0 * r * x).collect();
        g.add_vec(m.w, &grad)?;
        Ok(r * r)
    }

    #[test]
    fn linear_model_exact() {
        let mut m = linear();
        let report = grad_check(&mut m, DEFAULT_EPS, |m, g| loss_grad(m, g, 1.0)).unwrap();
        assert_eq!(report.checked, 3);
        assert!(report.max_rel_error < 1e-9, "{report}");
    }

    #[test]
    fn corrupted_gradient_detected() {
        let mut m = linear();
        let report = grad_check(&mut m, DEFAULT_EPS, |m, g| loss_grad(m, g, 2.0)).unwrap();
        assert!(report.max_rel_error > 0.3, "{report}");
        assert_eq!(report.worst.unwrap().param, "w");
    }

    #[test]
    fn parameters_restored_after_check() {
        let mut m = linear();
        let before = m.store.get(m.w).clone();
        grad_check(&mut m, DEFAULT_EPS, |m, g| loss_grad(m, g, 1.0)).unwrap();
        assert_eq!(m.store.get(m.w), &before);
    }
}
