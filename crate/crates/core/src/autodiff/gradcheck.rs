use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// `(parameter index, flat coordinate)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    /// `(analytic, numeric)` at the worst coordinate.
    pub worst_values: Option<(f64, f64)>,
    /// Largest `|a − n|` over checked coordinates.
    pub max_abs_error: f64,
    pub checked: usize,
    /// Coordinates skipped because the stencil straddles a ReLU kink or
    /// changes a max-pool winner.
    pub excluded: usize,
}

/// Compares the analytic gradient of the scalar built by `f` against
/// central differences `(f(p+h) − f(p−h)) / 2h`, coordinate by coordinate.
///
/// `f` receives a fresh graph and one leaf per entry of `params`; it must
/// be deterministic (rebuild any RNG from a fixed seed inside `f`).
/// Relative error is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(params: &[Tensor], h: f64, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step {h} must be positive")));
    }
    let eval = |ps: &[Tensor]| -> Result<(f64, Graph)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.param(p.clone())).collect();
        let out = f(&mut g, &vars)?;
        if g.value(out).len() != 1 {
            return Err(Error::Shape("grad_check target must be scalar".into()));
        }
        Ok((g.value(out).item(), g))
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|v| g.grad(*v).unwrap().to_vec()).collect();
    let base = g.signature().clone();
    let near_kink: Vec<usize> = base
        .relu_inputs
        .iter()
        .enumerate()
        .filter(|(_, z)| z.abs() < 10.0 * h)
        .map(|(i, _)| i)
        .collect();

    let mut scratch = params.to_vec();
    let mut report = GradCheckReport { max_rel_error: 0.0, worst: None, worst_values: None, max_abs_error: 0.0, checked: 0, excluded: 0 };
    for pi in 0..params.len() {
        for ci in 0..params[pi].len() {
            let orig = params[pi].data()[ci];
            scratch[pi].data_mut()[ci] = orig + h;
            let (fp, gp) = eval(&scratch)?;
            scratch[pi].data_mut()[ci] = orig - h;
            let (fm, gm) = eval(&scratch)?;
            scratch[pi].data_mut()[ci] = orig;

            let (sp, sm) = (gp.signature(), gm.signature());
            let crosses = |s: &super::graph::BranchSignature| {
                s.argmax != base.argmax
                    || s.relu_inputs.len() != base.relu_inputs.len()
                    || s.relu_inputs.iter().zip(&base.relu_inputs).any(|(a, b)| (*a > 0.0) != (*b > 0.0))
                    || near_kink.iter().any(|&i| s.relu_inputs[i] != base.relu_inputs[i])
            };
            if crosses(sp) || crosses(sm) {
                report.excluded += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[pi][ci];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((pi, ci));
                report.worst_values = Some((a, numeric));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let p = vec![Tensor::vector(vec![0.3, -1.2, 2.5]), Tensor::vector(vec![4.0])];
        let r = grad_check(&p, 1e-6, |g, v| g.l2_penalty(v, 1.0)).unwrap();
        assert!(r.max_rel_error <= 1e-9, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn relu_kink_is_excluded() {
        // relu(x·1 + 0) with x exactly at the kink
        let p = vec![Tensor::vector(vec![0.0, 1.0])];
        let r = grad_check(&p, 1e-6, |g, v| {
            let w = g.input(Tensor::new(vec![2, 1], vec![1.0, 0.0]).unwrap());
            let b = g.input(Tensor::vector(vec![0.0]));
            let y = g.dense(v[0], w, b, true)?;
            g.l2_penalty(&[y], 1.0)
        })
        .unwrap();
        assert_eq!(r.excluded, 1);
        assert_eq!(r.checked, 1);
    }
}
