//! Forward and reverse passes shared by the plain network, the three
//! dropout variants, the estimator's ascent and training.
//!
//! Layer `j` reads `eff_j = Psi_j ⊙ unit_mask_j` and computes
//! `z_u = sum_t (w_u[t] * weight_mask_u[t]) * eff_j[t]`. Absent masks skip
//! the multiplication; since multiplying by 1.0 is exact, an all-ones
//! bundle reproduces the unmasked pass bit for bit.

use crate::masks::MaskBundle;
use crate::net::{Activation, NetworkSpec, WeightAssignment};

pub(crate) struct Propagator {
    activation: Activation,
    psi: Vec<Vec<f64>>,
    eff: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    dz: Vec<Vec<f64>>,
    deff: Vec<f64>,
}

impl Propagator {
    pub(crate) fn new(spec: &NetworkSpec) -> Self {
        let k = spec.depth();
        let psi: Vec<Vec<f64>> = (0..=k).map(|j| vec![0.0; spec.layer_input_len(j)]).collect();
        let widest = psi.iter().map(Vec::len).max().unwrap_or(0);
        Propagator {
            activation: spec.activation,
            eff: psi.clone(),
            pre: spec.widths.iter().map(|&m| vec![0.0; m]).collect(),
            dz: (0..=k).map(|j| vec![0.0; spec.layer_vector_count(j)]).collect(),
            deff: vec![0.0; widest],
            psi,
        }
    }

    /// Output of the (optionally masked) network. Shapes are the caller's
    /// responsibility.
    pub(crate) fn forward(
        &mut self,
        spec: &NetworkSpec,
        w: &WeightAssignment,
        x: &[f64],
        masks: Option<&MaskBundle>,
    ) -> f64 {
        let k = spec.depth();
        let layout = w.layout();
        let weights = w.as_slice();
        self.psi[0].copy_from_slice(x);
        let mut out = 0.0;
        for j in 0..=k {
            let eff = &mut self.eff[j];
            match masks.and_then(|m| m.unit_mask(j)) {
                Some(um) => {
                    for ((e, &p), &r) in eff.iter_mut().zip(&self.psi[j]).zip(um) {
                        *e = p * f64::from(r);
                    }
                }
                None => eff.copy_from_slice(&self.psi[j]),
            }
            let eff = &self.eff[j];
            for u in 0..layout.layer(j).count {
                let wv = &weights[layout.range(j, u)];
                let z = match masks.and_then(|m| m.weight_mask(j, u)) {
                    Some(wm) => wv
                        .iter()
                        .zip(wm)
                        .zip(eff)
                        .map(|((&a, &r), &e)| (a * f64::from(r)) * e)
                        .sum::<f64>(),
                    None => wv.iter().zip(eff).map(|(&a, &e)| a * e).sum::<f64>(),
                };
                if j < k {
                    self.pre[j][u] = z;
                } else {
                    out = z;
                }
            }
            if j < k {
                let act = self.activation;
                for (p, &z) in self.psi[j + 1].iter_mut().zip(&self.pre[j]) {
                    *p = act.eval(z);
                }
            }
        }
        out
    }

    /// Adds `scale * d(output)/dw` for the example last passed to
    /// [`Propagator::forward`] into `grad` (flat, same layout as `w`).
    pub(crate) fn backward(
        &mut self,
        spec: &NetworkSpec,
        w: &WeightAssignment,
        masks: Option<&MaskBundle>,
        scale: f64,
        grad: &mut [f64],
    ) {
        let k = spec.depth();
        let layout = w.layout();
        let weights = w.as_slice();
        self.dz[k][0] = scale;
        for j in (0..=k).rev() {
            let len = layout.layer(j).len;
            let deff = &mut self.deff[..len];
            if j > 0 {
                deff.iter_mut().for_each(|d| *d = 0.0);
            }
            let eff = &self.eff[j];
            for u in 0..layout.layer(j).count {
                let g = self.dz[j][u];
                if g == 0.0 {
                    continue;
                }
                let range = layout.range(j, u);
                let wv = &weights[range.clone()];
                let gv = &mut grad[range];
                match masks.and_then(|m| m.weight_mask(j, u)) {
                    Some(wm) => {
                        for t in 0..len {
                            let r = f64::from(wm[t]);
                            gv[t] += g * r * eff[t];
                            if j > 0 {
                                deff[t] += g * wv[t] * r;
                            }
                        }
                    }
                    None => {
                        for t in 0..len {
                            gv[t] += g * eff[t];
                            if j > 0 {
                                deff[t] += g * wv[t];
                            }
                        }
                    }
                }
            }
            if j > 0 {
                let um = masks.and_then(|m| m.unit_mask(j));
                let act = self.activation;
                let pre = &self.pre[j - 1];
                let dz = &mut self.dz[j - 1];
                for t in 0..len {
                    let r = um.map_or(1.0, |m| f64::from(m[t]));
                    dz[t] = deff[t] * r * act.derivative(pre[t]);
                }
            }
        }
    }
}

impl Propagator {
    /// Smallest `|z|` over hidden pre-activations that actually depend on
    /// an unmasked weight, for the example last passed to `forward`.
    pub(crate) fn live_preactivation_margin(
        &self,
        spec: &NetworkSpec,
        w: &WeightAssignment,
        masks: Option<&MaskBundle>,
    ) -> f64 {
        let layout = w.layout();
        let mut margin = f64::INFINITY;
        for j in 0..spec.depth() {
            let eff = &self.eff[j];
            for u in 0..layout.layer(j).count {
                let wm = masks.and_then(|m| m.weight_mask(j, u));
                let live = eff
                    .iter()
                    .enumerate()
                    .any(|(t, &e)| e != 0.0 && wm.is_none_or(|m| m[t] == 1));
                if live {
                    margin = margin.min(self.pre[j][u].abs());
                }
            }
        }
        margin
    }
}
