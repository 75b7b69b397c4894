//! Hierarchical fractal autoencoders: `h` disjoint top-k feature groups
//! trained jointly, each with its own masked reconstruction term, so the
//! model extracts multiple non-overlapping informative subsets in descending
//! order of importance.

use serde::{Deserialize, Serialize};

use crate::error::{FaeError, Result};
use crate::matrix::Matrix;
use crate::model::{
    accumulate_recon_term, add_l1_grad, check_shapes, l1_grad_coeff, l1_value, recon_loss_raw,
    recon_norm_factor, topk_mask_slice, EncoderDecoder, FeatureWeights, Gradients, Hyperparams,
    SelectionResult,
};

/// Hierarchy shape and balancing coefficients: `lambda0` weighs the L1 term,
/// `lambdas[i]` weighs group `i+1`'s reconstruction term. The per-group size
/// `k` and everything else come from [`Hyperparams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyParams {
    pub h: usize,
    pub lambda0: f64,
    pub lambdas: Vec<f64>,
}

impl HierarchyParams {
    /// The three-group defaults: `lambda0 = 0.05`, group weights 1.5, 2, 3.
    pub fn default_h3() -> Self {
        HierarchyParams {
            h: 3,
            lambda0: 0.05,
            lambdas: vec![1.5, 2.0, 3.0],
        }
    }

    /// Single-group hierarchy equivalent to FAE with coefficients
    /// `(lambda1, lambda2)`.
    pub fn from_fae(lambda1: f64, lambda2: f64) -> Self {
        HierarchyParams {
            h: 1,
            lambda0: lambda2,
            lambdas: vec![lambda1],
        }
    }

    pub fn validate(&self, k: usize, m: usize) -> Result<()> {
        if self.h == 0 {
            return Err(FaeError::InvalidArgument("hierarchy needs h >= 1".into()));
        }
        if self.h * k > m {
            return Err(FaeError::InvalidArgument(format!(
                "hierarchy needs h*k <= m, got h={} k={k} m={m}",
                self.h
            )));
        }
        if self.lambdas.len() != self.h {
            return Err(FaeError::InvalidArgument(format!(
                "expected {} group coefficients, got {}",
                self.h,
                self.lambdas.len()
            )));
        }
        if self.lambda0 < 0.0 || self.lambdas.iter().any(|&l| l < 0.0) {
            return Err(FaeError::InvalidArgument(
                "hierarchy coefficients must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `h` pairwise-disjoint selections in descending importance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalSelection {
    pub groups: Vec<SelectionResult>,
}

impl HierarchicalSelection {
    pub fn is_disjoint(&self) -> bool {
        let mut seen = std::collections::BTreeSet::new();
        for g in &self.groups {
            for &i in &g.indices {
                if !seen.insert(i) {
                    return false;
                }
            }
        }
        true
    }

    /// All selected indices, group by group.
    pub fn union_indices(&self) -> Vec<usize> {
        self.groups
            .iter()
            .flat_map(|g| g.indices.iter().cloned())
            .collect()
    }

    /// The union as a single selection (indices keep their group-major,
    /// descending-weight order).
    pub fn union_selection(&self) -> SelectionResult {
        SelectionResult {
            indices: self.union_indices(),
            weights: self
                .groups
                .iter()
                .flat_map(|g| g.weights.iter().cloned())
                .collect(),
        }
    }
}

/// Splits the top `h*k` entries of `w` into `h` disjoint groups: group 1 is
/// the top-k selection, group `i` the top-k after removing groups
/// `1..i-1` from contention.
pub fn hierarchical_masks(
    w: &FeatureWeights,
    k: usize,
    h: usize,
) -> Result<HierarchicalSelection> {
    let m = w.len();
    if h == 0 {
        return Err(FaeError::InvalidArgument("hierarchy needs h >= 1".into()));
    }
    if h * k > m {
        return Err(FaeError::InvalidArgument(format!(
            "hierarchical selection requires h*k <= m, got h={h} k={k} m={m}"
        )));
    }
    // Selected entries drop to -inf rather than 0 so already-taken indices
    // can never tie their way back in; disjointness is exact even when w
    // has many zero entries.
    let mut remaining = w.as_slice().to_vec();
    let mut groups = Vec::with_capacity(h);
    for _ in 0..h {
        let mut sel = topk_mask_slice(&remaining, k)?;
        for (&i, wv) in sel.indices.iter().zip(sel.weights.iter_mut()) {
            remaining[i] = f64::NEG_INFINITY;
            *wv = w.as_slice()[i];
        }
        groups.push(sel);
    }
    Ok(HierarchicalSelection { groups })
}

/// Per-term decomposition of the hierarchical objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HfaeBreakdown {
    pub full_recon: f64,
    pub group_recons: Vec<f64>,
    pub l1: f64,
    pub total: f64,
}

/// Hierarchical objective: full-path reconstruction, one masked
/// reconstruction per group weighted by `lambdas[i]`, plus `lambda0` times
/// the L1 term. Groups are recomputed from the current `w`.
pub fn hfae_objective(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
    hier: &HierarchyParams,
) -> Result<HfaeBreakdown> {
    let sel = hierarchical_masks(w, hp.k, hier.h)?;
    let groups: Vec<Vec<usize>> = sel.groups.into_iter().map(|g| g.indices).collect();
    hfae_objective_frozen(x, w, ed, hp, hier, &groups)
}

/// [`hfae_objective`] with all group masks supplied by the caller.
pub fn hfae_objective_frozen(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
    hier: &HierarchyParams,
    groups: &[Vec<usize>],
) -> Result<HfaeBreakdown> {
    check_shapes("hfae_objective", x, w.as_slice(), ed)?;
    hp.validate(x.cols())?;
    hier.validate(hp.k, x.cols())?;
    if groups.len() != hier.h {
        return Err(FaeError::InvalidArgument(format!(
            "expected {} frozen groups, got {}",
            hier.h,
            groups.len()
        )));
    }
    let nf = recon_norm_factor(hp.loss_norm, x.rows(), x.cols());
    let full_recon = recon_loss_raw(x, w.as_slice(), ed)? * nf;

    let mut group_recons = Vec::with_capacity(hier.h);
    for group in groups {
        let mut w_eff = vec![0.0; w.len()];
        for &i in group {
            w_eff[i] = w.as_slice()[i];
        }
        group_recons.push(recon_loss_raw(x, &w_eff, ed)? * nf);
    }

    let l1 = l1_value(w.as_slice(), hp.l1_mode);
    let total = full_recon
        + hier
            .lambdas
            .iter()
            .zip(&group_recons)
            .map(|(l, r)| l * r)
            .sum::<f64>()
        + hier.lambda0 * l1;
    if !total.is_finite() {
        return Err(FaeError::Numerical(format!(
            "non-finite hierarchical objective {total}"
        )));
    }
    Ok(HfaeBreakdown {
        full_recon,
        group_recons,
        l1,
        total,
    })
}

/// Exact gradients of [`hfae_objective`]: each group term sends gradient
/// only to its own entries of `w`; masks are recomputed from the current
/// `w`.
pub fn hfae_gradients(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
    hier: &HierarchyParams,
) -> Result<Gradients> {
    let sel = hierarchical_masks(w, hp.k, hier.h)?;
    let groups: Vec<Vec<usize>> = sel.groups.into_iter().map(|g| g.indices).collect();
    hfae_gradients_frozen(x, w, ed, hp, hier, &groups)
}

/// [`hfae_gradients`] with all group masks supplied by the caller.
pub fn hfae_gradients_frozen(
    x: &Matrix,
    w: &FeatureWeights,
    ed: &EncoderDecoder,
    hp: &Hyperparams,
    hier: &HierarchyParams,
    groups: &[Vec<usize>],
) -> Result<Gradients> {
    check_shapes("hfae_gradients", x, w.as_slice(), ed)?;
    hp.validate(x.cols())?;
    hier.validate(hp.k, x.cols())?;
    let (n, m) = (x.rows(), x.cols());
    let nf = recon_norm_factor(hp.loss_norm, n, m);
    let mut out = Gradients::zeros(m, ed.latent_dim());

    accumulate_recon_term(x, w.as_slice(), None, ed, nf, &mut out)?;
    for (group, &coeff) in groups.iter().zip(&hier.lambdas) {
        if coeff != 0.0 {
            accumulate_recon_term(x, w.as_slice(), Some(group), ed, coeff * nf, &mut out)?;
        }
    }
    add_l1_grad(
        w.as_slice(),
        hier.lambda0 * l1_grad_coeff(hp.l1_mode, m),
        &mut out.w,
    );
    if !out.is_finite() {
        return Err(FaeError::Numerical("non-finite gradient".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::*;
    use crate::model::{fae_objective, topk_mask};
    use crate::rng::SeededRng;

    #[test]
    fn masks_partition_descending_weights() {
        let w = FeatureWeights::new(vec![5.0, 4.0, 3.0, 2.0, 1.0, 0.0]).unwrap();
        let sel = hierarchical_masks(&w, 2, 2).unwrap();
        assert_eq!(sel.groups[0].indices, vec![0, 1]);
        assert_eq!(sel.groups[1].indices, vec![2, 3]);
        assert!(sel.is_disjoint());
    }

    #[test]
    fn single_group_reduces_to_topk() {
        let mut rng = SeededRng::new(4);
        let w =
            FeatureWeights::new((0..20).map(|_| rng.uniform01()).collect()).unwrap();
        let hier = hierarchical_masks(&w, 5, 1).unwrap();
        let plain = topk_mask(&w, 5).unwrap();
        assert_eq!(hier.groups[0], plain);
    }

    #[test]
    fn groups_match_full_sort_oracle_ranks() {
        let mut rng = SeededRng::new(9);
        let w: Vec<f64> = (0..50).map(|_| rng.uniform01()).collect();
        let fw = FeatureWeights::new(w.clone()).unwrap();
        let sel = hierarchical_masks(&fw, 5, 3).unwrap();

        let mut order: Vec<usize> = (0..50).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]).then(a.cmp(&b)));
        for g in 0..3 {
            let expect: Vec<usize> = order[g * 5..(g + 1) * 5].to_vec();
            let mut got = sel.groups[g].indices.clone();
            let mut want = expect.clone();
            got.sort_unstable();
            want.sort_unstable();
            assert_eq!(got, want, "group {g} differs from sort-oracle ranks");
        }
        assert_eq!(sel.union_indices().len(), 15);
    }

    #[test]
    fn disjoint_even_when_weights_are_all_zero() {
        let w = FeatureWeights::new(vec![0.0; 6]).unwrap();
        let sel = hierarchical_masks(&w, 2, 3).unwrap();
        assert!(sel.is_disjoint());
        let mut union = sel.union_indices();
        union.sort_unstable();
        assert_eq!(union, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn rejects_oversized_hierarchy() {
        let w = FeatureWeights::new(vec![1.0; 6]).unwrap();
        assert!(hierarchical_masks(&w, 3, 3).is_err());
    }

    #[test]
    fn h1_objective_equals_fae() {
        let (x, w, ed) = random_instance(21, 6, 8, 4);
        let mut hp = Hyperparams::new(3);
        hp.d = 4;
        let hier = HierarchyParams::from_fae(hp.lambda1, hp.lambda2);
        let hier_total = hfae_objective(&x, &w, &ed, &hp, &hier).unwrap().total;
        let fae_total = fae_objective(&x, &w, &ed, &hp).unwrap().total;
        assert!((hier_total - fae_total).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_objective_value() {
        let (x, _, ed) = random_instance(22, 5, 6, 3);
        let w0 = FeatureWeights::new(vec![0.0; 6]).unwrap();
        let mut hp = Hyperparams::new(2);
        hp.d = 3;
        let hier = HierarchyParams {
            h: 3,
            lambda0: 0.05,
            lambdas: vec![1.5, 2.0, 3.0],
        };
        let b = hfae_objective(&x, &w0, &ed, &hp, &hier).unwrap();
        let msq = x.frob_sq() / 30.0;
        let expect = (1.0 + 1.5 + 2.0 + 3.0) * msq;
        assert!((b.total - expect).abs() < 1e-12, "{} vs {expect}", b.total);
    }

    #[test]
    fn objective_matches_term_by_term_composition() {
        let (x, w, ed) = random_instance(23, 7, 9, 4);
        let mut hp = Hyperparams::new(2);
        hp.d = 4;
        let hier = HierarchyParams {
            h: 2,
            lambda0: 0.3,
            lambdas: vec![1.2, 0.8],
        };
        let b = hfae_objective(&x, &w, &ed, &hp, &hier).unwrap();

        let sel = hierarchical_masks(&w, 2, 2).unwrap();
        let nf = 1.0 / (7.0 * 9.0);
        let mut expect = recon_loss_raw(&x, w.as_slice(), &ed).unwrap() * nf;
        for (g, &coeff) in sel.groups.iter().zip(&hier.lambdas) {
            let mut w_eff = vec![0.0; 9];
            for &i in &g.indices {
                w_eff[i] = w.as_slice()[i];
            }
            expect += coeff * recon_loss_raw(&x, &w_eff, &ed).unwrap() * nf;
        }
        expect += hier.lambda0 * w.as_slice().iter().sum::<f64>() / 9.0;
        assert!((b.total - expect).abs() < 1e-13);
    }

    #[test]
    fn gradients_match_finite_differences_with_frozen_masks() {
        for seed in 0..3u64 {
            let (n, m, d, k, h) = (5, 9, 3, 2, 3);
            let (x, w, ed) = random_instance(200 + seed, n, m, d);
            let mut hp = Hyperparams::new(k);
            hp.d = d;
            let hier = HierarchyParams {
                h,
                lambda0: 0.05,
                lambdas: vec![1.5, 2.0, 3.0],
            };
            let groups: Vec<Vec<usize>> = hierarchical_masks(&w, k, h)
                .unwrap()
                .groups
                .into_iter()
                .map(|g| g.indices)
                .collect();

            let analytic = hfae_gradients_frozen(&x, &w, &ed, &hp, &hier, &groups).unwrap();
            let mut flat = analytic.w.clone();
            flat.extend_from_slice(analytic.enc.data());
            flat.extend_from_slice(analytic.dec.data());

            let numeric = finite_diff(
                |p| {
                    let (w2, ed2) = unflatten(p, m, d);
                    hfae_objective_frozen(&x, &w2, &ed2, &hp, &hier, &groups)
                        .unwrap()
                        .total
                },
                &flatten(&w, &ed),
                1e-5,
            );
            let err = max_rel_error(&flat, &numeric);
            assert!(err <= 1e-5, "seed {seed}: rel error {err:.3e}");
        }
    }
}
