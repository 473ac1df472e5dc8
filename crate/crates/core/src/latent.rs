//! The certified latent distribution: a standard normal truncated to a
//! disjoint union of boxes, represented as a mixture of per-box truncated
//! normals.
//!
//! All masses are kept in log space. Sampling selects a box by its
//! normalized Gaussian mass and draws each coordinate by inverse-CDF
//! within the box edges, so no rejection loop is needed and every draw
//! lands inside the union by construction.

use serde::{Deserialize, Serialize};

use crate::certifier::CertifiedLatent;
use crate::error::{Error, Result};
use crate::rng::{uniform_open01, Rng};
use crate::special::{
    inverse_normal_cdf, normal_cdf, normal_interval_log_mass, normal_logpdf, normal_sf,
};
use crate::verifier::Hyperbox;

/// Log probability of a box under the standard normal:
/// `sum_j ln P(l_j < Z < u_j)`.
///
/// Degenerate boxes (some `l_j == u_j`) carry zero mass and return
/// negative infinity.
pub fn box_log_prob(boxed: &Hyperbox) -> f64 {
    boxed
        .lower()
        .iter()
        .zip(boxed.upper())
        .map(|(l, u)| normal_interval_log_mass(*l, *u))
        .sum()
}

/// Mixture of truncated standard normals over disjoint boxes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncatedMixture {
    boxes: Vec<Hyperbox>,
    /// log p(B_i) per box.
    log_masses: Vec<f64>,
    /// log p(B) = log sum_i p(B_i).
    log_total: f64,
    dim: usize,
}

impl TruncatedMixture {
    /// Assemble from certified regions. Fails on an empty set.
    pub fn from_certified(certified: &CertifiedLatent) -> Result<Self> {
        if certified.is_empty() {
            return Err(Error::EmptyCertifiedSet);
        }
        Self::from_boxes(
            certified
                .regions
                .iter()
                .map(|r| r.boxed.clone())
                .collect(),
        )
    }

    /// Assemble from raw disjoint boxes.
    pub fn from_boxes(boxes: Vec<Hyperbox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::EmptyCertifiedSet);
        }
        let dim = boxes[0].dim();
        for (i, a) in boxes.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::InvalidBox("mixed box dimensions".into()));
            }
            for b in boxes.iter().skip(i + 1) {
                if !a.disjoint(b) {
                    return Err(Error::InvalidBox(
                        "mixture boxes must be pairwise disjoint".into(),
                    ));
                }
            }
        }
        let log_masses: Vec<f64> = boxes.iter().map(box_log_prob).collect();
        let m = log_masses
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if m == f64::NEG_INFINITY {
            return Err(Error::InvalidBox(
                "every box is degenerate (zero mass)".into(),
            ));
        }
        let log_total = m + log_masses
            .iter()
            .map(|v| (v - m).exp())
            .sum::<f64>()
            .ln();
        Ok(TruncatedMixture {
            boxes,
            log_masses,
            log_total,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boxes(&self) -> &[Hyperbox] {
        &self.boxes
    }

    /// log p(B): total mass of the union under the standard normal.
    pub fn log_total_mass(&self) -> f64 {
        self.log_total
    }

    /// Normalized mixture weights `p(B_i) / p(B)`.
    pub fn weights(&self) -> Vec<f64> {
        self.log_masses
            .iter()
            .map(|m| (m - self.log_total).exp())
            .collect()
    }

    /// Index of the box containing `z`, if any (disjointness makes it
    /// unique).
    pub fn containing_box(&self, z: &[f64]) -> Option<usize> {
        self.boxes.iter().position(|b| b.contains(z))
    }

    /// Draw one latent vector: a categorical box choice by weight, then
    /// per-dimension inverse-CDF sampling within the box.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let weights = self.weights();
        let mut u = uniform_open01(rng);
        let mut idx = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                idx = i;
                break;
            }
            u -= w;
        }
        let boxed = &self.boxes[idx];
        let mut z = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let (l, ub) = (boxed.lower()[j], boxed.upper()[j]);
            let draw = sample_truncated_standard_normal(l, ub, uniform_open01(rng));
            // inverse-CDF construction keeps draws inside; clamp guards the
            // last-ulp rounding of the quantile
            z.push(draw.clamp(l, ub));
        }
        z
    }

    /// Log density of the truncated mixture at `z`: the standard normal
    /// log density minus `log p(B)` inside the union, negative infinity
    /// outside.
    pub fn log_density(&self, z: &[f64]) -> f64 {
        match self.containing_box(z) {
            None => f64::NEG_INFINITY,
            Some(_) => z.iter().map(|v| normal_logpdf(*v)).sum::<f64>() - self.log_total,
        }
    }

    /// Log density computed by the mixture formula (per-box weight times
    /// per-dimension truncated densities). Equal to [`Self::log_density`]
    /// because the boxes are disjoint; kept for cross-checking.
    pub fn log_density_mixture_form(&self, z: &[f64]) -> f64 {
        match self.containing_box(z) {
            None => f64::NEG_INFINITY,
            Some(i) => {
                let boxed = &self.boxes[i];
                let weight = self.log_masses[i] - self.log_total;
                let per_dim: f64 = z
                    .iter()
                    .enumerate()
                    .map(|(j, v)| {
                        normal_logpdf(*v)
                            - normal_interval_log_mass(boxed.lower()[j], boxed.upper()[j])
                    })
                    .sum();
                weight + per_dim
            }
        }
    }
}

/// Inverse-CDF draw from the standard normal truncated to `[l, u]`,
/// parameterized by a uniform `u01` in (0, 1).
///
/// Both endpoints in one tail are handled through the survival function so
/// far-tail boxes keep full relative precision.
pub fn sample_truncated_standard_normal(l: f64, u: f64, u01: f64) -> f64 {
    debug_assert!(l <= u);
    if l == u {
        return l;
    }
    if l >= 0.0 {
        // work in the upper tail: survival decreases from q_l to q_u
        let ql = normal_sf(l);
        let qu = normal_sf(u);
        let q = ql + u01 * (qu - ql);
        -inverse_normal_cdf(q.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    } else if u <= 0.0 {
        -sample_truncated_standard_normal(-u, -l, 1.0 - u01)
    } else {
        let pl = normal_cdf(l);
        let pu = normal_cdf(u);
        let p = pl + u01 * (pu - pl);
        inverse_normal_cdf(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::special::normal_cdf;

    fn boxed(l: &[f64], u: &[f64]) -> Hyperbox {
        Hyperbox::new(l.to_vec(), u.to_vec()).unwrap()
    }

    #[test]
    fn box_log_prob_examples() {
        // the full line (to +-38 sigma) carries all the mass
        let full = boxed(&[-38.0; 3], &[38.0; 3]);
        assert!(box_log_prob(&full).abs() < 1e-12);
        // half line
        let half = boxed(&[0.0], &[38.0]);
        assert!((box_log_prob(&half).exp() - 0.5).abs() < 1e-12);
        // central interval, against the quadrature-checked mass
        let one = boxed(&[-1.0], &[1.0]);
        assert!((one.volume() - 2.0).abs() < 1e-12);
        assert!((box_log_prob(&one).exp() - 0.682_689_492_137_085_9).abs() < 1e-9);
        // degenerate dimension
        let degenerate = boxed(&[0.5, 0.0], &[0.5, 1.0]);
        assert_eq!(box_log_prob(&degenerate), f64::NEG_INFINITY);
    }

    #[test]
    fn single_region_weight_is_one() {
        let m = TruncatedMixture::from_boxes(vec![boxed(&[0.2], &[0.9])]).unwrap();
        assert_eq!(m.weights(), vec![1.0]);
    }

    #[test]
    fn symmetric_regions_split_evenly() {
        let m =
            TruncatedMixture::from_boxes(vec![boxed(&[-2.0], &[-1.0]), boxed(&[1.0], &[2.0])])
                .unwrap();
        let w = m.weights();
        assert!((w[0] - 0.5).abs() < 1e-14);
        assert!((w[1] - 0.5).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjacent_region_weight_ratio_matches_cdf() {
        let m = TruncatedMixture::from_boxes(vec![boxed(&[0.0], &[1.0]), boxed(&[1.0 + 1e-12], &[2.0])])
            .unwrap();
        let w = m.weights();
        let want = (normal_cdf(1.0) - normal_cdf(0.0)) / (normal_cdf(2.0) - normal_cdf(1.0 + 1e-12));
        assert!(((w[0] / w[1]) - want).abs() < 1e-9);
    }

    #[test]
    fn overlapping_boxes_rejected() {
        assert!(matches!(
            TruncatedMixture::from_boxes(vec![boxed(&[0.0], &[1.0]), boxed(&[0.5], &[2.0])]),
            Err(Error::InvalidBox(_))
        ));
    }

    #[test]
    fn empty_certified_set_is_refused() {
        let empty = CertifiedLatent {
            regions: vec![],
            log_p_b: f64::NEG_INFINITY,
            condition: vec![],
            latent_dim: 1,
        };
        assert!(matches!(
            TruncatedMixture::from_certified(&empty),
            Err(Error::EmptyCertifiedSet)
        ));
    }

    #[test]
    fn half_normal_sample_mean() {
        // truncation to [0, 38]: mean sqrt(2/pi), sd sqrt(1 - 2/pi)
        let m = TruncatedMixture::from_boxes(vec![boxed(&[0.0], &[38.0])]).unwrap();
        let mut r = rng::master(31);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z = m.sample(&mut r);
            assert!(z[0] >= 0.0);
            sum += z[0];
        }
        let mean = sum / n as f64;
        let want = (2.0 / std::f64::consts::PI).sqrt();
        let sd = (1.0 - 2.0 / std::f64::consts::PI).sqrt();
        let tol = 3.0 * sd / (n as f64).sqrt();
        assert!((mean - want).abs() < tol, "mean {mean} vs {want} +- {tol}");
    }

    #[test]
    fn every_sample_lands_in_the_union() {
        let m = TruncatedMixture::from_boxes(vec![
            boxed(&[-2.0, -1.0], &[-1.0, 0.5]),
            boxed(&[1.0, 1.0], &[2.0, 3.0]),
        ])
        .unwrap();
        let mut r = rng::master(32);
        for _ in 0..100_000 {
            let z = m.sample(&mut r);
            assert!(m.containing_box(&z).is_some(), "escaped: {z:?}");
        }
    }

    #[test]
    fn region_selection_frequency_matches_weights() {
        let m =
            TruncatedMixture::from_boxes(vec![boxed(&[-2.0], &[-1.0]), boxed(&[1.0], &[2.0])])
                .unwrap();
        let mut r = rng::master(33);
        let n = 100_000;
        let mut first = 0usize;
        for _ in 0..n {
            if m.sample(&mut r)[0] < 0.0 {
                first += 1;
            }
        }
        let freq = first as f64 / n as f64;
        let sigma = (0.5 * 0.5 / n as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * sigma, "frequency {freq}");
    }

    #[test]
    fn log_density_examples() {
        let m = TruncatedMixture::from_boxes(vec![boxed(&[-38.0], &[38.0])]).unwrap();
        // p(B) = 1: density equals the standard normal
        for z in [-2.0, -0.5, 0.0, 1.7] {
            assert!((m.log_density(&[z]) - normal_logpdf(z)).abs() < 1e-9);
        }
        let m2 = TruncatedMixture::from_boxes(vec![boxed(&[0.0], &[1.0])]).unwrap();
        assert_eq!(m2.log_density(&[2.0]), f64::NEG_INFINITY);
        assert_eq!(m2.log_density(&[-0.1]), f64::NEG_INFINITY);
    }

    #[test]
    fn likelihood_ratios_are_preserved() {
        // inside the union, density differences equal base-measure
        // differences exactly
        let m = TruncatedMixture::from_boxes(vec![
            boxed(&[-2.0, -2.0], &[-1.0, 2.0]),
            boxed(&[0.5, -1.0], &[2.5, 1.0]),
        ])
        .unwrap();
        let mut r = rng::master(34);
        let mut pairs = 0;
        while pairs < 1000 {
            let z1 = m.sample(&mut r);
            let z2 = m.sample(&mut r);
            let lhs = m.log_density(&z1) - m.log_density(&z2);
            let rhs: f64 = z1.iter().map(|v| normal_logpdf(*v)).sum::<f64>()
                - z2.iter().map(|v| normal_logpdf(*v)).sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-12, "ratio violated: {lhs} vs {rhs}");
            pairs += 1;
        }
    }

    #[test]
    fn mixture_form_density_agrees_with_restriction_form() {
        let m = TruncatedMixture::from_boxes(vec![
            boxed(&[-1.5, 0.0], &[-0.5, 1.0]),
            boxed(&[0.0, -2.0], &[1.0, -1.0]),
        ])
        .unwrap();
        let mut r = rng::master(35);
        for _ in 0..2000 {
            let z = m.sample(&mut r);
            let a = m.log_density(&z);
            let b = m.log_density_mixture_form(&z);
            assert!((a - b).abs() < 1e-10, "{a} vs {b} at {z:?}");
        }
    }

    #[test]
    fn normalization_by_monte_carlo() {
        // integral of exp(log_density) over an enclosing box is 1
        let m = TruncatedMixture::from_boxes(vec![
            boxed(&[-1.0], &[0.0]),
            boxed(&[0.5], &[1.5]),
        ])
        .unwrap();
        let mut r = rng::master(36);
        let outer = boxed(&[-2.0], &[2.0]);
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z = outer.sample_uniform(&mut r);
            let d = m.log_density(&z);
            if d > f64::NEG_INFINITY {
                acc += d.exp();
            }
        }
        let integral = acc * outer.volume() / n as f64;
        assert!((integral - 1.0).abs() < 0.02, "integral {integral}");

        // 2-dim variant
        let m2 = TruncatedMixture::from_boxes(vec![
            boxed(&[-1.0, -1.0], &[0.0, 0.5]),
            boxed(&[0.5, -0.5], &[1.5, 0.5]),
        ])
        .unwrap();
        let outer2 = boxed(&[-2.0, -2.0], &[2.0, 2.0]);
        let mut acc2 = 0.0;
        for _ in 0..n {
            let z = outer2.sample_uniform(&mut r);
            let d = m2.log_density(&z);
            if d > f64::NEG_INFINITY {
                acc2 += d.exp();
            }
        }
        let integral2 = acc2 * outer2.volume() / n as f64;
        assert!((integral2 - 1.0).abs() < 0.05, "integral {integral2}");
    }

    #[test]
    fn sampler_histogram_matches_density() {
        // chi-square goodness of fit at the 0.001 level: 20 bins over the
        // two boxes, expected counts from the per-bin truncated mass
        let b1 = (-1.5, -0.5);
        let b2 = (0.5, 2.0);
        let m = TruncatedMixture::from_boxes(vec![
            boxed(&[b1.0], &[b1.1]),
            boxed(&[b2.0], &[b2.1]),
        ])
        .unwrap();
        let bins_per_box = 10;
        let mut edges: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in [b1, b2] {
            let w = (hi - lo) / bins_per_box as f64;
            for i in 0..bins_per_box {
                edges.push((lo + i as f64 * w, lo + (i + 1) as f64 * w));
            }
        }
        let n = 100_000;
        let mut counts = vec![0usize; edges.len()];
        let mut r = rng::master(37);
        for _ in 0..n {
            let z = m.sample(&mut r)[0];
            let idx = edges
                .iter()
                .position(|(lo, hi)| z >= *lo && z < *hi)
                .unwrap_or(edges.len() - 1);
            counts[idx] += 1;
        }
        let mut chi2 = 0.0;
        for ((lo, hi), count) in edges.iter().zip(&counts) {
            let expected =
                n as f64 * (normal_interval_log_mass(*lo, *hi) - m.log_total_mass()).exp();
            assert!(expected > 20.0, "bin too thin for the test");
            chi2 += (*count as f64 - expected).powi(2) / expected;
        }
        // chi-square critical value, 19 dof at 0.001
        assert!(chi2 < 43.82, "chi2 {chi2}");
    }

    #[test]
    fn far_tail_box_samples_inside() {
        let m = TruncatedMixture::from_boxes(vec![boxed(&[8.0], &[9.0])]).unwrap();
        let mut r = rng::master(38);
        for _ in 0..10_000 {
            let z = m.sample(&mut r)[0];
            assert!((8.0..=9.0).contains(&z), "tail escape: {z}");
        }
    }

    #[test]
    fn mixture_json_round_trip() {
        let m = TruncatedMixture::from_boxes(vec![boxed(&[0.0], &[1.0])]).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: TruncatedMixture = serde_json::from_str(&text).unwrap();
        assert_eq!(m.log_total_mass(), back.log_total_mass());
    }
}
