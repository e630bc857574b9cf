//! Linear combiners and the equalize → rescale → detect chain.
//!
//! Conventional kinds (MRC, ZF, MMSE) ignore the quantizer. AQNM-MMSE and
//! WFQ use the additive quantization noise approximation. The Bussgang kinds
//! (BMRC, BZF, BMMSE) are built from the effective channel `A = F·H` and the
//! effective noise covariance `Σ_n`.

use std::cell::OnceCell;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bussgang::{
    aqnm_parameters_from, bussgang_gain, effective_noise_covariance_from, received_covariance,
    QuantizedStatistics,
};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_solve, hermitian_solve_strict, norm2, ComplexMatrix, ComplexVector};
use crate::signal::Constellation;

/// Equalization denominators smaller than this are rejected.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReceiverKind {
    #[serde(rename = "mrc")]
    Mrc,
    #[serde(rename = "zf")]
    Zf,
    #[serde(rename = "mmse")]
    Mmse,
    #[serde(rename = "aqnm-mmse")]
    AqnmMmse,
    #[serde(rename = "wfq")]
    Wfq,
    #[serde(rename = "bmrc")]
    Bmrc,
    #[serde(rename = "bzf")]
    Bzf,
    #[serde(rename = "bmmse")]
    Bmmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 8] = [
        ReceiverKind::Mrc,
        ReceiverKind::Zf,
        ReceiverKind::Mmse,
        ReceiverKind::AqnmMmse,
        ReceiverKind::Wfq,
        ReceiverKind::Bmrc,
        ReceiverKind::Bzf,
        ReceiverKind::Bmmse,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ReceiverKind::Mrc => "mrc",
            ReceiverKind::Zf => "zf",
            ReceiverKind::Mmse => "mmse",
            ReceiverKind::AqnmMmse => "aqnm-mmse",
            ReceiverKind::Wfq => "wfq",
            ReceiverKind::Bmrc => "bmrc",
            ReceiverKind::Bzf => "bzf",
            ReceiverKind::Bmmse => "bmmse",
        }
    }

    /// Whether the kind is built on the Bussgang effective channel.
    pub fn is_bussgang(self) -> bool {
        matches!(self, ReceiverKind::Bmrc | ReceiverKind::Bzf | ReceiverKind::Bmmse)
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ReceiverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let token = s.trim().to_ascii_lowercase().replace('_', "-");
        ReceiverKind::ALL
            .into_iter()
            .find(|k| k.token() == token)
            .ok_or_else(|| Error::Usage(format!("unknown receiver `{s}`")))
    }
}

/// A built receiver: `W` is `K × N` and `denominators[k] = (W·G)_kk` where
/// `G` is `H` for conventional kinds and `A` for Bussgang kinds.
#[derive(Debug, Clone)]
pub struct Combiner {
    pub kind: ReceiverKind,
    pub w: ComplexMatrix,
    pub denominators: ComplexVector,
}

impl Combiner {
    fn new(kind: ReceiverKind, w: ComplexMatrix, reference: &ComplexMatrix) -> Result<Self> {
        let denominators = diag_of_product(&w, reference);
        check_denominators(&denominators)?;
        Ok(Self {
            kind,
            w,
            denominators,
        })
    }

    /// The same receiver with `W` multiplied by `c` and denominators
    /// recomputed against `reference`.
    pub fn scaled(&self, c: f64, reference: &ComplexMatrix) -> Result<Self> {
        Self::new(self.kind, self.w.scale(c), reference)
    }
}

/// `(W·G)_kk` using the plain (non-conjugated) product `w_kᵀ g_k`.
fn diag_of_product(w: &ComplexMatrix, g: &ComplexMatrix) -> ComplexVector {
    (0..w.rows())
        .map(|k| w.row(k).iter().enumerate().map(|(i, &wi)| wi * g[(i, k)]).sum())
        .collect()
}

fn check_denominators(d: &[Complex64]) -> Result<()> {
    match d.iter().position(|z| !(z.norm() >= DENOMINATOR_FLOOR)) {
        Some(user) => Err(Error::DegenerateDenominator {
            user,
            magnitude: d[user].norm(),
        }),
        None => Ok(()),
    }
}

/// One channel realization plus the statistics shared by all receivers built
/// on it. `Σ_r` is computed up front; the effective channel and `Σ_n` on
/// first use.
pub struct ChannelContext<'a> {
    h: &'a ComplexMatrix,
    n0: f64,
    sigma_r: ComplexMatrix,
    effective_channel: OnceCell<ComplexMatrix>,
    sigma_n: OnceCell<ComplexMatrix>,
}

impl<'a> ChannelContext<'a> {
    pub fn new(h: &'a ComplexMatrix, n0: f64) -> Result<Self> {
        if h.rows() < h.cols() {
            return Err(Error::InvalidConfig(format!(
                "channel has {} antennas for {} users",
                h.rows(),
                h.cols()
            )));
        }
        if !(n0 > 0.0) {
            return Err(Error::InvalidConfig(format!("noise power {n0} must be positive")));
        }
        Ok(Self {
            h,
            n0,
            sigma_r: received_covariance(h, n0),
            effective_channel: OnceCell::new(),
            sigma_n: OnceCell::new(),
        })
    }

    /// Uses precomputed Bussgang statistics, which may come from an
    /// approximate `Σ_r`.
    pub fn with_statistics(h: &'a ComplexMatrix, n0: f64, stats: QuantizedStatistics) -> Result<Self> {
        let mut ctx = Self::new(h, n0)?;
        ctx.sigma_r = stats.sigma_r;
        let _ = ctx.effective_channel.set(stats.a);
        let _ = ctx.sigma_n.set(stats.sigma_n);
        Ok(ctx)
    }

    pub fn h(&self) -> &ComplexMatrix {
        self.h
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn sigma_r(&self) -> &ComplexMatrix {
        &self.sigma_r
    }

    /// `A = F·H`.
    pub fn effective_channel(&self) -> Result<&ComplexMatrix> {
        if let Some(a) = self.effective_channel.get() {
            return Ok(a);
        }
        let a = self.h.scale_rows(&bussgang_gain(&self.sigma_r)?);
        Ok(self.effective_channel.get_or_init(|| a))
    }

    /// `Σ_n`.
    pub fn noise_covariance(&self) -> Result<&ComplexMatrix> {
        if let Some(s) = self.sigma_n.get() {
            return Ok(s);
        }
        let s = effective_noise_covariance_from(&self.sigma_r, self.n0)?;
        Ok(self.sigma_n.get_or_init(|| s))
    }

    /// The channel the equalization denominators are measured against.
    pub fn reference_channel(&self, kind: ReceiverKind) -> Result<&ComplexMatrix> {
        if kind.is_bussgang() {
            self.effective_channel()
        } else {
            Ok(self.h)
        }
    }

    pub fn combiner(&self, kind: ReceiverKind) -> Result<Combiner> {
        let h = self.h;
        let w = match kind {
            ReceiverKind::Mrc => h.adjoint(),
            ReceiverKind::Zf => zero_forcing(h)?,
            ReceiverKind::Mmse => hermitian_solve(&h.gram().add_diag(self.n0), &h.adjoint())?,
            ReceiverKind::AqnmMmse => {
                let aqnm = aqnm_parameters_from(&self.sigma_r);
                let m = &self.sigma_r + &aqnm.sigma_q.scale(1.0 / (aqnm.kappa * aqnm.kappa));
                right_solve(h, &m)?
            }
            ReceiverKind::Wfq => {
                let aqnm = aqnm_parameters_from(&self.sigma_r);
                let m = &self.sigma_r.scale(aqnm.kappa) + &self.sigma_r.diag_part().scale(aqnm.alpha);
                right_solve(h, &m)?
            }
            ReceiverKind::Bmrc => self.effective_channel()?.adjoint(),
            ReceiverKind::Bzf => zero_forcing(self.effective_channel()?)?,
            ReceiverKind::Bmmse => {
                let a = self.effective_channel()?;
                let m = &a.outer_gram() + self.noise_covariance()?;
                right_solve(a, &m)?
            }
        };
        Combiner::new(kind, w, self.reference_channel(kind)?)
    }
}

/// `(GᴴG)⁻¹Gᴴ`.
fn zero_forcing(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    hermitian_solve_strict(&g.gram(), &g.adjoint()).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::RankDeficient,
        other => other,
    })
}

/// `Gᴴ·M⁻¹` for Hermitian `M`, computed as `(M⁻¹G)ᴴ`.
fn right_solve(g: &ComplexMatrix, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_solve(m, g)?.adjoint())
}

pub fn build_combiner(kind: ReceiverKind, h: &ComplexMatrix, n0: f64) -> Result<Combiner> {
    ChannelContext::new(h, n0)?.combiner(kind)
}

/// `x̃ = W·y`.
pub fn demultiplex(w: &ComplexMatrix, y: &[Complex64]) -> Result<ComplexVector> {
    w.mul_vec(y)
}

/// `x̌_k = x̃_k / (W·G)_kk`.
pub fn equalize(x_tilde: &[Complex64], combiner: &Combiner) -> Result<ComplexVector> {
    if x_tilde.len() != combiner.denominators.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} demultiplexed streams for {} users",
            x_tilde.len(),
            combiner.denominators.len()
        )));
    }
    check_denominators(&combiner.denominators)?;
    Ok(x_tilde
        .iter()
        .zip(&combiner.denominators)
        .map(|(x, d)| x / d)
        .collect())
}

/// `x́ = √K · x̌ / ‖x̌‖₂`.
pub fn rescale(x_check: &[Complex64], k: usize) -> Result<ComplexVector> {
    let norm = norm2(x_check);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    let s = (k as f64).sqrt() / norm;
    Ok(x_check.iter().map(|z| z * s).collect())
}

/// Nearest constellation point per entry, as point indices.
pub fn detect_indices(x: &[Complex64], constellation: &Constellation) -> Vec<usize> {
    x.iter().map(|&z| constellation.nearest_index(z)).collect()
}

pub fn detect(x: &[Complex64], constellation: &Constellation) -> ComplexVector {
    detect_indices(x, constellation)
        .into_iter()
        .map(|i| constellation.points()[i])
        .collect()
}

/// Demultiplex, equalize, rescale and detect; returns point indices.
pub fn detect_pipeline_indices(
    y: &[Complex64],
    combiner: &Combiner,
    constellation: &Constellation,
) -> Result<Vec<usize>> {
    let x_tilde = demultiplex(&combiner.w, y)?;
    let x_check = equalize(&x_tilde, combiner)?;
    let x_acute = rescale(&x_check, combiner.w.rows())?;
    Ok(detect_indices(&x_acute, constellation))
}

pub fn detect_pipeline(
    y: &[Complex64],
    combiner: &Combiner,
    constellation: &Constellation,
) -> Result<ComplexVector> {
    Ok(detect_pipeline_indices(y, combiner, constellation)?
        .into_iter()
        .map(|i| constellation.points()[i])
        .collect())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::signal::{complex_gaussian, one_bit_quantize, transmit, Modulation};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_channel(n: usize, k: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, k, |_, _| complex_gaussian(rng, 1.0))
    }

    #[test]
    fn tokens_round_trip() {
        for kind in ReceiverKind::ALL {
            assert_eq!(kind.token().parse::<ReceiverKind>().unwrap(), kind);
        }
        assert_eq!(
            "AQNM_MMSE".parse::<ReceiverKind>().unwrap(),
            ReceiverKind::AqnmMmse
        );
        assert!("lmmse".parse::<ReceiverKind>().is_err());
    }

    #[test]
    fn identity_channel_combiners() {
        let h = ComplexMatrix::identity(2);
        let n0 = 0.25;
        let mrc = build_combiner(ReceiverKind::Mrc, &h, n0).unwrap();
        let zf = build_combiner(ReceiverKind::Zf, &h, n0).unwrap();
        let mmse = build_combiner(ReceiverKind::Mmse, &h, n0).unwrap();
        assert!(mrc.w.max_abs_diff(&h) < 1e-15);
        assert!(zf.w.max_abs_diff(&h) < 1e-15);
        assert!(mmse.w.max_abs_diff(&h.scale(1.0 / (1.0 + n0))) < 1e-15);
    }

    #[test]
    fn scalar_bussgang_chain() {
        let h = ComplexMatrix::identity(1);
        let bzf = build_combiner(ReceiverKind::Bzf, &h, 1.0).unwrap();
        let bmmse = build_combiner(ReceiverKind::Bmmse, &h, 1.0).unwrap();
        assert!((bzf.w[(0, 0)] - c(PI.sqrt(), 0.0)).norm() < 1e-12);
        assert!((bmmse.w[(0, 0)] - c(1.0 / PI.sqrt(), 0.0)).norm() < 1e-12);
        // (W·A)_11 = (1/√π)(1/√π)
        assert!((bmmse.denominators[0] - c(1.0 / PI, 0.0)).norm() < 1e-12);
        let x = equalize(&[c(0.3, 0.0)], &bmmse).unwrap();
        assert!((x[0] - c(0.3 * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_forcing_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = random_channel(16, 4, &mut rng);
        let ctx = ChannelContext::new(&h, 0.1).unwrap();
        let zf = ctx.combiner(ReceiverKind::Zf).unwrap();
        let bzf = ctx.combiner(ReceiverKind::Bzf).unwrap();
        let a = ctx.effective_channel().unwrap();
        assert!((&zf.w * &h).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-10);
        assert!((&bzf.w * a).max_abs_diff(&ComplexMatrix::identity(4)) < 1e-10);
        for d in zf.denominators.iter().chain(&bzf.denominators) {
            assert!((d - c(1.0, 0.0)).norm() < 1e-10);
        }
        let x = [c(0.4, -0.2), c(1.0, 1.0), c(-3.0, 0.5), c(0.0, 0.1)];
        assert!(equalize(&x, &zf)
            .unwrap()
            .iter()
            .zip(&x)
            .all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn mmse_approaches_zf() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let h = random_channel(16, 4, &mut rng);
        let zf = build_combiner(ReceiverKind::Zf, &h, 1e-12).unwrap();
        let mmse = build_combiner(ReceiverKind::Mmse, &h, 1e-12).unwrap();
        assert!(mmse.w.max_abs_diff(&zf.w) <= 1e-6);
    }

    #[test]
    fn combiners_have_expected_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let h = random_channel(8, 3, &mut rng);
        let ctx = ChannelContext::new(&h, 0.05).unwrap();
        for kind in ReceiverKind::ALL {
            let comb = ctx.combiner(kind).unwrap();
            assert_eq!(comb.w.shape(), (3, 8), "{kind}");
            assert!(comb.w.is_finite());
        }
    }

    #[test]
    fn aqnm_and_wfq_match_their_formulas() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let h = random_channel(6, 2, &mut rng);
        let n0 = 0.2;
        let ctx = ChannelContext::new(&h, n0).unwrap();
        let (alpha, kappa) = (0.3634, 1.0 - 0.3634);
        let sigma_r = h.outer_gram().add_diag(n0);
        let sigma_q = sigma_r.diag_part().scale(alpha * kappa);

        let m = &(&h.outer_gram() + &sigma_q.scale(1.0 / (kappa * kappa))).add_diag(n0);
        let w = ctx.combiner(ReceiverKind::AqnmMmse).unwrap().w;
        // W·M = Hᴴ
        assert!((&w * m).max_abs_diff(&h.adjoint()) < 1e-10);

        let m = &sigma_r.scale(kappa) + &sigma_r.diag_part().scale(alpha);
        let w = ctx.combiner(ReceiverKind::Wfq).unwrap().w;
        assert!((&w * &m).max_abs_diff(&h.adjoint()) < 1e-10);

        let stats = QuantizedStatistics::new(&h, n0).unwrap();
        assert!(ctx.effective_channel().unwrap().max_abs_diff(&stats.a) == 0.0);
        let m = &stats.a.outer_gram() + &stats.sigma_n;
        let w = ctx.combiner(ReceiverKind::Bmmse).unwrap().w;
        assert!((&w * &m).max_abs_diff(&stats.a.adjoint()) < 1e-10);
    }

    #[test]
    fn rank_deficient_channel() {
        let mut h = ComplexMatrix::zeros(4, 2);
        for i in 0..4 {
            h[(i, 0)] = c(1.0, 0.0);
            h[(i, 1)] = c(1.0, 0.0);
        }
        assert!(matches!(
            build_combiner(ReceiverKind::Zf, &h, 0.1),
            Err(Error::RankDeficient)
        ));
        assert!(matches!(
            build_combiner(ReceiverKind::Bzf, &h, 0.1),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn degenerate_denominator_is_rejected() {
        // user 1 has no channel, so MRC's (W·H)_11 = 0
        let mut h = ComplexMatrix::zeros(2, 2);
        h[(0, 0)] = c(1.0, 0.0);
        assert!(matches!(
            build_combiner(ReceiverKind::Mrc, &h, 0.1),
            Err(Error::DegenerateDenominator { user: 1, .. })
        ));
    }

    #[test]
    fn demultiplex_examples() {
        let y = vec![c(0.3, -1.0), c(2.0, 0.5)];
        assert_eq!(demultiplex(&ComplexMatrix::identity(2), &y).unwrap(), y);
        let w = ComplexMatrix::from_rows(&[vec![c(0.5, 0.0), c(0.5, 0.0)]]).unwrap();
        let out = demultiplex(&w, &[c(1.0, 1.0), c(1.0, -1.0)]).unwrap();
        assert_eq!(out, vec![c(1.0, 0.0)]);
    }

    #[test]
    fn rescale_examples() {
        let v = rescale(&[c(1.0, 0.0), c(0.0, 1.0)], 2).unwrap();
        assert!((v[0] - c(1.0, 0.0)).norm() < 1e-15 && (v[1] - c(0.0, 1.0)).norm() < 1e-15);
        let v = rescale(&[c(2.0, 0.0), c(0.0, 0.0)], 2).unwrap();
        assert!((v[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-15);
        assert!(matches!(rescale(&[c(0.0, 0.0)], 1), Err(Error::ZeroVector)));
    }

    #[test]
    fn rescale_preserves_psk_decisions_on_a_grid() {
        for m in [Modulation::Qpsk, Modulation::Psk8] {
            let con = Constellation::new(m);
            let grid: Vec<f64> = (-12..=12).map(|i| f64::from(i) * 0.173).collect();
            for &a in &grid {
                for &b in &grid {
                    for &(p, q) in &[(0.9, -0.4), (-2.3, 0.05)] {
                        let x = vec![c(a, b), c(p, q)];
                        let before = detect_indices(&x, &con);
                        let after = detect_indices(&rescale(&x, 2).unwrap(), &con);
                        assert_eq!(before, after, "{m} at {x:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn detect_examples() {
        let con = Constellation::new(Modulation::Qpsk);
        let s = FRAC_1_SQRT_2;
        assert_eq!(detect(&[c(0.9, 0.2)], &con), vec![c(s, s)]);
        assert_eq!(detect(con.points(), &con), con.points().to_vec());
    }

    #[test]
    fn detect_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for m in Modulation::ALL {
            let con = Constellation::new(m);
            for _ in 0..10_000 {
                let z = complex_gaussian(&mut rng, 2.0);
                let brute = con
                    .points()
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ((z - p).norm_sqr(), i))
                    .fold(
                        (f64::INFINITY, 0),
                        |best, cand| if cand.0 < best.0 { cand } else { best },
                    )
                    .1;
                assert_eq!(detect_indices(&[z], &con), vec![brute]);
            }
        }
    }

    #[test]
    fn noiseless_unquantized_zf_recovers_symbols() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let con = Constellation::new(Modulation::Psk8);
        let h = random_channel(8, 4, &mut rng);
        let zf = build_combiner(ReceiverKind::Zf, &h, 1e-30).unwrap();
        for _ in 0..100 {
            let x: Vec<_> = (0..4).map(|_| con.point_for_label(rng.gen_range(0..8))).collect();
            let r = transmit(&h, &x, 1e-30, &mut rng).unwrap();
            assert_eq!(detect_pipeline(&r, &zf, &con).unwrap(), x);
        }
    }

    #[test]
    fn large_k_substitution_reproduces_approximate_receivers() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let (n, k, n0) = (64, 8, 0.1);
        let h = random_channel(n, k, &mut rng);
        let sigma_r = ComplexMatrix::identity(n).scale(k as f64 + n0);
        let stats = QuantizedStatistics::with_covariance(&h, n0, sigma_r).unwrap();
        let ctx = ChannelContext::with_statistics(&h, n0, stats).unwrap();
        let gamma = 2.0 / (PI * (k as f64 + n0));

        let bmrc = ctx.combiner(ReceiverKind::Bmrc).unwrap().w;
        assert!(bmrc.max_abs_diff(&h.adjoint().scale(gamma.sqrt())) <= 1e-12);

        let zf = hermitian_solve(&h.gram(), &h.adjoint()).unwrap();
        let bzf = ctx.combiner(ReceiverKind::Bzf).unwrap().w;
        assert!(bzf.max_abs_diff(&zf.scale(1.0 / gamma.sqrt())) <= 1e-12);

        let loading = (1.0 - gamma * k as f64) / gamma;
        let approx = hermitian_solve(&h.outer_gram().add_diag(loading), &h)
            .unwrap()
            .adjoint()
            .scale(1.0 / gamma.sqrt());
        let bmmse = ctx.combiner(ReceiverKind::Bmmse).unwrap().w;
        assert!(bmmse.max_abs_diff(&approx) <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn pipeline_is_scale_invariant(seed in any::<u64>(), c_scale in 1e-3f64..1e3, kind_idx in 0usize..8) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kind = ReceiverKind::ALL[kind_idx];
            let con = Constellation::new(Modulation::Psk8);
            let h = random_channel(8, 2, &mut rng);
            let n0 = 0.05;
            let ctx = ChannelContext::new(&h, n0).unwrap();
            let comb = ctx.combiner(kind).unwrap();
            let scaled = comb.scaled(c_scale, ctx.reference_channel(kind).unwrap()).unwrap();
            let x: Vec<_> = (0..2).map(|_| con.point_for_label(rng.gen_range(0..8))).collect();
            let y = one_bit_quantize(&transmit(&h, &x, n0, &mut rng).unwrap());
            let y_scaled: Vec<_> = y.iter().map(|v| v * c_scale).collect();
            let base = detect_pipeline(&y, &comb, &con).unwrap();
            prop_assert_eq!(&detect_pipeline(&y, &scaled, &con).unwrap(), &base);
            prop_assert_eq!(&detect_pipeline(&y_scaled, &comb, &con).unwrap(), &base);
        }

        #[test]
        fn demultiplex_is_linear(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_channel(3, 5, &mut rng);
            let y1: Vec<_> = (0..5).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let y2: Vec<_> = (0..5).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            let sum: Vec<_> = y1.iter().zip(&y2).map(|(a, b)| a + b).collect();
            let lhs = demultiplex(&w, &sum).unwrap();
            let a = demultiplex(&w, &y1).unwrap();
            let b = demultiplex(&w, &y2).unwrap();
            for i in 0..3 {
                prop_assert!((lhs[i] - a[i] - b[i]).norm() < 1e-12);
            }
        }
    }
}
