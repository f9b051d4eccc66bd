//! Operational precision: how fast the potentials must switch, and how much
//! visibility is lost when the switching times jitter from run to run.
//!
//! Jitter in the four segment durations leaves the total symplectic map
//! slightly off −1, so the branches fail to overlap at the end. This is the
//! Humpty-Dumpty effect. It is computed three ways: a second-order
//! closed form, the printed closed form, and seeded Monte Carlo over the
//! exact per-run closure.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::interferometer::{LengthUnit, ProtocolSchedule};
use crate::phase_space::{higher_moments, CovarianceMatrix, PhaseVector};
use crate::{Error, Result};

fn non_negative(name: &'static str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::OutOfRange { name, value: v })
    }
}

/// Finite-duration switch between the inverted and harmonic potentials,
/// H(s) = (f(s)x̂² + p̂²)/2 with f(0) = −1 and f(1) = 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuddenSwitch {
    /// Average ⟨f⟩ of the switching profile.
    pub mean_f: f64,
    /// Switching duration in s.
    pub delta_t: f64,
}

impl Default for SuddenSwitch {
    fn default() -> Self {
        SuddenSwitch { mean_f: 0.0, delta_t: 0.0 }
    }
}

impl SuddenSwitch {
    pub fn new(mean_f: f64, delta_t: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&mean_f) {
            return Err(Error::OutOfRange { name: "mean_f", value: mean_f });
        }
        non_negative("delta_t", delta_t)?;
        Ok(SuddenSwitch { mean_f, delta_t })
    }

    /// Whether `delta_t` is below [`sudden_bound`] for this run.
    pub fn is_sudden(&self, delta_x: f64, t_minus: f64, omega: f64) -> Result<bool> {
        Ok(self.delta_t < sudden_bound(delta_x, t_minus, omega)?)
    }
}

/// Δ²_{H_A} at the switching point t_+ + t_−, with H_A = ⟨f⟩x̂² + p̂² and
/// r0 = (δx, 0) in phase-space units:
/// ¼(2δx²+1)[(⟨f⟩+1)² cosh 4t_− + (⟨f⟩−1)²] + (1−⟨f⟩²)δx² cosh 2t_−.
///
/// This is the variance of the Weyl symbol, i.e. it uses the symmetrised
/// ⟨x̂²p̂² + p̂²x̂²⟩. See [`sudden_variance_operator`] for the operator
/// variance.
pub fn sudden_variance(delta_x: f64, t_minus: f64, mean_f: f64) -> f64 {
    let f = mean_f;
    let d2 = delta_x * delta_x;
    0.25 * (2.0 * d2 + 1.0) * ((f + 1.0) * (f + 1.0) * libm::cosh(4.0 * t_minus) + (f - 1.0) * (f - 1.0))
        + (1.0 - f * f) * d2 * libm::cosh(2.0 * t_minus)
}

/// Leading term (2δx²+1)(⟨f⟩+1)² e^{4t_−}/8 of [`sudden_variance`].
pub fn sudden_variance_leading(delta_x: f64, t_minus: f64, mean_f: f64) -> f64 {
    (2.0 * delta_x * delta_x + 1.0) * (mean_f + 1.0) * (mean_f + 1.0) * libm::exp(4.0 * t_minus) / 8.0
}

/// Operator variance of ⟨f⟩x̂² + p̂². Since x̂²p̂² + p̂²x̂² differs from its
/// symmetrised form by −1, this is [`sudden_variance`] − ⟨f⟩. The two
/// agree for a symmetric profile, ⟨f⟩ = 0.
pub fn sudden_variance_operator(delta_x: f64, t_minus: f64, mean_f: f64) -> f64 {
    sudden_variance(delta_x, t_minus, mean_f) - mean_f
}

/// [`sudden_variance`] from the Gaussian moment identities applied to the
/// branch at the switching point.
pub fn sudden_variance_moments(delta_x: f64, t_minus: f64, mean_f: f64) -> Result<f64> {
    let sched = ProtocolSchedule::expansion(t_minus)?;
    let f = sched.moment_map_at(FRAC_PI_2 + t_minus)?.to_mat();
    let r = PhaseVector::new(f.mul_vec(&[delta_x, 0.0]))?;
    let sigma = CovarianceMatrix::new(&f * &f.transpose())?;
    let m = higher_moments(&r, &sigma)?;
    let x2 = r[0] * r[0] + 0.5 * sigma.matrix()[(0, 0)];
    let p2 = r[1] * r[1] + 0.5 * sigma.matrix()[(1, 1)];
    let mean = mean_f * x2 + p2;
    Ok(mean_f * mean_f * m.x4 + m.p4 + mean_f * m.x2p2_sym - mean * mean)
}

/// Longest switching time (s) for which the switch is sudden:
/// 2√2 e^{−2t_−}/(√(2δx²+1) ω).
pub fn sudden_bound(delta_x: f64, t_minus: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::OutOfRange { name: "omega", value: omega });
    }
    Ok(2.0 * SQRT_2 * libm::exp(-2.0 * t_minus) / (libm::sqrt(2.0 * delta_x * delta_x + 1.0) * omega))
}

/// Relative switching-time errors t_i(1 + ε_i), ε_i ~ N(bias, σ_ε²).
///
/// Only three combinations matter: ε₁, ε₃ and ε₂₄ = ε₂ − ε₄ ~ N(0, 2σ_ε²),
/// after rescaling t_− to absorb ε₂.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchingErrorModel {
    pub sigma_eps: f64,
    /// Systematic offset of every ε_i. It cancels in ε₂₄.
    pub bias: f64,
    pub seed: u64,
}

impl SwitchingErrorModel {
    pub fn new(sigma_eps: f64, seed: u64) -> Result<Self> {
        non_negative("sigma_eps", sigma_eps)?;
        Ok(SwitchingErrorModel { sigma_eps, bias: 0.0, seed })
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias = bias;
        self
    }

    fn validate(&self) -> Result<()> {
        non_negative("sigma_eps", self.sigma_eps)?;
        if !self.bias.is_finite() {
            return Err(Error::OutOfRange { name: "bias", value: self.bias });
        }
        Ok(())
    }
}

/// Visibility e^{−‖(S_ε + 1) r0‖²} of one run whose segment durations are
/// (π/2)(1+ε₁), t_−, (π/2)(1+ε₃), t_−(1−ε₂₄), with r0 = (offset, 0).
pub fn perturbed_closure_visibility(offset: f64, t_minus: f64, eps: [f64; 3]) -> f64 {
    libm::exp(-perturbed_closure_defect(offset, t_minus, eps))
}

/// ‖(S_ε + 1) r0‖² for the perturbed run of [`perturbed_closure_visibility`].
///
/// With φ = (π/2)ε for the harmonic segments and δ = t_−ε₂₄, the identity
/// B(t)R(π/2)B(t) = R(π/2) for the boost B and rotation R gives
/// 1 + F_ε = 1 − cos φ₃ B(−δ)R(φ₁) − sin φ₃ B(2t_− − δ)R(π/2 + φ₁).
/// The first part is assembled from small differences, so nothing
/// cancels at e^{2t_−}. Since S_ε + 1 = Ωᵀ(F_ε + 1)ᵀΩ, only the second row
/// of F_ε + 1 is needed.
pub fn perturbed_closure_defect(offset: f64, t_minus: f64, eps: [f64; 3]) -> f64 {
    let [e1, e3, e24] = eps;
    let phi1 = FRAC_PI_2 * e1;
    let phi3 = FRAC_PI_2 * e3;
    let delta = t_minus * e24;
    let (s1, c1) = (libm::sin(phi1), libm::cos(phi1));
    let h1 = 2.0 * sq(libm::sin(0.5 * phi1));
    let h3 = 2.0 * sq(libm::sin(0.5 * phi3));
    let s3 = libm::sin(phi3);
    let chm1 = 2.0 * sq(libm::sinh(0.5 * delta));
    let sh = libm::sinh(delta);
    // B(−δ) − 1 and R(φ₁) − 1.
    let bd = [[chm1, -sh], [-sh, chm1]];
    let rd = [[-h1, s1], [-s1, -h1]];
    // Second row of X = B(−δ)R(φ₁) − 1 = bd + rd + bd·rd.
    let x = [
        bd[1][0] + rd[1][0] + bd[1][0] * rd[0][0] + bd[1][1] * rd[1][0],
        bd[1][1] + rd[1][1] + bd[1][0] * rd[0][1] + bd[1][1] * rd[1][1],
    ];
    // Second row of B(2t − δ)R(π/2 + φ₁), R(π/2 + φ₁) = [[−s₁, c₁], [−c₁, −s₁]].
    let big = 2.0 * t_minus - delta;
    let (bs, bc) = (libm::sinh(big), libm::cosh(big));
    let w = [-bs * s1 - bc * c1, bs * c1 - bc * s1];
    let g0 = -x[0] + h3 * x[0] - s3 * w[0];
    let g1 = -x[1] + h3 * (1.0 + x[1]) - s3 * w[1];
    offset * offset * (g0 * g0 + g1 * g1)
}

fn sq(x: f64) -> f64 {
    x * x
}

/// ∂(S_ε e_x)/∂(ε₁, ε₃, ε₂₄) at ε = 0, as the columns of a 2×3 matrix.
pub fn closure_jacobian(t_minus: f64) -> [[f64; 3]; 2] {
    let (s2, c2) = (libm::sinh(2.0 * t_minus), libm::cosh(2.0 * t_minus));
    [[0.0, -FRAC_PI_2 * s2, 0.0], [-FRAC_PI_2, -FRAC_PI_2 * c2, -t_minus]]
}

/// Closed forms for the averaged visibility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HumptyAnalytic {
    /// Exact Gaussian average of the exponent expanded to second order in
    /// ε: det(1 + 2 r0² J C Jᵀ)^{−1/2} with C = diag(σ², σ², 2σ²).
    pub second_order: f64,
    /// The printed closed form, which treats ε₂₄ as N(0, 4σ_ε²).
    pub printed: f64,
    /// Large-t_− limit of `second_order`:
    /// 8e^{−2t}/(πδxσ√(8 + δx²σ²(π² + 8t²))), δx in ground-state spreads.
    pub leading: f64,
    /// The printed leading form 8e^{−2t}/(πδxσ√(8 + δx²σ²(π + 16t))).
    pub leading_printed: f64,
}

/// Humpty-Dumpty visibility for a separation `delta_x` quoted in `unit`.
/// Valid for σ_ε ≪ 1.
pub fn humpty_visibility_analytic(
    delta_x: f64,
    unit: LengthUnit,
    t_minus: f64,
    sigma_eps: f64,
) -> Result<HumptyAnalytic> {
    non_negative("delta_x", delta_x)?;
    non_negative("t_minus", t_minus)?;
    non_negative("sigma_eps", sigma_eps)?;
    let offset = unit.offset(delta_x);
    // δx in ground-state spreads, the variable of the printed forms.
    let d = SQRT_2 * offset;
    let v = sigma_eps * sigma_eps;
    // det(1 + k J C Jᵀ) = 1 + k tr(JCJᵀ) + k² det(JCJᵀ), with the last term
    // expanded by Cauchy-Binet so every contribution is non-negative.
    let j = closure_jacobian(t_minus);
    let c = [v, v, 2.0 * v];
    let col = |k: usize| j[0][k] * j[0][k] + j[1][k] * j[1][k];
    let minor = |a: usize, b: usize| j[0][a] * j[1][b] - j[0][b] * j[1][a];
    let trace: f64 = (0..3).map(|k| c[k] * col(k)).sum();
    let det_g = c[0] * c[1] * sq(minor(0, 1)) + c[0] * c[2] * sq(minor(0, 2)) + c[1] * c[2] * sq(minor(1, 2));
    let k = 2.0 * offset * offset;
    let det = 1.0 + k * trace + k * k * det_g;
    let second_order = 1.0 / libm::sqrt(det);

    let a = d * d * v;
    let t2 = t_minus * t_minus;
    let pi2 = PI * PI;
    let printed = 4.0 * SQRT_2
        / libm::sqrt(
            a * (16.0 * t2 + pi2) * (8.0 - pi2 * a)
                + pi2 * a * libm::cosh(4.0 * t_minus) * (a * (16.0 * t2 + pi2) + 8.0)
                + 32.0,
        );
    let pre = 8.0 * libm::exp(-2.0 * t_minus) / (PI * d * sigma_eps);
    let leading = pre / libm::sqrt(8.0 + a * (pi2 + 8.0 * t2));
    let leading_printed = pre / libm::sqrt(8.0 + a * (PI + 16.0 * t_minus));
    Ok(HumptyAnalytic { second_order, printed, leading, leading_printed })
}

/// Largest switching jitter for an O(1) visibility,
/// σ_ε = 4e^{−2t_−}/(δx√(π(π−1))), and the same in s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JitterBound {
    pub relative: f64,
    pub seconds: f64,
}

/// Jitter bound for δx quoted in ground-state spreads.
pub fn sigma_eps_bound(delta_x: f64, t_minus: f64, omega: f64) -> Result<JitterBound> {
    if delta_x == 0.0 {
        return Err(Error::Unbounded("sigma_eps"));
    }
    if !(delta_x > 0.0) {
        return Err(Error::OutOfRange { name: "delta_x", value: delta_x });
    }
    if !(omega > 0.0) {
        return Err(Error::OutOfRange { name: "omega", value: omega });
    }
    let relative = 4.0 * libm::exp(-2.0 * t_minus) / (delta_x * libm::sqrt(PI * (PI - 1.0)));
    Ok(JitterBound { relative, seconds: relative / omega })
}

/// Streaming mean and centred second moment of the visibility deficit
/// 1 − v, mergeable in any grouping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct McSums {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl McSums {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &McSums) -> McSums {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        McSums { n, mean: self.mean + d * w, m2: self.m2 + other.m2 + d * d * self.n as f64 * w }
    }
}

/// Merges chunk sums by recursive halving, so the result depends only on
/// the chunk order, never on how the chunks were scheduled.
pub fn pairwise_merge(chunks: &[McSums]) -> McSums {
    match chunks.len() {
        0 => McSums::default(),
        1 => chunks[0],
        n => pairwise_merge(&chunks[..n / 2]).merge(&pairwise_merge(&chunks[n / 2..])),
    }
}

/// Monte Carlo visibility with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub visibility: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl From<McSums> for McEstimate {
    fn from(s: McSums) -> Self {
        let var = if s.n > 1 { s.m2 / (s.n - 1) as f64 } else { 0.0 };
        McEstimate { visibility: 1.0 - s.mean, std_error: libm::sqrt(var / s.n as f64), samples: s.n }
    }
}

/// Draws per chunk. Each chunk has its own ChaCha stream.
pub const MC_CHUNK: usize = 4096;

/// A Monte Carlo run of the Humpty-Dumpty average.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HumptyRun {
    /// Branch offset r0 = (offset, 0) in phase-space units.
    pub offset: f64,
    pub t_minus: f64,
    pub errors: SwitchingErrorModel,
}

impl HumptyRun {
    pub fn new(delta_x: f64, unit: LengthUnit, t_minus: f64, errors: SwitchingErrorModel) -> Result<Self> {
        non_negative("delta_x", delta_x)?;
        non_negative("t_minus", t_minus)?;
        errors.validate()?;
        Ok(HumptyRun { offset: unit.offset(delta_x), t_minus, errors })
    }

    /// Sizes of the chunks that make up `samples` draws.
    pub fn chunk_sizes(samples: usize) -> Vec<usize> {
        let mut sizes = alloc::vec![MC_CHUNK; samples / MC_CHUNK];
        if samples % MC_CHUNK != 0 {
            sizes.push(samples % MC_CHUNK);
        }
        sizes
    }

    /// Sums over `n` draws from stream `index`.
    pub fn chunk(&self, index: u64, n: usize) -> McSums {
        let mut rng = ChaCha8Rng::seed_from_u64(self.errors.seed);
        rng.set_stream(index);
        let s = self.errors.sigma_eps;
        let mut sums = McSums::default();
        if s == 0.0 && self.errors.bias == 0.0 {
            for _ in 0..n {
                sums.push(0.0);
            }
            return sums;
        }
        let single = Normal::new(self.errors.bias, s).expect("validated sigma");
        let pair = Normal::new(0.0, SQRT_2 * s).expect("validated sigma");
        for _ in 0..n {
            let e1 = single.sample(&mut rng);
            let e3 = single.sample(&mut rng);
            let e24 = pair.sample(&mut rng);
            let q = perturbed_closure_defect(self.offset, self.t_minus, [e1, e3, e24]);
            sums.push(-libm::expm1(-q));
        }
        sums
    }

    /// Single-threaded estimate; identical to merging the chunks computed
    /// in any order with [`pairwise_merge`].
    pub fn estimate(&self, samples: usize) -> Result<McEstimate> {
        check_samples(samples)?;
        let chunks: Vec<McSums> = Self::chunk_sizes(samples)
            .iter()
            .enumerate()
            .map(|(i, &n)| self.chunk(i as u64, n))
            .collect();
        Ok(pairwise_merge(&chunks).into())
    }
}

/// Rejects runs with fewer than 10³ draws.
pub fn check_samples(samples: usize) -> Result<()> {
    if samples < 1000 {
        return Err(Error::OutOfRange { name: "samples", value: samples as f64 });
    }
    Ok(())
}

/// Seeded Monte Carlo Humpty-Dumpty visibility.
pub fn humpty_visibility_mc(
    delta_x: f64,
    unit: LengthUnit,
    t_minus: f64,
    sigma_eps: f64,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    HumptyRun::new(delta_x, unit, t_minus, SwitchingErrorModel::new(sigma_eps, seed)?)?.estimate(samples)
}
