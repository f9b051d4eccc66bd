//! Gaussian phase-space kernel: symplectic maps, displacements, moments.
//!
//! Vectors are ordered (x₁, p₁, x₂, p₂, …) and Ω carries the per-mode block
//! [[0, 1], [−1, 0]].
//!
//! Two matrices are attached to every quadratic evolution and it pays to
//! keep them apart:
//!
//! * the *moment map* `F = e^{tΩH}`, which sends first moments forward in
//!   time (`r ↦ F r`, `σ ↦ F σ Fᵀ`);
//! * the *symplectic label* `S = F⁻¹`, which is what the protocol algebra
//!   calls `S_H`. A quarter period of the harmonic trap has `S = −Ω`.
//!
//! [`symplectic_segment`] and [`matrix_exp_symplectic`] return labels,
//! [`moment_map`] returns `F`. The symplectic inverse `−Ω Sᵀ Ω` is exact in
//! floating point, so moving between the two never loses digits.
//!
//! Displacements follow `D_r = exp(i rᵀ Ω r̂)`, which moves the mean by
//! `−r`. With that choice `D_a D_b = D_{a+b} e^{−(i/2) aᵀΩb}` and
//! `Ŝ_F D_r = D_{F r} Ŝ_F`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use crate::dd::{Dd, DdMat};
use crate::linalg::{dot, Mat};
use crate::{Error, Result};

/// First moments of an n-mode Gaussian state (or a displacement).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseVector(Vec<f64>);

impl PhaseVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() || entries.len() % 2 != 0 {
            return Err(Error::Dimension { expected: 2 * (entries.len() / 2 + 1), got: entries.len() });
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::OutOfRange { name: "phase vector entry", value: *v });
        }
        Ok(PhaseVector(entries))
    }

    pub fn zeros(modes: usize) -> Self {
        PhaseVector(vec![0.0; 2 * modes])
    }

    /// Single-mode (x, p).
    pub fn xp(x: f64, p: f64) -> Self {
        PhaseVector(vec![x, p])
    }

    pub fn modes(&self) -> usize {
        self.0.len() / 2
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        PhaseVector(self.0.iter().map(|v| v * s).collect())
    }

    pub fn add(&self, other: &PhaseVector) -> Self {
        PhaseVector(crate::linalg::vadd(&self.0, &other.0))
    }

    pub fn sub(&self, other: &PhaseVector) -> Self {
        PhaseVector(crate::linalg::vsub(&self.0, &other.0))
    }
}

impl core::ops::Index<usize> for PhaseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Symmetric 2n×2n covariance matrix; the vacuum is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix(Mat);

impl CovarianceMatrix {
    /// Accepts a matrix symmetric to 1e-12 (relative to its size) and
    /// symmetrizes it exactly.
    pub fn new(m: Mat) -> Result<Self> {
        if m.dim() == 0 || m.dim() % 2 != 0 {
            return Err(Error::Dimension { expected: 2, got: m.dim() });
        }
        if !m.is_finite() || !m.is_symmetric(1e-12 * m.max_abs().max(1.0)) {
            return Err(Error::NotSymmetric);
        }
        let t = m.transpose();
        Ok(CovarianceMatrix((&m + &t).scale(0.5)))
    }

    pub fn vacuum(modes: usize) -> Self {
        CovarianceMatrix(Mat::identity(2 * modes))
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn modes(&self) -> usize {
        self.0.dim() / 2
    }

    /// Smallest eigenvalue of the Hermitian matrix σ + iΩ. Non-negative
    /// (up to rounding) for every physical state.
    pub fn uncertainty_margin(&self) -> f64 {
        let n = self.0.dim();
        let om = omega(self.modes());
        let h = crate::linalg::CMat::from_fn(n, |i, j| Complex64::new(self.0[(i, j)], om[(i, j)]));
        let (vals, _) = h.herm_eigen();
        vals[0]
    }

    /// σ + iΩ ⪰ 0 with the given slack, scaled by ‖σ‖ to stay meaningful
    /// for strongly squeezed states.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.uncertainty_margin() >= -tol * self.0.max_abs().max(1.0)
    }
}

/// Ω for `modes` modes.
pub fn omega(modes: usize) -> Mat {
    let mut m = Mat::zeros(2 * modes);
    for k in 0..modes {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    m
}

/// aᵀ Ω b.
pub fn symplectic_product(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    (0..a.len() / 2)
        .map(|k| a[2 * k] * b[2 * k + 1] - a[2 * k + 1] * b[2 * k])
        .sum()
}

/// Linear symplectic map of phase space.
///
/// Transforms built from closed forms also carry a double-double copy of
/// their entries; products of such transforms are formed in double-double
/// so that long hyperbolic chains still cancel to full f64 accuracy.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticTransform {
    m: Mat,
    precise: Option<DdMat>,
}

impl SymplecticTransform {
    /// Wraps a matrix, checking S Ω Sᵀ = Ω relative to ‖S‖².
    pub fn new(m: Mat) -> Result<Self> {
        if m.dim() == 0 || m.dim() % 2 != 0 {
            return Err(Error::Dimension { expected: 2, got: m.dim() });
        }
        let s = SymplecticTransform { m, precise: None };
        let d = s.symplectic_defect();
        if !(d <= 1e-9) {
            return Err(Error::OutOfRange { name: "symplectic defect", value: d });
        }
        Ok(s)
    }

    pub(crate) fn from_mat_unchecked(m: Mat) -> Self {
        SymplecticTransform { m, precise: None }
    }

    pub(crate) fn from_precise(p: DdMat) -> Self {
        SymplecticTransform { m: p.to_mat(), precise: Some(p) }
    }

    pub fn identity(modes: usize) -> Self {
        SymplecticTransform::from_precise(DdMat::identity(2 * modes))
    }

    pub fn matrix(&self) -> &Mat {
        &self.m
    }

    pub fn precise(&self) -> Option<&DdMat> {
        self.precise.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn modes(&self) -> usize {
        self.m.dim() / 2
    }

    /// max |S Ω Sᵀ − Ω| / max(1, max|S|²). Entries grow like e^{t} during
    /// expansion, so an absolute test would be meaningless at large t.
    pub fn symplectic_defect(&self) -> f64 {
        let om = omega(self.modes());
        let lhs = &(&self.m * &om) * &self.m.transpose();
        let scale = self.m.max_abs().max(1.0);
        lhs.max_diff(&om) / (scale * scale)
    }

    /// |det S − 1| relative to max(1, max|S|^{2n}).
    pub fn det_defect(&self) -> f64 {
        let scale = self.m.max_abs().max(1.0);
        (self.m.det() - 1.0).abs() / libm::pow(scale, self.m.dim() as f64)
    }

    /// Exact symplectic inverse −Ω Sᵀ Ω.
    pub fn inverse(&self) -> SymplecticTransform {
        SymplecticTransform {
            m: symplectic_inverse(&self.m),
            precise: self.precise.as_ref().map(DdMat::symplectic_inverse),
        }
    }

    /// S + 1, formed in double-double when available.
    pub fn plus_identity(&self) -> Mat {
        match &self.precise {
            Some(p) => p.add(&DdMat::identity(p.dim())).to_mat(),
            None => &self.m + &Mat::identity(self.m.dim()),
        }
    }

    /// `later · self`.
    fn then(&self, later: &SymplecticTransform) -> SymplecticTransform {
        match (&self.precise, &later.precise) {
            (Some(a), Some(b)) => SymplecticTransform::from_precise(b.mul(a)),
            _ => SymplecticTransform::from_mat_unchecked(&later.m * &self.m),
        }
    }
}

/// −Ω Mᵀ Ω: the inverse of a symplectic matrix, computed by permuting and
/// negating entries only.
pub fn symplectic_inverse(m: &Mat) -> Mat {
    let om = omega(m.dim() / 2);
    -&(&(&om * &m.transpose()) * &om)
}

/// Named single-mode generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Oscillator {
    /// H = ½(p² + x²)
    Qho,
    /// H = ½(p² − x²)
    Iho,
}

/// Which physical segment a Hamiltonian describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentKind {
    Qho,
    Iho,
    QhoForce,
    IhoForce,
    GravQho,
    GravIho,
}

/// Ĥ/ħω = ½ r̂ᵀ H r̂ + r̄ᵀ r̂.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticHamiltonian {
    h: Mat,
    linear: Vec<f64>,
    label: SegmentKind,
}

impl QuadraticHamiltonian {
    pub fn new(h: Mat, linear: Vec<f64>, label: SegmentKind) -> Result<Self> {
        if h.dim() == 0 || h.dim() % 2 != 0 {
            return Err(Error::Dimension { expected: 2, got: h.dim() });
        }
        if linear.len() != h.dim() {
            return Err(Error::Dimension { expected: h.dim(), got: linear.len() });
        }
        if !h.is_symmetric(1e-14 * h.max_abs().max(1.0)) {
            return Err(Error::NotSymmetric);
        }
        Ok(QuadraticHamiltonian { h, linear, label })
    }

    pub fn oscillator(kind: Oscillator) -> Self {
        match kind {
            Oscillator::Qho => QuadraticHamiltonian {
                h: Mat::identity(2),
                linear: vec![0.0; 2],
                label: SegmentKind::Qho,
            },
            Oscillator::Iho => QuadraticHamiltonian {
                h: Mat::diag(&[-1.0, 1.0]),
                linear: vec![0.0; 2],
                label: SegmentKind::Iho,
            },
        }
    }

    /// Oscillator plus a constant force: Ĥ = ½(p̂² ± x̂²) − g x̂.
    pub fn with_force(kind: Oscillator, g: f64) -> Self {
        let mut q = QuadraticHamiltonian::oscillator(kind);
        q.linear = vec![-g, 0.0];
        q.label = match kind {
            Oscillator::Qho => SegmentKind::QhoForce,
            Oscillator::Iho => SegmentKind::IhoForce,
        };
        q
    }

    pub fn matrix(&self) -> &Mat {
        &self.h
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn label(&self) -> SegmentKind {
        self.label
    }

    pub fn modes(&self) -> usize {
        self.h.dim() / 2
    }

    /// Drift generator A = Ω H.
    pub fn drift(&self) -> Mat {
        &omega(self.modes()) * &self.h
    }

    /// Stationary point r̃ = −H⁻¹ r̄.
    pub fn equilibrium(&self) -> Result<Vec<f64>> {
        if self.linear.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; self.h.dim()]);
        }
        let x = self.h.solve(&self.linear).ok_or(Error::Singular)?;
        Ok(x.into_iter().map(|v| -v).collect())
    }

    /// True when H is exactly one of the two labelled single-mode forms.
    fn closed_form(&self) -> Option<Oscillator> {
        if self.h.dim() != 2 {
            return None;
        }
        if self.h == Mat::identity(2) {
            Some(Oscillator::Qho)
        } else if self.h == Mat::diag(&[-1.0, 1.0]) {
            Some(Oscillator::Iho)
        } else {
            None
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || !t.is_finite() {
        Err(Error::NegativeTime(t))
    } else {
        Ok(())
    }
}

/// Splits a harmonic duration into whole floating-point quarter periods
/// and an exact remainder, so that `FRAC_PI_2` means an exact quarter turn.
fn quarter_split(t: f64) -> (i64, Dd) {
    let q = libm::round(t / FRAC_PI_2);
    (q as i64, Dd::new(t) - Dd::prod(q, FRAC_PI_2))
}

/// Moment map [[cos θ, sin θ], [−sin θ, cos θ]] of a harmonic segment
/// lasting `quarters`·π/2 + `rem`.
pub fn qho_moment_map_dd(quarters: i64, rem: Dd) -> DdMat {
    let (s, c) = Dd::sincos_quarters(quarters, rem);
    DdMat::from_fn(2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => c,
        (0, 1) => s,
        _ => -s,
    })
}

/// Moment map [[cosh t, sinh t], [sinh t, cosh t]] of an inverted segment.
pub fn iho_moment_map_dd(t: Dd) -> DdMat {
    let (s, c) = (t.sinh(), t.cosh());
    DdMat::from_fn(2, |i, j| if i == j { c } else { s })
}

fn oscillator_map_dd(kind: Oscillator, t: f64) -> DdMat {
    match kind {
        Oscillator::Qho => {
            let (q, r) = quarter_split(t);
            qho_moment_map_dd(q, r)
        }
        Oscillator::Iho => iho_moment_map_dd(Dd::new(t)),
    }
}

/// Symplectic label of a single-mode segment of duration t: the rotation
/// [[cos t, −sin t], [sin t, cos t]] or the boost
/// [[cosh t, −sinh t], [−sinh t, cosh t]]. Harmonic durations are counted
/// in floating-point quarter periods, so `FRAC_PI_2` is an exact quarter.
pub fn symplectic_segment(kind: Oscillator, t: f64) -> Result<SymplecticTransform> {
    check_time(t)?;
    Ok(SymplecticTransform::from_precise(oscillator_map_dd(kind, t).symplectic_inverse()))
}

/// Moment map F = e^{tΩH} of a single-mode segment (inverse of the label).
pub fn segment_moment_map(kind: Oscillator, t: f64) -> Result<Mat> {
    check_time(t)?;
    Ok(oscillator_map_dd(kind, t).to_mat())
}

/// Label of a sequence of evolutions listed in time order.
///
/// Moment maps chain right to left, F = Fₙ⋯F₁, so the labels chain left to
/// right, S = S₁⋯Sₙ = F⁻¹.
pub fn compose(transforms: &[SymplecticTransform]) -> Result<SymplecticTransform> {
    let Some(first) = transforms.first() else {
        return Ok(SymplecticTransform::identity(1));
    };
    let n = first.dim();
    let mut acc = SymplecticTransform::identity(n / 2);
    for s in transforms {
        if s.dim() != n {
            return Err(Error::Dimension { expected: n, got: s.dim() });
        }
        acc = s.then(&acc);
    }
    Ok(acc)
}

/// Moment map e^{tΩH}. Closed form for the labelled single-mode
/// oscillators, Padé scaling-and-squaring otherwise.
pub fn moment_map(h: &QuadraticHamiltonian, t: f64) -> Result<Mat> {
    check_time(t)?;
    if let Some(kind) = h.closed_form() {
        return segment_moment_map(kind, t);
    }
    Ok(h.drift().scale(t).expm())
}

/// Double-double moment map when `h` has a closed form.
pub fn moment_map_precise(h: &QuadraticHamiltonian, t: f64) -> Result<Option<DdMat>> {
    check_time(t)?;
    Ok(h.closed_form().map(|k| oscillator_map_dd(k, t)))
}

/// Symplectic label of evolving under H for time t, i.e. e^{−tΩH}; agrees
/// with [`symplectic_segment`] on the labelled oscillators.
pub fn matrix_exp_symplectic(h: &QuadraticHamiltonian, t: f64) -> Result<SymplecticTransform> {
    if let Some(p) = moment_map_precise(h, t)? {
        return Ok(SymplecticTransform::from_precise(p.symplectic_inverse()));
    }
    Ok(SymplecticTransform::from_mat_unchecked(symplectic_inverse(&moment_map(h, t)?)))
}

/// Applies `m` directly: r′ = M r, σ′ = M σ Mᵀ.
pub fn evolve_gaussian(
    r: &PhaseVector,
    sigma: &CovarianceMatrix,
    m: &SymplecticTransform,
) -> Result<(PhaseVector, CovarianceMatrix)> {
    evolve_with_matrix(r, sigma, &m.m)
}

pub(crate) fn evolve_with_matrix(
    r: &PhaseVector,
    sigma: &CovarianceMatrix,
    m: &Mat,
) -> Result<(PhaseVector, CovarianceMatrix)> {
    if r.dim() != m.dim() {
        return Err(Error::Dimension { expected: m.dim(), got: r.dim() });
    }
    if sigma.0.dim() != m.dim() {
        return Err(Error::Dimension { expected: m.dim(), got: sigma.0.dim() });
    }
    let r2 = PhaseVector(m.mul_vec(&r.0));
    let s2 = &(m * &sigma.0) * &m.transpose();
    let t = s2.transpose();
    Ok((r2, CovarianceMatrix((&s2 + &t).scale(0.5))))
}

/// D_{r1} D_{r2} = D_{r1+r2} e^{iθ}; returns (r1 + r2, θ = −½ r1ᵀΩr2).
pub fn displacement_compose(r1: &PhaseVector, r2: &PhaseVector) -> Result<(PhaseVector, f64)> {
    if r1.dim() != r2.dim() {
        return Err(Error::Dimension { expected: r1.dim(), got: r2.dim() });
    }
    Ok((r1.add(r2), -0.5 * symplectic_product(&r1.0, &r2.0)))
}

/// Normal form U = e^{iφ} D_{r_tot} Ŝ_tot.
///
/// `symplectic` holds the label S_tot, so moments move by S_tot⁻¹.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianUnitary {
    pub displacement: PhaseVector,
    pub symplectic: SymplecticTransform,
    /// Overall phase, `None` when not tracked.
    pub phase: Option<f64>,
}

impl GaussianUnitary {
    pub fn identity(modes: usize) -> Self {
        GaussianUnitary {
            displacement: PhaseVector::zeros(modes),
            symplectic: SymplecticTransform::identity(modes),
            phase: Some(0.0),
        }
    }

    /// Pure symplectic evolution with moment map `f`.
    pub fn from_moment_map(f: &Mat) -> Self {
        GaussianUnitary {
            displacement: PhaseVector::zeros(f.dim() / 2),
            symplectic: SymplecticTransform::from_mat_unchecked(symplectic_inverse(f)),
            phase: Some(0.0),
        }
    }

    /// Pure symplectic evolution with a double-double moment map.
    pub fn from_precise_moment_map(f: &DdMat) -> Self {
        GaussianUnitary {
            displacement: PhaseVector::zeros(f.dim() / 2),
            symplectic: SymplecticTransform::from_precise(f.symplectic_inverse()),
            phase: Some(0.0),
        }
    }

    /// e^{−iĤt} for Ĥ = ½r̂ᵀHr̂ + r̄ᵀr̂, written as D_{−r̃} Ŝ_F D_{r̃} around
    /// the equilibrium r̃ and brought to normal form.
    pub fn segment(h: &QuadraticHamiltonian, t: f64) -> Result<Self> {
        let base = match moment_map_precise(h, t)? {
            Some(p) => GaussianUnitary::from_precise_moment_map(&p),
            None => GaussianUnitary::from_moment_map(&moment_map(h, t)?),
        };
        base.displaced_about(h, t)
    }

    /// Conjugates a pure symplectic evolution by the equilibrium shift of
    /// `h`, i.e. D_{−r̃} (self) D_{r̃}.
    pub fn displaced_about(self, h: &QuadraticHamiltonian, t: f64) -> Result<Self> {
        let f = self.moment_map();
        let eq = h.equilibrium()?;
        let fe = f.mul_vec(&eq);
        let d: Vec<f64> = fe.iter().zip(&eq).map(|(a, b)| a - b).collect();
        let he = h.matrix().mul_vec(&eq);
        let phase = 0.5 * symplectic_product(&eq, &fe) + 0.5 * t * dot(&eq, &he);
        Ok(GaussianUnitary { displacement: PhaseVector(d), symplectic: self.symplectic, phase: Some(phase) })
    }

    pub fn modes(&self) -> usize {
        self.symplectic.modes()
    }

    /// Moment map F = S_tot⁻¹.
    pub fn moment_map(&self) -> Mat {
        symplectic_inverse(&self.symplectic.m)
    }

    /// S_tot + 1, formed without cancellation when the symplectic part
    /// carries double-double entries.
    pub fn s_plus_one(&self) -> Mat {
        self.symplectic.plus_identity()
    }

    pub fn untracked_phase(mut self) -> Self {
        self.phase = None;
        self
    }

    /// `later ∘ self`.
    pub fn then(&self, later: &GaussianUnitary) -> Result<GaussianUnitary> {
        let n = self.symplectic.dim();
        if later.symplectic.dim() != n {
            return Err(Error::Dimension { expected: n, got: later.symplectic.dim() });
        }
        let f2 = later.moment_map();
        let f2d1 = f2.mul_vec(&self.displacement.0);
        let d: Vec<f64> = later.displacement.0.iter().zip(&f2d1).map(|(a, b)| a + b).collect();
        let phase = match (self.phase, later.phase) {
            (Some(a), Some(b)) => Some(a + b - 0.5 * symplectic_product(&later.displacement.0, &f2d1)),
            _ => None,
        };
        let symplectic = self.symplectic.inverse().then(&later.symplectic.inverse()).inverse();
        Ok(GaussianUnitary { displacement: PhaseVector(d), symplectic, phase })
    }
}

/// Composes unitaries listed in time order.
pub fn gaussian_unitary_compose(segments: &[GaussianUnitary]) -> Result<GaussianUnitary> {
    let Some(first) = segments.first() else {
        return Ok(GaussianUnitary::identity(1));
    };
    let mut acc = GaussianUnitary::identity(first.modes());
    for s in segments {
        acc = acc.then(s)?;
    }
    Ok(acc)
}

/// χ(r̄) = exp(−¼ r̄ᵀΩᵀσΩr̄ + i r̄ᵀΩᵀr).
pub fn characteristic_fn(r: &PhaseVector, sigma: &CovarianceMatrix, rbar: &PhaseVector) -> Result<Complex64> {
    let n = sigma.0.dim();
    if r.dim() != n || rbar.dim() != n {
        return Err(Error::Dimension { expected: n, got: r.dim().min(rbar.dim()) });
    }
    let om = omega(n / 2);
    let w = om.mul_vec(&rbar.0);
    let quad = dot(&w, &sigma.0.mul_vec(&w));
    let lin = dot(&w, &r.0);
    Ok(Complex64::new(-0.25 * quad, lin).exp())
}

/// Normalized Wigner function (πⁿ √det σ)⁻¹ exp(−(r̄−r)ᵀσ⁻¹(r̄−r)).
pub fn wigner_fn(r: &PhaseVector, sigma: &CovarianceMatrix, rbar: &PhaseVector) -> Result<f64> {
    let n = sigma.0.dim();
    if r.dim() != n || rbar.dim() != n {
        return Err(Error::Dimension { expected: n, got: r.dim().min(rbar.dim()) });
    }
    let det = sigma.0.det();
    if !(det > 0.0) {
        return Err(Error::Singular);
    }
    let d: Vec<f64> = rbar.0.iter().zip(&r.0).map(|(a, b)| a - b).collect();
    let y = sigma.0.solve(&d).ok_or(Error::Singular)?;
    let modes = (n / 2) as f64;
    Ok(libm::exp(-dot(&d, &y)) / (libm::pow(PI, modes) * libm::sqrt(det)))
}

/// Equal-weight mixture ½(W₊ + W₋) of the two branches of a cat.
pub fn cat_wigner(
    branches: [(&PhaseVector, &CovarianceMatrix); 2],
    rbar: &PhaseVector,
) -> Result<f64> {
    let a = wigner_fn(branches[0].0, branches[0].1, rbar)?;
    let b = wigner_fn(branches[1].0, branches[1].1, rbar)?;
    Ok(0.5 * (a + b))
}

/// Selected third and fourth moments of a single-mode Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HigherMoments {
    pub x3: f64,
    pub x4: f64,
    pub p4: f64,
    /// ⟨x̂²p̂² + p̂²x̂²⟩ read off χ, i.e. twice the Weyl-ordered moment.
    pub x2p2_sym: f64,
}

/// Gaussian moment identities with the variance symbols read as covariance
/// entries: Var x = σ₁₁/2, Var p = σ₂₂/2, Cov = σ₁₂/2.
pub fn higher_moments(r: &PhaseVector, sigma: &CovarianceMatrix) -> Result<HigherMoments> {
    if r.dim() != 2 || sigma.0.dim() != 2 {
        return Err(Error::Dimension { expected: 2, got: r.dim() });
    }
    let (x, p) = (r.0[0], r.0[1]);
    let vx = 0.5 * sigma.0[(0, 0)];
    let vp = 0.5 * sigma.0[(1, 1)];
    let c = 0.5 * sigma.0[(0, 1)];
    let x2 = x * x;
    let p2 = p * p;
    Ok(HigherMoments {
        x3: x * x2 + 3.0 * x * vx,
        x4: x2 * x2 + 6.0 * x2 * vx + 3.0 * vx * vx,
        p4: p2 * p2 + 6.0 * p2 * vp + 3.0 * vp * vp,
        x2p2_sym: 2.0 * x2 * p2 + 2.0 * x2 * vp + 2.0 * p2 * vx + 8.0 * x * p * c + 2.0 * vx * vp + 4.0 * c * c,
    })
}

/// The printed form of the cross-moment identity,
/// 4σ₁₂² + 4σ₁₂xp + (σ₂₂ + 2p²)(σ₁₁/2 + x²). It agrees with
/// [`higher_moments`] only when σ₁₂ = 0.
pub fn x2p2_printed(r: &PhaseVector, sigma: &CovarianceMatrix) -> f64 {
    let (x, p) = (r.0[0], r.0[1]);
    let s = &sigma.0;
    4.0 * s[(0, 1)] * s[(0, 1)] + 4.0 * s[(0, 1)] * x * p + (s[(1, 1)] + 2.0 * p * p) * (0.5 * s[(0, 0)] + x * x)
}

/// One recorded point of the numerical oracle.
#[derive(Clone, Debug)]
pub struct OracleSample {
    pub t: f64,
    pub r: Vec<f64>,
    pub sigma: Mat,
}

/// Fine-step propagation through a piecewise-constant schedule.
///
/// Each segment is cut into `steps` equal pieces of length h. The
/// homogeneous part advances with the exact step map e^{hA}; the drive
/// b = Ω r̄ is integrated over each step by Simpson's rule, so a schedule
/// with linear terms converges as O(h⁴) and is independent of the
/// equilibrium-shift construction in [`GaussianUnitary::segment`].
/// Samples are recorded at every step boundary.
pub fn evolve_numeric_oracle(
    schedule: &[(QuadraticHamiltonian, f64)],
    r0: &PhaseVector,
    sigma0: &CovarianceMatrix,
    steps: usize,
) -> Result<Vec<OracleSample>> {
    if steps == 0 {
        return Err(Error::OutOfRange { name: "steps", value: 0.0 });
    }
    let n = r0.dim();
    let mut r = r0.0.clone();
    let mut sigma = sigma0.0.clone();
    if sigma.dim() != n {
        return Err(Error::Dimension { expected: n, got: sigma.dim() });
    }
    let mut t = 0.0;
    let mut out = Vec::with_capacity(schedule.len() * steps + 1);
    out.push(OracleSample { t, r: r.clone(), sigma: sigma.clone() });
    for (h, dur) in schedule {
        check_time(*dur)?;
        if h.matrix().dim() != n {
            return Err(Error::Dimension { expected: n, got: h.matrix().dim() });
        }
        let step = dur / steps as f64;
        let f = moment_map(h, step)?;
        let f_half = moment_map(h, 0.5 * step)?;
        let b = omega(n / 2).mul_vec(h.linear());
        let fb = f.mul_vec(&b);
        let fhb = f_half.mul_vec(&b);
        let drive: Vec<f64> = (0..n).map(|i| step / 6.0 * (fb[i] + 4.0 * fhb[i] + b[i])).collect();
        let ft = f.transpose();
        for _ in 0..steps {
            r = f.mul_vec(&r);
            for i in 0..n {
                r[i] += drive[i];
            }
            sigma = &(&f * &sigma) * &ft;
            t += step;
            out.push(OracleSample { t, r: r.clone(), sigma: sigma.clone() });
        }
    }
    Ok(out)
}
