//! Kolmogorov turbulence statistics and spectral phase-screen synthesis.
//!
//! Screens are synthesized by filtering complex white noise with the square
//! root of the Kolmogorov phase spectrum on an FFT grid. The complex result
//! carries two independent real screens (its real and imaginary parts). The
//! FFT grid omits all power below its lowest frequency bin, so `subgrid_levels`
//! rings of 3×3 subharmonic samples, each a factor three finer in frequency,
//! are added directly in the spatial domain.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::seq::SliceRandom;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::rng::{derive_seed, rng_from_seed};

/// Coefficient of the Kolmogorov phase structure function.
pub const STRUCTURE_COEFF: f64 = 6.88;
/// Fried-parameter prefactor.
pub const FRIED_COEFF: f64 = 0.185;
/// Coefficient of the Kolmogorov refractive-index spectrum.
pub const INDEX_SPECTRUM_COEFF: f64 = 0.033;

/// Default number of subharmonic levels added to each screen.
pub const DEFAULT_SUBGRID_LEVELS: u32 = 3;

/// Midpoint sub-samples per axis when averaging the spectrum over a
/// subharmonic cell.
const CELL_AVERAGE_SAMPLES: usize = 16;

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

/// `r0 = 0.185 (λ² / (C_n² z))^{3/5}`.
pub fn fried_parameter(cn2: f64, z: f64, lambda: f64) -> Result<f64> {
    let cn2 = positive("cn2", cn2)?;
    let z = positive("z", z)?;
    let lambda = positive("lambda", lambda)?;
    Ok(FRIED_COEFF * (lambda * lambda / (cn2 * z)).powf(0.6))
}

/// `D_θ(x) = 6.88 (x/r0)^{5/3}`.
pub fn structure_fn_kolmogorov(x: f64, r0: f64) -> f64 {
    STRUCTURE_COEFF * (x / r0).powf(5.0 / 3.0)
}

/// `D'_θ(x) = 6.88 x² / (w_p^{1/3} r0^{5/3})`.
pub fn structure_fn_quadratic(x: f64, r0: f64, w_p: f64) -> f64 {
    STRUCTURE_COEFF * x * x / (w_p.cbrt() * r0.powf(5.0 / 3.0))
}

/// Tilt variance `σ²` whose linear-ramp screens realize [`structure_fn_quadratic`].
pub fn quadratic_tilt_variance(r0: f64, w_p: f64) -> f64 {
    STRUCTURE_COEFF / (w_p.cbrt() * r0.powf(5.0 / 3.0))
}

/// `Φ_θ(a) = 2π k² z Φ_n(2πa)` with `Φ_n(κ) = 0.033 C_n² |κ|^{-11/3}`, `k = 2π/λ`.
///
/// This is a density per unit `κ²` (angular spatial frequency). The structure
/// function follows from `D(r) = 2 ∫ Φ_θ(κ)[1 - cos(κ·r)] d²κ`.
pub fn phase_psd(a: [f64; 2], cn2: f64, z: f64, lambda: f64) -> Result<f64> {
    let cn2 = positive("cn2", cn2)?;
    let z = positive("z", z)?;
    let lambda = positive("lambda", lambda)?;
    let mag = a[0].hypot(a[1]);
    if !(mag > 0.0 && mag.is_finite()) {
        return Err(Error::param(
            "a",
            "spectrum is singular at zero spatial frequency",
        ));
    }
    let k = 2.0 * PI / lambda;
    Ok(2.0 * PI * k * k * z * INDEX_SPECTRUM_COEFF * cn2 * (2.0 * PI * mag).powf(-11.0 / 3.0))
}

/// [`phase_psd`] expressed through the Fried parameter (`k² C_n² z = (2π)² (0.185/r0)^{5/3}`).
pub fn phase_psd_r0(a_mag: f64, r0: f64) -> f64 {
    let k2_cn2_z = 4.0 * PI * PI * (FRIED_COEFF / r0).powf(5.0 / 3.0);
    2.0 * PI * INDEX_SPECTRUM_COEFF * k2_cn2_z * (2.0 * PI * a_mag).powf(-11.0 / 3.0)
}

/// Spectrum per unit (cycles/length)², the density the synthesis samples:
/// `D(r) = 2 ∫ S(a)[1 - cos(2π a·r)] d²a`.
pub fn cyclic_phase_psd(a_mag: f64, r0: f64) -> f64 {
    4.0 * PI * PI * phase_psd_r0(a_mag, r0)
}

/// Turbulence strength bundle for one propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbulenceParams {
    pub cn2: Option<f64>,
    pub z: Option<f64>,
    pub lambda: Option<f64>,
    pub r0: f64,
    /// `beam_radius / r0`.
    pub w: f64,
}

impl TurbulenceParams {
    pub fn from_physical(cn2: f64, z: f64, lambda: f64, beam_radius: f64) -> Result<Self> {
        let r0 = fried_parameter(cn2, z, lambda)?;
        let beam_radius = positive("beam_radius", beam_radius)?;
        Ok(Self {
            cn2: Some(cn2),
            z: Some(z),
            lambda: Some(lambda),
            r0,
            w: beam_radius / r0,
        })
    }

    /// `w = 0` gives `r0 = ∞` (no turbulence).
    pub fn from_strength(w: f64, beam_radius: f64) -> Result<Self> {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::param("w", format!("must be non-negative, got {w}")));
        }
        let beam_radius = positive("beam_radius", beam_radius)?;
        Ok(Self {
            cn2: None,
            z: None,
            lambda: None,
            r0: beam_radius / w,
            w,
        })
    }
}

/// Which half of a complex synthesis a screen came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScreenPart {
    Real,
    Imag,
    /// Not from a complex synthesis (zero or externally built screens).
    Other,
}

impl ScreenPart {
    fn tag(self) -> &'static str {
        match self {
            ScreenPart::Real => "real",
            ScreenPart::Imag => "imag",
            ScreenPart::Other => "other",
        }
    }
}

/// One realization of a random phase on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub theta: Vec<f64>,
    pub n: usize,
    pub delta: f64,
    pub r0: f64,
    pub seed: u64,
    pub subgrid_levels: u32,
    pub part: ScreenPart,
}

/// Anything that can supply phase samples on a quadrature grid.
pub trait ScreenPhase: Sync {
    fn phases_on(&self, grid: &GridSpec) -> Result<Cow<'_, [f64]>>;
}

impl PhaseScreen {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            theta: vec![0.0; grid.len()],
            n: grid.n,
            delta: grid.spacing,
            r0: f64::INFINITY,
            seed: 0,
            subgrid_levels: 0,
            part: ScreenPart::Other,
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let xs = grid.coords();
        let mut theta = Vec::with_capacity(grid.len());
        for &y in &xs {
            for &x in &xs {
                theta.push(f(x, y));
            }
        }
        Self {
            theta,
            ..Self::zeros(grid)
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            spacing: self.delta,
        }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.theta[row * self.n + col]
    }

    pub fn mean(&self) -> f64 {
        self.theta.iter().sum::<f64>() / self.theta.len() as f64
    }

    /// Flat little-endian layout: `n: u64, delta: f64, r0: f64, seed: u64`,
    /// then `n²` row-major `f64` radians.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.theta.len());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.r0.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in &self.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Inverse of [`PhaseScreen::to_bytes`]. Subgrid depth and part are not in
    /// the binary layout and come back as `0` / [`ScreenPart::Other`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 32 {
            return Err(Error::Format(format!("screen header needs 32 bytes, got {}", bytes.len())));
        }
        let word = |i: usize| -> [u8; 8] { bytes[8 * i..8 * i + 8].try_into().unwrap() };
        let n = u64::from_le_bytes(word(0)) as usize;
        let delta = f64::from_le_bytes(word(1));
        let r0 = f64::from_le_bytes(word(2));
        let seed = u64::from_le_bytes(word(3));
        let expected = n
            .checked_mul(n)
            .and_then(|m| m.checked_mul(8))
            .and_then(|m| m.checked_add(32))
            .ok_or_else(|| Error::Format(format!("implausible screen side {n}")))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "screen of side {n} needs {expected} bytes, got {}",
                bytes.len()
            )));
        }
        let theta = bytes[32..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            theta,
            n,
            delta,
            r0,
            seed,
            subgrid_levels: 0,
            part: ScreenPart::Other,
        })
    }

    pub fn metadata_text(&self) -> String {
        format!(
            "format = phase-screen-f64le\nn = {}\ndelta = {:e}\nr0 = {:e}\nseed = {}\nsubgrid_levels = {}\npart = {}\nunits = radians\nheader_bytes = 32\n",
            self.n,
            self.delta,
            self.r0,
            self.seed,
            self.subgrid_levels,
            self.part.tag()
        )
    }

    /// Writes the binary screen and a `.txt` metadata sidecar next to it.
    pub fn write_files(&self, bin_path: &Path) -> Result<()> {
        let file = fs::File::create(bin_path).map_err(|e| Error::io(bin_path, e))?;
        let mut w = BufWriter::new(file);
        w.write_all(&self.to_bytes()).map_err(|e| Error::io(bin_path, e))?;
        w.flush().map_err(|e| Error::io(bin_path, e))?;
        let side = bin_path.with_extension("txt");
        fs::write(&side, self.metadata_text()).map_err(|e| Error::io(&side, e))
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}

impl ScreenPhase for PhaseScreen {
    fn phases_on(&self, grid: &GridSpec) -> Result<Cow<'_, [f64]>> {
        let own = self.grid();
        if own.n != grid.n || (own.spacing - grid.spacing).abs() > 1e-12 * grid.spacing {
            return Err(Error::param(
                "screen",
                format!(
                    "screen grid (n={}, delta={:e}) does not match quadrature grid (n={}, delta={:e})",
                    own.n, own.spacing, grid.n, grid.spacing
                ),
            ));
        }
        Ok(Cow::Borrowed(&self.theta))
    }
}

/// Parameters of a Kolmogorov screen synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenSpec {
    pub n: usize,
    pub delta: f64,
    pub r0: f64,
    pub subgrid_levels: u32,
}

impl ScreenSpec {
    pub fn new(n: usize, delta: f64, r0: f64, subgrid_levels: u32) -> Result<Self> {
        if n < 128 || !n.is_power_of_two() {
            return Err(Error::param("n", format!("must be a power of two ≥ 128, got {n}")));
        }
        let delta = positive("delta", delta)?;
        let r0 = positive("r0", r0)?;
        if delta > r0 / 2.0 {
            return Err(Error::InsufficientResolution(format!(
                "sample spacing {delta:e} exceeds r0/2 = {:e}",
                r0 / 2.0
            )));
        }
        Ok(Self {
            n,
            delta,
            r0,
            subgrid_levels,
        })
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            n: self.n,
            spacing: self.delta,
        }
    }
}

fn complex_normal(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn fft_2d_inverse(buf: &mut [Complex64], n: usize) {
    let fft = FftPlanner::new().plan_fft_inverse(n);
    fft.process(buf);
    transpose(buf, n);
    fft.process(buf);
    transpose(buf, n);
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in (r + 1)..n {
            buf.swap(r * n + c, c * n + r);
        }
    }
}

/// Mean of [`cyclic_phase_psd`] over a square cell of side `h` centred at `(fx, fy)`.
fn cell_averaged_psd(fx: f64, fy: f64, h: f64, r0: f64) -> f64 {
    let m = CELL_AVERAGE_SAMPLES;
    let mut acc = 0.0;
    for i in 0..m {
        let ox = ((i as f64 + 0.5) / m as f64 - 0.5) * h;
        for j in 0..m {
            let oy = ((j as f64 + 0.5) / m as f64 - 0.5) * h;
            acc += cyclic_phase_psd((fx + ox).hypot(fy + oy), r0);
        }
    }
    acc / (m * m) as f64
}

/// Synthesizes two independent Kolmogorov screens (real and imaginary parts
/// of one complex synthesis).
pub fn generate_screen(spec: &ScreenSpec, seed: u64) -> (PhaseScreen, PhaseScreen) {
    let n = spec.n;
    let df = 1.0 / (n as f64 * spec.delta);
    let mut rng = rng_from_seed(seed);

    let freq = |k: usize| -> f64 {
        let k = k as i64;
        let signed = if k < (n as i64 + 1) / 2 { k } else { k - n as i64 };
        signed as f64 * df
    };

    let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
    for row in 0..n {
        let fy = freq(row);
        for col in 0..n {
            let chi = complex_normal(&mut rng);
            if row == 0 && col == 0 {
                continue;
            }
            let f = freq(col).hypot(fy);
            let amp = (2.0 * cyclic_phase_psd(f, spec.r0)).sqrt() * df;
            buf[row * n + col] = chi * amp;
        }
    }
    fft_2d_inverse(&mut buf, n);

    if spec.subgrid_levels > 0 {
        let xs = spec.grid().coords();
        let mut low = vec![Complex64::new(0.0, 0.0); n * n];
        let mut ex = vec![Complex64::new(0.0, 0.0); n];
        let mut ey = vec![Complex64::new(0.0, 0.0); n];
        for level in 1..=spec.subgrid_levels {
            let h = df / 3f64.powi(level as i32);
            for j in -1i32..=1 {
                for i in -1i32..=1 {
                    if i == 0 && j == 0 {
                        continue;
                    }
                    let (fx, fy) = (f64::from(i) * h, f64::from(j) * h);
                    let amp = (2.0 * cell_averaged_psd(fx, fy, h, spec.r0)).sqrt() * h;
                    let c = complex_normal(&mut rng) * amp;
                    for (k, &x) in xs.iter().enumerate() {
                        ex[k] = Complex64::from_polar(1.0, 2.0 * PI * fx * x);
                        ey[k] = Complex64::from_polar(1.0, 2.0 * PI * fy * x);
                    }
                    for (row, &eyv) in ey.iter().enumerate() {
                        let cy = c * eyv;
                        let line = &mut low[row * n..(row + 1) * n];
                        for (v, &exv) in line.iter_mut().zip(&ex) {
                            *v += cy * exv;
                        }
                    }
                }
            }
        }
        let mean = low.iter().sum::<Complex64>() / (n * n) as f64;
        for (b, l) in buf.iter_mut().zip(&low) {
            *b += l - mean;
        }
    }

    let make = |part: ScreenPart, theta: Vec<f64>| PhaseScreen {
        theta,
        n,
        delta: spec.delta,
        r0: spec.r0,
        seed,
        subgrid_levels: spec.subgrid_levels,
        part,
    };
    (
        make(ScreenPart::Real, buf.iter().map(|z| z.re).collect()),
        make(ScreenPart::Imag, buf.iter().map(|z| z.im).collect()),
    )
}

/// Generates `count` screens from `count.div_ceil(2)` syntheses with seeds
/// derived from `master_seed` and the synthesis index; a trailing odd screen
/// is dropped.
pub fn generate_ensemble(spec: &ScreenSpec, count: usize, master_seed: u64) -> Vec<PhaseScreen> {
    let calls = count.div_ceil(2);
    let mut out: Vec<PhaseScreen> = (0..calls)
        .into_par_iter()
        .flat_map_iter(|k| {
            let (a, b) = generate_screen(spec, derive_seed(master_seed, &[k as u64]));
            [a, b]
        })
        .collect();
    out.truncate(count);
    out
}

/// Structure-function estimate at one separation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureEstimate {
    pub separation_samples: usize,
    pub separation: f64,
    pub value: f64,
    pub std_error: f64,
}

/// Ensemble average of `(θ(x+Δx) - θ(x))²` over all in-grid positions along
/// both axes and all screens.
pub fn estimate_structure_fn(
    screens: &[PhaseScreen],
    separations: &[usize],
) -> Result<Vec<StructureEstimate>> {
    let first = screens
        .first()
        .ok_or(Error::EmptyEnsemble("structure-function estimate needs screens"))?;
    let (n, delta) = (first.n, first.delta);
    if screens.iter().any(|s| s.n != n || s.delta != delta) {
        return Err(Error::param("screens", "all screens must share one grid"));
    }
    if let Some(&bad) = separations.iter().find(|&&s| s == 0 || s >= n) {
        return Err(Error::param("separations", format!("separation {bad} outside 1..{n}")));
    }

    separations
        .iter()
        .map(|&s| {
            let per_screen: Vec<f64> = screens
                .par_iter()
                .map(|scr| {
                    let mut acc = 0.0;
                    for r in 0..n {
                        let line = &scr.theta[r * n..(r + 1) * n];
                        for c in 0..n - s {
                            let d = line[c + s] - line[c];
                            acc += d * d;
                        }
                    }
                    for r in 0..n - s {
                        let (a, b) = (&scr.theta[r * n..(r + 1) * n], &scr.theta[(r + s) * n..(r + s + 1) * n]);
                        for c in 0..n {
                            let d = b[c] - a[c];
                            acc += d * d;
                        }
                    }
                    acc / (2 * n * (n - s)) as f64
                })
                .collect();
            let m = per_screen.len() as f64;
            let mean = per_screen.iter().sum::<f64>() / m;
            let var = if per_screen.len() > 1 {
                per_screen.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            Ok(StructureEstimate {
                separation_samples: s,
                separation: s as f64 * delta,
                value: mean,
                std_error: (var / m).sqrt(),
            })
        })
        .collect()
}

/// A random linear phase ramp `θ(x) = a·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltScreen {
    pub gradient: [f64; 2],
    pub seed: u64,
}

impl TiltScreen {
    pub fn phase(&self, x: f64, y: f64) -> f64 {
        self.gradient[0] * x + self.gradient[1] * y
    }

    pub fn sample(&self, grid: GridSpec) -> PhaseScreen {
        PhaseScreen {
            seed: self.seed,
            ..PhaseScreen::from_fn(grid, |x, y| self.phase(x, y))
        }
    }
}

impl ScreenPhase for TiltScreen {
    fn phases_on(&self, grid: &GridSpec) -> Result<Cow<'_, [f64]>> {
        Ok(Cow::Owned(self.sample(*grid).theta))
    }
}

/// Tilt with gradient `a ~ N(0, σ² I)`.
pub fn generate_tilt_screen(sigma2: f64, seed: u64) -> Result<TiltScreen> {
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::param("sigma2", format!("must be non-negative, got {sigma2}")));
    }
    let mut rng = rng_from_seed(seed);
    let s = sigma2.sqrt();
    let gx: f64 = rng.sample(StandardNormal);
    let gy: f64 = rng.sample(StandardNormal);
    Ok(TiltScreen {
        gradient: [s * gx, s * gy],
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiltSampling {
    /// Independent draws, one derived seed per screen.
    Independent,
    /// Gradient magnitude and direction each stratified into `count` equal
    /// probability bins, paired by independent random permutations. Every
    /// screen is still marginally `N(0, σ² I)`.
    Stratified,
}

pub fn tilt_ensemble(
    sigma2: f64,
    count: usize,
    seed: u64,
    sampling: TiltSampling,
) -> Result<Vec<TiltScreen>> {
    if count == 0 {
        return Err(Error::EmptyEnsemble("tilt ensemble needs at least one screen"));
    }
    match sampling {
        TiltSampling::Independent => (0..count)
            .map(|k| generate_tilt_screen(sigma2, derive_seed(seed, &[k as u64])))
            .collect(),
        TiltSampling::Stratified => {
            if !(sigma2.is_finite() && sigma2 >= 0.0) {
                return Err(Error::param("sigma2", format!("must be non-negative, got {sigma2}")));
            }
            let mut rng = rng_from_seed(seed);
            let mut radial: Vec<usize> = (0..count).collect();
            let mut angular: Vec<usize> = (0..count).collect();
            radial.shuffle(&mut rng);
            angular.shuffle(&mut rng);
            let s = sigma2.sqrt();
            Ok((0..count)
                .map(|k| {
                    let u = (radial[k] as f64 + rng.random::<f64>()) / count as f64;
                    let v = (angular[k] as f64 + rng.random::<f64>()) / count as f64;
                    // Rayleigh quantile of |a|
                    let r = s * (-2.0 * (-u).ln_1p()).sqrt();
                    let phi = 2.0 * PI * v;
                    TiltScreen {
                        gradient: [r * phi.cos(), r * phi.sin()],
                        seed: derive_seed(seed, &[k as u64]),
                    }
                })
                .collect())
        }
    }
}
