//! Reproducible test inputs: random band-limited Cauchy data and seeds of
//! polynomial Killing fields in low genus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{LaurentLoop, M2};
use crate::jets::{CauchyData, Mode};
use crate::{Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Parameters of a random band-limited generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub n: usize,
    pub period: f64,
    /// Highest Fourier mode.
    pub modes: usize,
    /// Amplitude of mode 1; mode `m` is drawn from `±amp/m`.
    pub amp: f64,
    pub seed: u64,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self { n: 256, period: 2.0 * std::f64::consts::PI, modes: 3, amp: 0.2, seed: 1 }
    }
}

fn random_modes(rng: &mut ChaCha8Rng, k: usize, amp: f64) -> Vec<Mode> {
    (1..=k)
        .map(|m| {
            let a = amp / m as f64;
            Mode { m, cos: rng.gen_range(-a..=a), sin: rng.gen_range(-a..=a) }
        })
        .collect()
}

/// Random smooth periodic `(u, u_y)` with modes `1..=spec.modes` plus means.
pub fn random_cauchy(spec: RandomSpec) -> Result<CauchyData> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let u0 = rng.gen_range(-spec.amp..=spec.amp);
    let uy0 = rng.gen_range(-spec.amp..=spec.amp);
    let um = random_modes(&mut rng, spec.modes, spec.amp);
    let uym = random_modes(&mut rng, spec.modes, spec.amp);
    CauchyData::from_modes(spec.n, spec.period, u0, &um, uy0, &uym)
}

/// Random direction `(δu, δu_y)` drawn like [`random_cauchy`].
pub fn random_direction(spec: RandomSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let cd = random_cauchy(spec)?;
    Ok((cd.u, cd.uy))
}

/// The genus-1 Killing field `2U_λ(u₀, u_y₀)`; its solutions depend on `y` only.
pub fn g1_seed(u0: f64, uy0: f64) -> LaurentLoop {
    let (ep, em) = (u0.exp(), (-u0).exp());
    let z = C64::new(0.0, 0.0);
    LaurentLoop::new(
        -1,
        vec![
            M2::new(z, I * ep, z, z),
            M2::new(-I * uy0, I * em, I * em, I * uy0),
            M2::new(z, z, I * ep, z),
        ],
    )
}

/// A genus-2 Killing field with `u(0) = u0`, `u_x(0) = ux0`, `u_y(0) = uy0`
/// and free upper-right entry `b0` of the constant coefficient.
pub fn g2_seed(u0: f64, ux0: f64, uy0: f64, b0: C64) -> LaurentLoop {
    let (ep, em) = (u0.exp(), (-u0).exp());
    let z = C64::new(0.0, 0.0);
    let al = C64::new(ux0, -uy0);
    let x0 = M2::new(al, b0, I * em, -al);
    LaurentLoop::new(
        -1,
        vec![M2::new(z, I * ep, z, z), x0, -x0.adjoint(), M2::new(z, z, I * ep, z)],
    )
}
