//! Rician air-to-ground channels between the base station (BS), the aerial
//! RIS and the ground terminals.
//!
//! Both hops mix a deterministic line-of-sight component built from uniform
//! linear array steering vectors with i.i.d. circularly symmetric complex
//! Gaussian scattering, scaled by a distance based path loss:
//!
//! ```text
//! G = sqrt(λ0) / D^α · ( sqrt(β/(1+β)) · G_los + sqrt(1/(1+β)) · G_nlos )
//! ```

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Complex};
use crate::system::SystemDims;

/// Node positions in meters. Ground terminals live on the `z = 0` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub bs: [f64; 3],
    pub ris: [f64; 3],
    pub users: Vec<[f64; 2]>,
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let all = self
            .bs
            .iter()
            .chain(&self.ris)
            .chain(self.users.iter().flatten());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::config(
                "scenario.geometry",
                "coordinates must be finite",
            ));
        }
        if self.ris[2] <= 0.0 {
            return Err(Error::config(
                "scenario.geometry.ris",
                "RIS altitude must be > 0",
            ));
        }
        if self.users.is_empty() {
            return Err(Error::config("scenario.geometry.users", "K ≥ 1 required"));
        }
        Ok(())
    }

    pub fn user(&self, k: usize) -> [f64; 3] {
        let [x, y] = self.users[k];
        [x, y, 0.0]
    }

    pub fn tr_distance(&self) -> f64 {
        distance_3d(self.bs, self.ris)
    }

    pub fn rk_distance(&self, k: usize) -> f64 {
        distance_3d(self.ris, self.user(k))
    }

    /// `k` users spaced evenly along the perimeter of a `side` meter square
    /// with one corner at the origin, starting from `(side, 0)` and walking
    /// counter-clockwise.
    pub fn square_perimeter_users(k: usize, side: f64) -> Vec<[f64; 2]> {
        (0..k)
            .map(|i| {
                let s = 4.0 * side * i as f64 / k as f64;
                let (edge, t) = ((s / side).floor() as usize, s % side);
                match edge % 4 {
                    0 => [side, t],
                    1 => [side - t, side],
                    2 => [0.0, side - t],
                    _ => [t, 0.0],
                }
            })
            .collect()
    }
}

pub fn distance_3d(p: [f64; 3], q: [f64; 3]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Angles of the BS to RIS hop, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrAngles {
    pub elevation_aod: f64,
    pub azimuth_aod: f64,
    pub azimuth_aoa: f64,
    pub elevation_aoa: f64,
}

/// Departure angles of the RIS to user hop, radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RkAngles {
    pub azimuth_aod: f64,
    pub elevation_aod: f64,
}

/// The three scalar direction cosines that drive the steering vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    /// `sin(elevation) · cos(azimuth)` at the BS array.
    AodTr { elevation: f64, azimuth: f64 },
    /// `cos(azimuth) · sin(elevation)` at the RIS.
    AoaTr { azimuth: f64, elevation: f64 },
    /// `cos(azimuth) · sin(elevation)` leaving the RIS towards a user.
    AodRk { azimuth: f64, elevation: f64 },
}

pub fn directional_component(dir: Direction) -> f64 {
    match dir {
        Direction::AodTr { elevation, azimuth } => elevation.sin() * azimuth.cos(),
        Direction::AoaTr { azimuth, elevation } | Direction::AodRk { azimuth, elevation } => {
            azimuth.cos() * elevation.sin()
        }
    }
}

impl TrAngles {
    pub fn aod(&self) -> f64 {
        directional_component(Direction::AodTr {
            elevation: self.elevation_aod,
            azimuth: self.azimuth_aod,
        })
    }

    pub fn aoa(&self) -> f64 {
        directional_component(Direction::AoaTr {
            azimuth: self.azimuth_aoa,
            elevation: self.elevation_aoa,
        })
    }
}

impl RkAngles {
    pub fn aod(&self) -> f64 {
        directional_component(Direction::AodRk {
            azimuth: self.azimuth_aod,
            elevation: self.elevation_aod,
        })
    }
}

/// Angles implied by the node positions for arrays laid out along the x axis
/// (elevations measured from zenith, azimuths from the x axis).
pub fn angles_from_geometry(geometry: &Geometry) -> (TrAngles, Vec<RkAngles>) {
    fn polar(v: [f64; 3]) -> (f64, f64) {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let elevation = if r > 0.0 {
            (v[2] / r).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        (elevation, v[1].atan2(v[0]))
    }
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];

    let (el_d, az_d) = polar(sub(geometry.ris, geometry.bs));
    let (el_a, az_a) = polar(sub(geometry.bs, geometry.ris));
    let tr = TrAngles {
        elevation_aod: el_d,
        azimuth_aod: az_d,
        azimuth_aoa: az_a,
        elevation_aoa: el_a,
    };
    let rk = (0..geometry.users.len())
        .map(|k| {
            let (el, az) = polar(sub(geometry.user(k), geometry.ris));
            RkAngles {
                azimuth_aod: az,
                elevation_aod: el,
            }
        })
        .collect();
    (tr, rk)
}

/// How the reference path loss and the distance enter the channel amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathLoss {
    /// `sqrt(λ0) / D^α` on the amplitude, so power falls as `λ0 / D^(2α)`.
    #[default]
    Amplitude,
    /// `sqrt(λ0 / D^α)` on the amplitude, so power falls as `λ0 / D^α`.
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    /// Path loss at the 1 m reference distance (linear).
    pub lambda0: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Rician factor (linear).
    pub beta: f64,
    /// Antenna separation as a fraction of the carrier wavelength.
    pub upsilon_over_lambda: f64,
    pub tr_angles: TrAngles,
    pub rk_angles: Vec<RkAngles>,
    pub path_loss: PathLoss,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(Error::config(
                "scenario.channel.lambda0",
                "lambda0 > 0 required",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(
                "scenario.channel.alpha",
                "alpha > 0 required",
            ));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("scenario.channel.beta", "beta ≥ 0 required"));
        }
        if !(self.upsilon_over_lambda > 0.0 && self.upsilon_over_lambda.is_finite()) {
            return Err(Error::config(
                "scenario.channel.upsilon_over_lambda",
                "upsilon_over_lambda > 0 required",
            ));
        }
        let t = &self.tr_angles;
        let angles = [
            t.elevation_aod,
            t.azimuth_aod,
            t.azimuth_aoa,
            t.elevation_aoa,
        ]
        .into_iter()
        .chain(
            self.rk_angles
                .iter()
                .flat_map(|a| [a.azimuth_aod, a.elevation_aod]),
        );
        for a in angles {
            if !a.is_finite() {
                return Err(Error::config("scenario.channel", "angles must be finite"));
            }
        }
        Ok(())
    }

    /// Weights of the LoS and NLoS parts; their squares sum to one.
    pub fn mixture_weights(&self) -> (f64, f64) {
        (
            (self.beta / (1.0 + self.beta)).sqrt(),
            (1.0 / (1.0 + self.beta)).sqrt(),
        )
    }
}

/// Deterministic amplitude prefactor for a hop of length `distance`.
pub fn path_loss_prefactor(lambda0: f64, alpha: f64, distance: f64, mode: PathLoss) -> f64 {
    match mode {
        PathLoss::Amplitude => lambda0.sqrt() / distance.powf(alpha),
        PathLoss::Power => (lambda0 / distance.powf(alpha)).sqrt(),
    }
}

/// ULA response `[1, e^{-j2πΥ/λ·c}, …, e^{-j2πΥ/λ·(n-1)c}]ᵀ`.
pub fn steering_vector(n: usize, upsilon_over_lambda: f64, component: f64) -> Result<CMatrix> {
    if n == 0 {
        return Err(Error::Empty("steering_vector"));
    }
    let step = TAU * upsilon_over_lambda * component;
    let entries = (0..n)
        .map(|m| {
            if m == 0 {
                Complex::new(1.0, 0.0)
            } else {
                Complex::from_polar(1.0, -step * m as f64)
            }
        })
        .collect();
    CMatrix::column(entries)
}

/// Rank-one LoS matrix (n × m): arrival steering vector times the transposed
/// departure steering vector.
pub fn los_mimo(
    n: usize,
    m: usize,
    upsilon_over_lambda: f64,
    aoa_component: f64,
    aod_component: f64,
) -> Result<CMatrix> {
    let arrival = steering_vector(n, upsilon_over_lambda, aoa_component)?;
    let departure = steering_vector(m, upsilon_over_lambda, aod_component)?;
    Ok(CMatrix::from_fn(n, m, |p, q| {
        arrival[(p, 0)] * departure[(q, 0)]
    }))
}

/// Matrix of i.i.d. `CN(0, 1)` entries, drawn row-major.
pub fn sample_nlos(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// BS to RIS, N × M.
    pub g_tr: CMatrix,
    /// RIS to user k, N × 1 each.
    pub g_rk: Vec<CMatrix>,
}

/// Precomputed deterministic parts of both hops for a fixed scenario.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    dims: SystemDims,
    tr_prefactor: f64,
    rk_prefactors: Vec<f64>,
    los_weight: f64,
    nlos_weight: f64,
    los_tr: CMatrix,
    los_rk: Vec<CMatrix>,
}

impl ChannelModel {
    pub fn new(geometry: &Geometry, params: &ChannelParams, dims: SystemDims) -> Result<Self> {
        geometry.validate()?;
        params.validate()?;
        if geometry.users.len() != dims.k {
            return Err(Error::config(
                "scenario.geometry.users",
                format!(
                    "{} positions given for K = {}",
                    geometry.users.len(),
                    dims.k
                ),
            ));
        }
        if params.rk_angles.len() != dims.k {
            return Err(Error::config(
                "scenario.channel.rk_angles",
                format!(
                    "{} angle pairs given for K = {}",
                    params.rk_angles.len(),
                    dims.k
                ),
            ));
        }
        let d_tr = geometry.tr_distance();
        if d_tr == 0.0 {
            return Err(Error::SingularGeometry("BS and RIS"));
        }
        let tr_prefactor =
            path_loss_prefactor(params.lambda0, params.alpha, d_tr, params.path_loss);
        let mut rk_prefactors = Vec::with_capacity(dims.k);
        for k in 0..dims.k {
            let d = geometry.rk_distance(k);
            if d == 0.0 {
                return Err(Error::SingularGeometry("RIS and user"));
            }
            rk_prefactors.push(path_loss_prefactor(
                params.lambda0,
                params.alpha,
                d,
                params.path_loss,
            ));
        }
        let (los_weight, nlos_weight) = params.mixture_weights();
        let los_tr = los_mimo(
            dims.n,
            dims.m,
            params.upsilon_over_lambda,
            params.tr_angles.aoa(),
            params.tr_angles.aod(),
        )?;
        let los_rk = params
            .rk_angles
            .iter()
            .map(|a| steering_vector(dims.n, params.upsilon_over_lambda, a.aod()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims,
            tr_prefactor,
            rk_prefactors,
            los_weight,
            nlos_weight,
            los_tr,
            los_rk,
        })
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn tr_prefactor(&self) -> f64 {
        self.tr_prefactor
    }

    pub fn rk_prefactor(&self, k: usize) -> f64 {
        self.rk_prefactors[k]
    }

    pub fn los_weight(&self) -> f64 {
        self.los_weight
    }

    pub fn nlos_weight(&self) -> f64 {
        self.nlos_weight
    }

    pub fn los_tr(&self) -> &CMatrix {
        &self.los_tr
    }

    pub fn los_rk(&self, k: usize) -> &CMatrix {
        &self.los_rk[k]
    }

    /// The deterministic (mean) part of the BS to RIS channel.
    pub fn mean_tr(&self) -> CMatrix {
        self.los_tr.scale(self.tr_prefactor * self.los_weight)
    }

    pub fn mean_rk(&self, k: usize) -> CMatrix {
        self.los_rk[k].scale(self.rk_prefactors[k] * self.los_weight)
    }

    fn mix(&self, los: &CMatrix, nlos: &CMatrix, prefactor: f64) -> CMatrix {
        let mut out = nlos.clone();
        for (o, l) in out.data_mut().iter_mut().zip(los.data()) {
            let z = l * self.los_weight + *o * self.nlos_weight;
            *o = z * prefactor;
        }
        out
    }

    /// Draws the BS to RIS scattering first, then each user's in order.
    pub fn sample(&self, rng: &mut impl Rng) -> ChannelRealization {
        let nlos_tr = sample_nlos(self.dims.n, self.dims.m, rng);
        let g_tr = self.mix(&self.los_tr, &nlos_tr, self.tr_prefactor);
        let g_rk = (0..self.dims.k)
            .map(|k| {
                let nlos = sample_nlos(self.dims.n, 1, rng);
                self.mix(&self.los_rk[k], &nlos, self.rk_prefactors[k])
            })
            .collect();
        ChannelRealization { g_tr, g_rk }
    }
}

pub fn sample_channel(
    geometry: &Geometry,
    params: &ChannelParams,
    dims: SystemDims,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    Ok(ChannelModel::new(geometry, params, dims)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn dims(m: usize, n: usize, k: usize) -> SystemDims {
        SystemDims::new(m, n, k).unwrap()
    }

    fn params(beta: f64, k: usize) -> ChannelParams {
        ChannelParams {
            lambda0: 1.0,
            alpha: 2.0,
            beta,
            upsilon_over_lambda: 0.5,
            tr_angles: TrAngles {
                elevation_aod: 0.7,
                azimuth_aod: 0.3,
                azimuth_aoa: 1.1,
                elevation_aoa: 0.4,
            },
            rk_angles: vec![
                RkAngles {
                    azimuth_aod: 0.2,
                    elevation_aod: 0.9
                };
                k
            ],
            path_loss: PathLoss::Amplitude,
        }
    }

    /// BS and RIS exactly 1 m apart, user 1 m below the RIS.
    fn unit_geometry() -> Geometry {
        Geometry {
            bs: [0.0, 0.0, 1.0],
            ris: [0.0, 0.0, 2.0],
            users: vec![[0.0, 0.0]],
        }
    }

    #[test]
    fn distances() {
        assert_eq!(distance_3d([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]), 0.0);
        assert_eq!(distance_3d([0.0; 3], [3.0, 4.0, 0.0]), 5.0);
        assert_eq!(distance_3d([1.0, 2.0, 3.0], [4.0, 6.0, 3.0]), 5.0);
    }

    #[test]
    fn direction_cosines() {
        let aod = Direction::AodTr {
            elevation: FRAC_PI_2,
            azimuth: 0.0,
        };
        assert_eq!(directional_component(aod), 1.0);
        for elevation in [0.0, 0.4, 2.0] {
            let aoa = Direction::AoaTr {
                azimuth: FRAC_PI_2,
                elevation,
            };
            assert!(directional_component(aoa).abs() < 1e-15);
        }
        let rk = Direction::AodRk {
            azimuth: 0.0,
            elevation: FRAC_PI_6,
        };
        assert!((directional_component(rk) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn steering_vector_cases() {
        let ones = steering_vector(5, 0.5, 0.0).unwrap();
        assert!(ones.data().iter().all(|z| *z == Complex::new(1.0, 0.0)));
        assert_eq!(
            steering_vector(1, 0.3, 0.8).unwrap().data(),
            &[Complex::new(1.0, 0.0)]
        );
        let alt = steering_vector(4, 0.5, 1.0).unwrap();
        for (m, want) in [1.0, -1.0, 1.0, -1.0].into_iter().enumerate() {
            assert!((alt[(m, 0)] - Complex::new(want, 0.0)).norm() < 1e-12);
        }
        let v = steering_vector(16, 0.37, -0.81).unwrap();
        assert_eq!(v[(0, 0)], Complex::new(1.0, 0.0));
        assert!(v.data().iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
        assert!(matches!(steering_vector(0, 0.5, 0.1), Err(Error::Empty(_))));
    }

    #[test]
    fn los_mimo_cases() {
        let ones = los_mimo(3, 2, 0.5, 0.0, 0.0).unwrap();
        assert!(ones.data().iter().all(|z| *z == Complex::new(1.0, 0.0)));
        assert_eq!(
            los_mimo(1, 1, 0.5, 0.4, 0.9).unwrap()[(0, 0)],
            Complex::new(1.0, 0.0)
        );

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let lam: f64 = rng.random_range(-1.0..1.0);
            let gam: f64 = rng.random_range(-1.0..1.0);
            let ul: f64 = rng.random_range(0.1..1.0);
            let g = los_mimo(6, 4, ul, lam, gam).unwrap();
            for p in 0..6 {
                for q in 0..4 {
                    let phase = -TAU * ul * (p as f64 * lam + q as f64 * gam);
                    let want = Complex::new(phase.cos(), phase.sin());
                    assert!((g[(p, q)] - want).norm() < 1e-12);
                    assert!((g[(p, q)].norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn nlos_is_seeded() {
        let a = sample_nlos(3, 4, &mut ChaCha8Rng::seed_from_u64(12));
        let b = sample_nlos(3, 4, &mut ChaCha8Rng::seed_from_u64(12));
        assert_eq!(a, b);
    }

    #[test]
    fn nlos_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws = sample_nlos(100_000, 1, &mut rng);
        let n = draws.rows() as f64;
        let mean: Complex = draws.data().iter().sum::<Complex>() / n;
        let power = draws.data().iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
        assert!(mean.norm() < 0.02, "mean {mean}");
        assert!((0.98..=1.02).contains(&power), "power {power}");
    }

    #[test]
    fn rician_limit_is_los() {
        let g = unit_geometry();
        let p = params(1e9, 1);
        let model = ChannelModel::new(&g, &p, dims(3, 4, 1)).unwrap();
        assert_eq!(model.tr_prefactor(), 1.0);
        let real = model.sample(&mut ChaCha8Rng::seed_from_u64(1));
        assert!(real.g_tr.max_abs_diff(model.los_tr()) < 1e-4);
        assert!(real.g_rk[0].max_abs_diff(&model.mean_rk(0)) < 1e-4);
        assert!(model.mean_rk(0).max_abs_diff(model.los_rk(0)) > 0.1);
    }

    #[test]
    fn zero_rician_factor_is_pure_scattering() {
        let g = Geometry {
            bs: [0.0, 0.0, 10.0],
            ris: [30.0, 40.0, 10.0],
            users: vec![[10.0, 10.0]],
        };
        let mut p = params(0.0, 1);
        p.lambda0 = 1e-3;
        p.alpha = 2.2;
        let d = dims(2, 3, 1);
        let real = sample_channel(&g, &p, d, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let nlos = sample_nlos(3, 2, &mut rng);
        let c = 1e-3f64.sqrt() / 50f64.powf(2.2);
        let want = CMatrix::from_fn(3, 2, |r, q| nlos[(r, q)] * c);
        assert_eq!(real.g_tr, want);
    }

    #[test]
    fn coincident_nodes_rejected() {
        let g = Geometry {
            bs: [1.0, 1.0, 5.0],
            ris: [1.0, 1.0, 5.0],
            users: vec![[0.0, 0.0]],
        };
        let err = ChannelModel::new(&g, &params(1.0, 1), dims(1, 2, 1)).unwrap_err();
        assert!(matches!(err, Error::SingularGeometry(_)));
    }

    #[test]
    fn mixture_weights_sum_to_one() {
        for beta in [0.0, 0.1, 1.0, 10.0, 1234.5, 1e9] {
            let (l, n) = params(beta, 1).mixture_weights();
            assert!((l * l + n * n - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn doubling_distance_scales_prefactor() {
        for alpha in [1.5, 2.0, 2.2, 3.7] {
            let a = path_loss_prefactor(1e-3, alpha, 40.0, PathLoss::Amplitude);
            let b = path_loss_prefactor(1e-3, alpha, 80.0, PathLoss::Amplitude);
            assert!((b / a - 2f64.powf(-alpha)).abs() < 1e-14);
        }
    }

    #[test]
    fn realization_is_reproducible() {
        let g = Geometry {
            bs: [0.0, 0.0, 10.0],
            ris: [50.0, 50.0, 20.0],
            users: vec![[100.0, 0.0], [0.0, 100.0]],
        };
        let (tr, rk) = angles_from_geometry(&g);
        let p = ChannelParams {
            tr_angles: tr,
            rk_angles: rk,
            ..params(10.0, 2)
        };
        let d = dims(4, 16, 2);
        let a = sample_channel(&g, &p, d, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = sample_channel(&g, &p, d, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.g_tr.shape(), (16, 4));
        assert!(a.g_rk.iter().all(|g| g.shape() == (16, 1)));
    }

    #[test]
    fn geometry_angles_match_direction_cosines() {
        let g = Geometry {
            bs: [0.0, 0.0, 10.0],
            ris: [50.0, 50.0, 20.0],
            users: vec![[100.0, 0.0]],
        };
        let (tr, rk) = angles_from_geometry(&g);
        let d = g.tr_distance();
        assert!((tr.aod() - 50.0 / d).abs() < 1e-12);
        assert!((tr.aoa() + 50.0 / d).abs() < 1e-12);
        assert!((rk[0].aod() - 50.0 / g.rk_distance(0)).abs() < 1e-12);
        assert!(tr.elevation_aod > 0.0 && tr.elevation_aod < PI);
    }

    #[test]
    fn perimeter_users() {
        assert_eq!(
            Geometry::square_perimeter_users(1, 100.0),
            vec![[100.0, 0.0]]
        );
        assert_eq!(
            Geometry::square_perimeter_users(2, 100.0),
            vec![[100.0, 0.0], [0.0, 100.0]]
        );
        assert_eq!(
            Geometry::square_perimeter_users(4, 100.0),
            vec![[100.0, 0.0], [100.0, 100.0], [0.0, 100.0], [0.0, 0.0]]
        );
    }
}
