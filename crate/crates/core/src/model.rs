//! Scenario types, array geometry, the multipath channel model and SINR.

use nalgebra::{DVector, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::scalar::{cis, cx, lit, CMat, CVec, Cx, Real};

pub type Position<T> = Vector2<T>;

/// Every scenario parameter. Lengths are in meters, powers in watts and
/// ratios linear unless a field name says otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_users: usize,
    pub wavelength: T,
    /// Radar dwell length in symbols.
    pub frame_len: usize,
    pub power_budget: T,
    pub sinr_threshold: T,
    pub noise_comm: T,
    pub noise_radar: T,
    pub d_min: T,
    pub d_max: T,
    /// Each user region is the square `[-h, h]²` around the user's local origin.
    pub user_region_half_side: T,
    pub target_angle: T,
    pub target_distance: T,
    /// `|α|²`; `None` means the squared one-way path gain at the target distance.
    pub reflect_gain: Option<T>,
    pub ref_gain_1m: T,
    pub pathloss_exp: T,
    pub n_tx_paths: usize,
    pub n_rx_paths: usize,
    pub user_dist_range: (T, T),
    pub rng_seed: u64,
}

pub fn db_to_linear<T: Real>(db: T) -> T {
    lit::<T>(10.0).powf(db / lit(10.0))
}

pub fn dbm_to_watts<T: Real>(dbm: T) -> T {
    db_to_linear(dbm - lit(30.0))
}

pub fn linear_to_db<T: Real>(x: T) -> T {
    lit::<T>(10.0) * x.log10()
}

impl<T: Real> Default for SystemConfig<T> {
    fn default() -> Self {
        let wavelength: T = lit(0.05);
        Self {
            n_tx: 10,
            n_rx: 10,
            n_users: 5,
            wavelength,
            frame_len: 256,
            power_budget: dbm_to_watts(lit(30.0)),
            sinr_threshold: db_to_linear(lit(10.0)),
            noise_comm: dbm_to_watts(lit(-80.0)),
            noise_radar: dbm_to_watts(lit(-80.0)),
            d_min: wavelength / lit(5.0),
            d_max: wavelength * lit(4.0),
            user_region_half_side: wavelength,
            target_angle: T::pi() / lit(3.0),
            target_distance: lit(30.0),
            reflect_gain: None,
            ref_gain_1m: db_to_linear(lit(-40.0)),
            pathloss_exp: lit(2.8),
            n_tx_paths: 10,
            n_rx_paths: 10,
            user_dist_range: (lit(20.0), lit(60.0)),
            rng_seed: 0,
        }
    }
}

impl<T: Real> SystemConfig<T> {
    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for (name, v) in [("n_tx", self.n_tx), ("n_rx", self.n_rx), ("n_users", self.n_users)] {
            if v == 0 {
                errs.push(format!("{name} must be >= 1"));
            }
        }
        if self.frame_len == 0 {
            errs.push("frame_len must be >= 1".into());
        }
        let positives = [
            ("wavelength", self.wavelength),
            ("power_budget", self.power_budget),
            ("noise_comm", self.noise_comm),
            ("noise_radar", self.noise_radar),
            ("d_min", self.d_min),
            ("d_max", self.d_max),
            ("user_region_half_side", self.user_region_half_side),
            ("target_distance", self.target_distance),
            ("ref_gain_1m", self.ref_gain_1m),
            ("pathloss_exp", self.pathloss_exp),
        ];
        for (name, v) in positives {
            if !(v > T::zero()) || !v.is_finite() {
                errs.push(format!("{name} must be a finite positive number"));
            }
        }
        if !(self.sinr_threshold >= T::zero()) {
            errs.push("sinr_threshold must be >= 0".into());
        }
        if let Some(g) = self.reflect_gain {
            if !(g > T::zero()) {
                errs.push("reflect_gain must be positive".into());
            }
        }
        let (lo, hi) = self.user_dist_range;
        if !(lo > T::zero() && hi >= lo) {
            errs.push("user_dist_range must satisfy 0 < lo <= hi".into());
        }
        if self.n_tx_paths == 0 || self.n_tx_paths != self.n_rx_paths {
            errs.push("n_tx_paths and n_rx_paths must be equal and >= 1 (diagonal path-response matrix)".into());
        }
        if self.n_rx >= 1 && lit::<T>((self.n_rx - 1) as f64) * self.d_min > self.d_max {
            errs.push("receive spacing infeasible: (n_rx - 1) * d_min > d_max".into());
        }
        let half_pi = T::frac_pi_2();
        if !(self.target_angle > -half_pi && self.target_angle < half_pi) {
            errs.push("target_angle must lie in (-pi/2, pi/2)".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }

    /// Effective `|α|²`.
    pub fn reflect_gain(&self) -> T {
        self.reflect_gain.unwrap_or_else(|| {
            let g = self.ref_gain_1m * self.target_distance.powf(-self.pathloss_exp);
            g * g
        })
    }

    /// Wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> T {
        T::two_pi() / self.wavelength
    }
}

/// Per-user multipath geometry and path-response diagonal `Σ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannelGeometry<T> {
    pub rx_elevations: Vec<T>,
    pub rx_azimuths: Vec<T>,
    pub tx_elevations: Vec<T>,
    pub tx_azimuths: Vec<T>,
    pub prm_diag: Vec<Cx<T>>,
    pub distance: T,
}

impl<T: Real> UserChannelGeometry<T> {
    pub fn n_paths(&self) -> usize {
        self.prm_diag.len()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.prm_diag.len();
        let lens = [
            self.rx_elevations.len(),
            self.rx_azimuths.len(),
            self.tx_elevations.len(),
            self.tx_azimuths.len(),
        ];
        if lens.iter().any(|&n| n != l) {
            return Err(Error::config("path angle vectors and prm_diag must share one length"));
        }
        let half_pi = T::frac_pi_2();
        let all = self
            .rx_elevations
            .iter()
            .chain(&self.rx_azimuths)
            .chain(&self.tx_elevations)
            .chain(&self.tx_azimuths);
        for &a in all {
            if !(a >= -half_pi && a <= half_pi) {
                return Err(Error::config("path angles must lie in [-pi/2, pi/2]"));
            }
        }
        Ok(())
    }

    /// Direction factors `(sin θ cos φ, cos θ)` of receive path `i`; the
    /// path phase at `u` is their dot product with `u`.
    pub fn rx_direction(&self, i: usize) -> Vector2<T> {
        let (th, ph) = (self.rx_elevations[i], self.rx_azimuths[i]);
        Vector2::new(th.sin() * ph.cos(), th.cos())
    }

    pub fn tx_direction(&self, j: usize) -> Vector2<T> {
        let (th, ph) = (self.tx_elevations[j], self.tx_azimuths[j]);
        Vector2::new(th.sin() * ph.cos(), th.cos())
    }
}

/// Antenna positions of one AO state.
#[derive(Debug, Clone, PartialEq)]
pub struct AntennaLayout<T: Real> {
    pub d_t: DVector<T>,
    pub d_r: DVector<T>,
    pub tx_positions_2d: Vec<Position<T>>,
    pub user_positions: Vec<Position<T>>,
}

impl<T: Real> AntennaLayout<T> {
    pub fn new(config: &SystemConfig<T>, d_r: DVector<T>, user_positions: Vec<Position<T>>) -> Result<Self> {
        let d_t = build_transmit_array(config);
        let layout = Self {
            tx_positions_2d: tx_positions_2d(&d_t),
            d_t,
            d_r,
            user_positions,
        };
        layout.check(config, lit(1e-9))?;
        Ok(layout)
    }

    /// Verifies receive spacing/segment and user-box constraints up to `tol`
    /// (relative to the wavelength).
    pub fn check(&self, config: &SystemConfig<T>, tol: T) -> Result<()> {
        let mut errs = Vec::new();
        if self.d_r.len() != config.n_rx {
            errs.push(format!("d_r has {} entries, expected {}", self.d_r.len(), config.n_rx));
        }
        if self.user_positions.len() != config.n_users {
            errs.push(format!(
                "{} user positions, expected {}",
                self.user_positions.len(),
                config.n_users
            ));
        }
        errs.extend(spacing_violations(&self.d_r, config, tol));
        let slack = tol * config.wavelength;
        for (k, u) in self.user_positions.iter().enumerate() {
            let h = config.user_region_half_side + slack;
            if !(u.x.abs() <= h && u.y.abs() <= h) {
                errs.push(format!("user {k} outside its region"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

/// Lists violated receive-array constraints (`d_r[0] ≥ 0`, `d_r[N-1] ≤ d_max`,
/// adjacent gaps `≥ d_min`), with `tol` relative to the wavelength.
pub fn spacing_violations<T: Real>(d_r: &DVector<T>, config: &SystemConfig<T>, tol: T) -> Vec<String> {
    let mut errs = Vec::new();
    let slack = tol * config.wavelength;
    let n = d_r.len();
    if n == 0 {
        return errs;
    }
    if d_r[0] < -slack {
        errs.push("d_r[0] < 0".into());
    }
    if d_r[n - 1] > config.d_max + slack {
        errs.push("d_r[N-1] > d_max".into());
    }
    for i in 1..n {
        if d_r[i] - d_r[i - 1] < config.d_min - slack {
            errs.push(format!("gap d_r[{i}] - d_r[{}] < d_min", i - 1));
        }
    }
    errs
}

/// Half-wavelength ULA starting at the origin.
pub fn build_transmit_array<T: Real>(config: &SystemConfig<T>) -> DVector<T> {
    let half = config.wavelength / lit(2.0);
    DVector::from_fn(config.n_tx, |n, _| lit::<T>(n as f64) * half)
}

pub fn tx_positions_2d<T: Real>(d_t: &DVector<T>) -> Vec<Position<T>> {
    d_t.iter().map(|&x| Position::new(x, T::zero())).collect()
}

/// `f_k(u)`: one unit-modulus entry per receive path.
pub fn receive_field_response<T: Real>(u: &Position<T>, geom: &UserChannelGeometry<T>, wavelength: T) -> CVec<T> {
    let kappa = T::two_pi() / wavelength;
    CVec::from_fn(geom.n_paths(), |i, _| cis(kappa * geom.rx_direction(i).dot(u)))
}

/// `T_k`: column `n` is the transmit field response of antenna `n`.
pub fn transmit_field_response_matrix<T: Real>(
    geom: &UserChannelGeometry<T>,
    tx_positions: &[Position<T>],
    wavelength: T,
) -> CMat<T> {
    let kappa = T::two_pi() / wavelength;
    CMat::from_fn(geom.n_paths(), tx_positions.len(), |j, n| {
        cis(kappa * geom.tx_direction(j).dot(&tx_positions[n]))
    })
}

/// `h_k` such that `h_kᴴ = f_k(u)ᴴ Σ_k T_k`.
pub fn channel_vector<T: Real>(
    u: &Position<T>,
    geom: &UserChannelGeometry<T>,
    tx_positions: &[Position<T>],
    wavelength: T,
) -> CVec<T> {
    let f = receive_field_response(u, geom, wavelength);
    let t = transmit_field_response_matrix(geom, tx_positions, wavelength);
    channel_from_parts(&f, geom, &t)
}

pub(crate) fn channel_from_parts<T: Real>(f: &CVec<T>, geom: &UserChannelGeometry<T>, t: &CMat<T>) -> CVec<T> {
    // hᴴ = fᴴ Σ T  =>  h = Tᴴ Σᴴ f
    let sigma_h_f = CVec::from_fn(f.len(), |i, _| geom.prm_diag[i].conj() * f[i]);
    t.adjoint() * sigma_h_f
}

/// Transmit beamformer `W = [w_1 … w_K]` (`N_t × K`).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingMatrix<T: Real> {
    pub columns: CMat<T>,
}

impl<T: Real> BeamformingMatrix<T> {
    pub fn new(columns: CMat<T>) -> Self {
        Self { columns }
    }

    pub fn from_beams(beams: &[CVec<T>]) -> Self {
        let n = beams.first().map_or(0, |b| b.len());
        let mut columns = CMat::zeros(n, beams.len());
        for (k, b) in beams.iter().enumerate() {
            columns.set_column(k, b);
        }
        Self { columns }
    }

    pub fn n_users(&self) -> usize {
        self.columns.ncols()
    }

    pub fn beam(&self, k: usize) -> CVec<T> {
        self.columns.column(k).into_owned()
    }

    pub fn power(&self) -> T {
        self.columns.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr())
    }
}

/// SINR of user `k` with squared-magnitude interference terms.
pub fn sinr<T: Real>(k: usize, w: &BeamformingMatrix<T>, channels: &[CVec<T>], noise: T) -> Result<T> {
    if !(noise > T::zero()) {
        return Err(Error::config("noise power must be positive"));
    }
    if k >= channels.len() || k >= w.n_users() {
        return Err(Error::config(format!("user index {k} out of range")));
    }
    let h = &channels[k];
    let mut interference = T::zero();
    let mut signal = T::zero();
    for q in 0..w.n_users() {
        let g = h.dotc(&w.columns.column(q)).norm_sqr();
        if q == k {
            signal = g;
        } else {
            interference += g;
        }
    }
    Ok(signal / (interference + noise))
}

pub fn all_sinrs<T: Real>(w: &BeamformingMatrix<T>, channels: &[CVec<T>], noise: T) -> Result<Vec<T>> {
    (0..channels.len()).map(|k| sinr(k, w, channels, noise)).collect()
}

/// `R_X = W Wᴴ`.
pub fn sample_covariance<T: Real>(w: &BeamformingMatrix<T>) -> CMat<T> {
    &w.columns * w.columns.adjoint()
}

/// A drawn trial: per-user geometry plus the target reflection power.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub users: Vec<UserChannelGeometry<T>>,
    pub reflect_gain: T,
}

/// Draws user distances, i.i.d. uniform path angles on `[-π/2, π/2]` and
/// `CN(0, c₀ d^(-α)/L)` path responses (`L` = path count).
pub fn draw_random_geometry<T: Real, R: Rng + ?Sized>(config: &SystemConfig<T>, rng: &mut R) -> Scenario<T> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let angle = Uniform::new_inclusive(-half_pi, half_pi).expect("valid angle range");
    let (lo, hi) = (
        config.user_dist_range.0.to_f64().unwrap_or(20.0),
        config.user_dist_range.1.to_f64().unwrap_or(60.0),
    );
    let dist = Uniform::new_inclusive(lo, hi).expect("valid distance range");
    let c0 = config.ref_gain_1m.to_f64().unwrap_or(1e-4);
    let alpha = config.pathloss_exp.to_f64().unwrap_or(2.8);
    let n_paths = config.n_rx_paths;

    let users = (0..config.n_users)
        .map(|_| {
            let d: f64 = dist.sample(rng);
            let mut draw = |n: usize| -> Vec<T> { (0..n).map(|_| lit(angle.sample(rng))).collect() };
            let rx_elevations = draw(n_paths);
            let rx_azimuths = draw(n_paths);
            let tx_elevations = draw(n_paths);
            let tx_azimuths = draw(n_paths);
            let variance = c0 * d.powf(-alpha) / n_paths as f64;
            let scale = (variance / 2.0).sqrt();
            let prm_diag = (0..n_paths)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    cx(lit(re * scale), lit(im * scale))
                })
                .collect();
            UserChannelGeometry {
                rx_elevations,
                rx_azimuths,
                tx_elevations,
                tx_azimuths,
                prm_diag,
                distance: lit(d),
            }
        })
        .collect();
    Scenario {
        users,
        reflect_gain: config.reflect_gain(),
    }
}

/// Channels of every user at the positions in `layout`.
pub fn channels_for<T: Real>(
    config: &SystemConfig<T>,
    scenario: &Scenario<T>,
    layout: &AntennaLayout<T>,
) -> Vec<CVec<T>> {
    scenario
        .users
        .iter()
        .zip(&layout.user_positions)
        .map(|(g, u)| channel_vector(u, g, &layout.tx_positions_2d, config.wavelength))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom_single(theta: f64, phi: f64) -> UserChannelGeometry<f64> {
        UserChannelGeometry {
            rx_elevations: vec![theta],
            rx_azimuths: vec![phi],
            tx_elevations: vec![theta],
            tx_azimuths: vec![phi],
            prm_diag: vec![cx(1.0, 0.0)],
            distance: 30.0,
        }
    }

    fn random_scenario(seed: u64) -> (SystemConfig<f64>, Scenario<f64>) {
        let config = SystemConfig::<f64> { n_users: 3, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sc = draw_random_geometry(&config, &mut rng);
        (config, sc)
    }

    #[test]
    fn transmit_array_is_half_wavelength_ula() {
        let c = SystemConfig::<f64> { n_tx: 2, ..Default::default() };
        let d = build_transmit_array(&c);
        assert_eq!(d.as_slice(), &[0.0, 0.025]);
        let c1 = SystemConfig::<f64> { n_tx: 1, ..Default::default() };
        assert_eq!(build_transmit_array(&c1).as_slice(), &[0.0]);
        let c10 = SystemConfig::<f64>::default();
        assert!((build_transmit_array(&c10)[9] - 0.225).abs() < 1e-15);
    }

    #[test]
    fn receive_response_at_origin_is_all_ones() {
        let (_, sc) = random_scenario(1);
        let f = receive_field_response(&Position::zeros(), &sc.users[0], 0.05);
        for z in f.iter() {
            assert!((z - cx(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn full_wavelength_offset_wraps_phase() {
        let g = geom_single(std::f64::consts::FRAC_PI_2, 0.0);
        let f = receive_field_response(&Position::new(0.05, 0.0), &g, 0.05);
        assert!((f[0] - cx(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn receive_response_matches_scalar_loop() {
        let (_, sc) = random_scenario(2);
        let g = &sc.users[1];
        let u = Position::new(0.013, -0.021);
        let f = receive_field_response(&u, g, 0.05);
        for i in 0..g.n_paths() {
            let rho = u.x * g.rx_elevations[i].sin() * g.rx_azimuths[i].cos() + u.y * g.rx_elevations[i].cos();
            let phase = 2.0 * std::f64::consts::PI / 0.05 * rho;
            let expect = cx(phase.cos(), phase.sin());
            assert!((f[i] - expect).norm() < 1e-12);
            assert!((f[i].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transmit_matrix_properties() {
        let (_, sc) = random_scenario(3);
        let g = &sc.users[0];
        let single = transmit_field_response_matrix(g, &[Position::zeros()], 0.05);
        assert!(single.iter().all(|z| (z - cx(1.0, 0.0)).norm() < 1e-15));
        let p = Position::new(0.02, 0.0);
        let twin = transmit_field_response_matrix(g, &[p, p], 0.05);
        assert_eq!(twin.column(0), twin.column(1));
        let pos = tx_positions_2d(&DVector::from_vec(vec![0.0, 0.025, 0.05]));
        let t = transmit_field_response_matrix(g, &pos, 0.05);
        for j in 0..g.n_paths() {
            for n in 0..3 {
                let rho = pos[n].x * g.tx_elevations[j].sin() * g.tx_azimuths[j].cos()
                    + pos[n].y * g.tx_elevations[j].cos();
                let phase = 2.0 * std::f64::consts::PI / 0.05 * rho;
                assert!((t[(j, n)] - cx(phase.cos(), phase.sin())).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn channel_single_path_at_origin_is_row_of_t() {
        let g = geom_single(0.3, -0.2);
        let pos = tx_positions_2d(&DVector::from_vec(vec![0.0, 0.025]));
        let h = channel_vector(&Position::zeros(), &g, &pos, 0.05);
        let t = transmit_field_response_matrix(&g, &pos, 0.05);
        for n in 0..2 {
            assert!((h[n].conj() - t[(0, n)]).norm() < 1e-15);
        }
        let mut zero = g.clone();
        zero.prm_diag = vec![cx(0.0, 0.0)];
        assert!(channel_vector(&Position::zeros(), &zero, &pos, 0.05).norm() == 0.0);
    }

    #[test]
    fn channel_matches_triple_product_oracle() {
        let (config, sc) = random_scenario(4);
        let d_t = build_transmit_array(&config);
        let pos = tx_positions_2d(&d_t);
        let g = &sc.users[2];
        let u = Position::new(-0.03, 0.011);
        let h = channel_vector(&u, g, &pos, config.wavelength);
        let f = receive_field_response(&u, g, config.wavelength);
        let t = transmit_field_response_matrix(g, &pos, config.wavelength);
        for n in 0..config.n_tx {
            // (hᴴ)_n = Σ_i conj(f_i) σ_i T_{i,n}
            let mut acc = cx(0.0, 0.0);
            for i in 0..g.n_paths() {
                acc += f[i].conj() * g.prm_diag[i] * t[(i, n)];
            }
            assert!((h[n].conj() - acc).norm() <= 1e-12 * acc.norm().max(1e-30));
        }
    }

    #[test]
    fn channel_is_linear_in_prm() {
        let (config, sc) = random_scenario(5);
        let pos = tx_positions_2d(&build_transmit_array(&config));
        let u = Position::new(0.01, 0.02);
        let g1 = sc.users[0].clone();
        let mut g2 = g1.clone();
        g2.prm_diag = sc.users[1].prm_diag.clone();
        let mut g12 = g1.clone();
        g12.prm_diag = g1.prm_diag.iter().zip(&g2.prm_diag).map(|(a, b)| a + b).collect();
        let lhs = channel_vector(&u, &g12, &pos, 0.05);
        let rhs = channel_vector(&u, &g1, &pos, 0.05) + channel_vector(&u, &g2, &pos, 0.05);
        assert!((lhs - &rhs).norm() <= 1e-12 * rhs.norm());
    }

    fn random_beams(n: usize, k: usize, seed: u64) -> BeamformingMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BeamformingMatrix::new(CMat::from_fn(n, k, |_, _| {
            cx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        }))
    }

    #[test]
    fn sinr_cases() {
        let h = vec![CVec::from_vec(vec![cx(1.0, 0.5), cx(-0.3, 0.2)])];
        let w = BeamformingMatrix::from_beams(&[CVec::from_vec(vec![cx(0.4, 0.0), cx(0.1, -0.7)])]);
        let s = sinr(0, &w, &h, 0.2).unwrap();
        let direct: f64 = h[0].dotc(&w.beam(0)).norm_sqr() / 0.2;
        assert!((s - direct).abs() < 1e-14);

        let hh = &h[0];
        let orth = BeamformingMatrix::from_beams(&[CVec::from_vec(vec![hh[1].conj(), -hh[0].conj()])]);
        assert!(sinr(0, &orth, &h, 1.0).unwrap() < 1e-28);
        assert!(matches!(sinr(0, &w, &h, 0.0), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn sinr_matches_direct_summation_and_phase_invariance() {
        let w = random_beams(4, 3, 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let channels: Vec<CVec<f64>> = (0..3)
            .map(|_| CVec::from_fn(4, |_, _| cx(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
            .collect();
        for k in 0..3 {
            let mut num = 0.0;
            let mut den = 0.3;
            for q in 0..3 {
                let mut z = cx(0.0, 0.0);
                for n in 0..4 {
                    z += channels[k][n].conj() * w.columns[(n, q)];
                }
                if q == k {
                    num = z.norm_sqr();
                } else {
                    den += z.norm_sqr();
                }
            }
            let s = sinr(k, &w, &channels, 0.3).unwrap();
            assert!((s - num / den).abs() <= 1e-12 * s);
            let rotated = BeamformingMatrix::new(&w.columns * cis(0.7));
            assert!((sinr(k, &rotated, &channels, 0.3).unwrap() - s).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn covariance_properties() {
        let p = 2.0f64;
        let mut e1 = CVec::zeros(3);
        e1[0] = cx(p.sqrt(), 0.0);
        let r = sample_covariance(&BeamformingMatrix::from_beams(&[e1]));
        assert!((r[(0, 0)].re - p).abs() < 1e-15 && r.iter().skip(1).all(|z| z.norm() == 0.0));
        let zero = sample_covariance(&BeamformingMatrix::new(CMat::<f64>::zeros(3, 2)));
        assert!(zero.iter().all(|z| z.norm() == 0.0));

        let w = random_beams(5, 3, 7);
        let r = sample_covariance(&w);
        assert!((&r - r.adjoint()).norm() < 1e-12);
        let eig = crate::linalg::hermitian_eigenvalues(&r);
        assert!(eig.min() > -1e-12);
        assert!((r.trace().re - w.power()).abs() <= 1e-10 * w.power());
    }

    #[test]
    fn geometry_draw_is_deterministic_and_in_range() {
        let config = SystemConfig::<f64>::default();
        let a = draw_random_geometry(&config, &mut ChaCha8Rng::seed_from_u64(9));
        let b = draw_random_geometry(&config, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        for u in &a.users {
            assert!(u.distance >= 20.0 && u.distance <= 60.0);
            u.validate().unwrap();
            assert_eq!(u.n_paths(), 10);
        }
        let g = 1e-4 * 30f64.powf(-2.8);
        assert!((a.reflect_gain - g * g).abs() < 1e-30);
    }

    #[test]
    fn prm_variance_matches_pathloss_model() {
        let config = SystemConfig::<f64> {
            n_users: 1,
            user_dist_range: (35.0, 35.0),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut acc = 0.0;
        let mut count = 0usize;
        while count < 100_000 {
            let sc = draw_random_geometry(&config, &mut rng);
            for z in &sc.users[0].prm_diag {
                acc += z.norm_sqr();
                count += 1;
            }
        }
        let empirical = acc / count as f64;
        let expected = 1e-4 * 35f64.powf(-2.8) / 10.0;
        assert!((empirical / expected - 1.0).abs() < 0.05, "{empirical} vs {expected}");
    }

    #[test]
    fn default_config_is_valid_and_violations_are_listed() {
        SystemConfig::<f64>::default().validate().unwrap();
        let bad = SystemConfig::<f64> {
            power_budget: -1.0,
            d_max: 0.01,
            target_angle: 2.0,
            ..Default::default()
        };
        match bad.validate() {
            Err(Error::InvalidConfig(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }
}
