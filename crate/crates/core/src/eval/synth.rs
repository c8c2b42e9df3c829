use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::month::Month;
use crate::profile::{assemble_series, DepthSchedule, LayeredSeries, Profile};

/// Parameters of the synthetic monthly ocean.
///
/// The mean profile has a mixed layer, a thermocline whose sound speed
/// drop is centered at `thermocline_depth`, and a deep layer where speed
/// rises with pressure. On top of it sit a 12-month seasonal cycle, a
/// linear trend and a persistent (AR(1)) interannual anomaly that all
/// fade with depth, plus independent white noise on every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub months: usize,
    pub start: Month,
    /// Mean speed at the sea surface, m/s.
    pub surface_speed: f64,
    pub mixed_layer_depth: f64,
    pub thermocline_depth: f64,
    /// Width scale of the thermocline, m.
    pub thermocline_width: f64,
    /// Speed lost across the thermocline, m/s.
    pub thermocline_drop: f64,
    /// Speed gained per meter from pressure, (m/s)/m.
    pub pressure_gradient: f64,
    /// Seasonal amplitude at the surface, m/s.
    pub seasonal_amplitude: f64,
    /// e-folding depth of the seasonal amplitude, m.
    pub seasonal_decay: f64,
    /// Surface trend, m/s per year.
    pub trend_per_year: f64,
    pub trend_decay: f64,
    /// Stationary standard deviation of the surface anomaly, m/s.
    pub anomaly_sigma: f64,
    /// Month-to-month autocorrelation of the anomaly.
    pub anomaly_persistence: f64,
    pub anomaly_decay: f64,
    /// White measurement noise, m/s.
    pub noise_sigma: f64,
    pub max_depth: f64,
    pub depth_step: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            months: 60,
            start: Month::from_ym(2017, 1),
            surface_speed: 1540.0,
            mixed_layer_depth: 50.0,
            thermocline_depth: 250.0,
            thermocline_width: 150.0,
            thermocline_drop: 75.0,
            pressure_gradient: 0.0165,
            seasonal_amplitude: 4.0,
            seasonal_decay: 120.0,
            trend_per_year: 0.4,
            trend_decay: 400.0,
            anomaly_sigma: 0.4,
            anomaly_persistence: 0.85,
            anomaly_decay: 250.0,
            noise_sigma: 0.1,
            max_depth: 2000.0,
            depth_step: 5.0,
        }
    }
}

impl SynthSpec {
    /// Time-invariant ocean: no season, trend, anomaly or noise.
    pub fn constant(seed: u64) -> Self {
        SynthSpec {
            seed,
            seasonal_amplitude: 0.0,
            trend_per_year: 0.0,
            anomaly_sigma: 0.0,
            noise_sigma: 0.0,
            ..SynthSpec::default()
        }
    }

    /// Noise-free, trend-free ocean with a pure 12-month cycle.
    pub fn sinusoidal(seed: u64) -> Self {
        SynthSpec {
            seed,
            trend_per_year: 0.0,
            anomaly_sigma: 0.0,
            noise_sigma: 0.0,
            ..SynthSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.months < 13 {
            return Err(Error::validation(format!("synthetic series needs >= 13 months, got {}", self.months)));
        }
        let nonneg = [
            ("noise_sigma", self.noise_sigma),
            ("anomaly_sigma", self.anomaly_sigma),
            ("seasonal_amplitude", self.seasonal_amplitude),
            ("mixed_layer_depth", self.mixed_layer_depth),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be >= 0, got {v}")));
            }
        }
        let positive = [
            ("thermocline_width", self.thermocline_width),
            ("seasonal_decay", self.seasonal_decay),
            ("trend_decay", self.trend_decay),
            ("anomaly_decay", self.anomaly_decay),
            ("max_depth", self.max_depth),
            ("depth_step", self.depth_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.anomaly_persistence) {
            return Err(Error::validation("anomaly_persistence must be in [0, 1)"));
        }
        if !self.surface_speed.is_finite() || !self.trend_per_year.is_finite() {
            return Err(Error::validation("surface_speed and trend must be finite"));
        }
        Ok(())
    }

    fn thermal(&self, z: f64) -> f64 {
        let below = (z - self.mixed_layer_depth).max(0.0);
        0.5 * self.thermocline_drop * (1.0 - ((below - self.thermocline_depth) / self.thermocline_width).tanh())
    }

    /// Long-term mean speed at depth `z` (before season, trend and anomaly).
    pub fn mean_speed(&self, z: f64) -> f64 {
        self.surface_speed - self.thermal(0.0) + self.thermal(z) + self.pressure_gradient * z
    }

    fn depths(&self) -> Vec<f64> {
        let count = (self.max_depth / self.depth_step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| k as f64 * self.depth_step).collect()
    }
}

/// Monthly synthetic profiles, deterministic in `spec.seed`.
pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<Profile>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let phi = spec.anomaly_persistence;
    let innovation = spec.anomaly_sigma * (1.0 - phi * phi).sqrt();
    let mut anomaly = Vec::with_capacity(spec.months);
    let mut a = spec.anomaly_sigma * std_normal.sample(&mut rng);
    for _ in 0..spec.months {
        anomaly.push(a);
        a = phi * a + innovation * std_normal.sample(&mut rng);
    }

    let depths = spec.depths();
    let base: Vec<f64> = depths.iter().map(|&z| spec.mean_speed(z)).collect();
    (0..spec.months)
        .map(|i| {
            let month = spec.start.offset(i as i32);
            let phase = 2.0 * PI * month.0.rem_euclid(12) as f64 / 12.0;
            let years = i as f64 / 12.0;
            let samples = depths
                .iter()
                .zip(&base)
                .map(|(&z, &b)| {
                    let seasonal = spec.seasonal_amplitude
                        * (-z / spec.seasonal_decay).exp()
                        * (phase - z / spec.seasonal_decay).sin();
                    let trend = spec.trend_per_year * years * (-z / spec.trend_decay).exp();
                    let anom = anomaly[i] * (-z / spec.anomaly_decay).exp();
                    let noise = if spec.noise_sigma > 0.0 {
                        spec.noise_sigma * std_normal.sample(&mut rng)
                    } else {
                        0.0
                    };
                    (z, b + seasonal + trend + anom + noise)
                })
                .collect();
            Profile::new(month, samples)
        })
        .collect()
}

/// Generate and layer onto `sched` in one go.
pub fn synth_series(spec: &SynthSpec, sched: &DepthSchedule) -> Result<LayeredSeries> {
    assemble_series(&synth_generate(spec)?, sched)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_ocean_months_identical() {
        let profiles = synth_generate(&SynthSpec::constant(3)).unwrap();
        assert_eq!(profiles.len(), 60);
        for p in &profiles[1..] {
            assert_eq!(p.samples(), profiles[0].samples());
        }
    }

    #[test]
    fn sinusoidal_ocean_is_exactly_periodic() {
        let profiles = synth_generate(&SynthSpec::sinusoidal(1)).unwrap();
        for m in 0..48 {
            assert_eq!(profiles[m].samples(), profiles[m + 12].samples());
        }
        assert_ne!(profiles[0].samples(), profiles[6].samples());
    }

    #[test]
    fn default_ocean_in_band_across_seeds() {
        for seed in 0..20 {
            let spec = SynthSpec { seed, ..SynthSpec::default() };
            for p in synth_generate(&spec).unwrap() {
                assert!(p.speeds().iter().all(|&v| (1300.0..=1700.0).contains(&v)));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_generate(&SynthSpec { seed: 5, ..SynthSpec::default() }).unwrap();
        let b = synth_generate(&SynthSpec { seed: 5, ..SynthSpec::default() }).unwrap();
        let c = synth_generate(&SynthSpec { seed: 6, ..SynthSpec::default() }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn shape_has_a_sound_channel() {
        let spec = SynthSpec::default();
        let surface = spec.mean_speed(0.0);
        let mid = spec.mean_speed(700.0);
        let deep = spec.mean_speed(1975.0);
        assert_eq!(surface, 1540.0);
        assert!(mid < surface && mid < deep);
    }

    #[test]
    fn validation() {
        assert!(synth_generate(&SynthSpec { months: 12, ..SynthSpec::default() }).is_err());
        assert!(synth_generate(&SynthSpec { months: 13, ..SynthSpec::default() }).is_ok());
        assert!(synth_generate(&SynthSpec { noise_sigma: -1.0, ..SynthSpec::default() }).is_err());
        assert!(synth_generate(&SynthSpec { anomaly_persistence: 1.0, ..SynthSpec::default() }).is_err());
    }

    #[test]
    fn layers_onto_standard_grid() {
        let s = synth_series(&SynthSpec::default(), &DepthSchedule::paper58()).unwrap();
        assert_eq!(s.values().shape(), (58, 60));
    }
}
