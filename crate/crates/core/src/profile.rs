//! Profiles, the standard depth grid, layered month-by-depth series,
//! train/validation windows and per-layer min-max normalization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::month::Month;

/// Plausibility band for sound speed samples, in m/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedBand {
    pub lo: f64,
    pub hi: f64,
}

impl SpeedBand {
    pub const DEFAULT: SpeedBand = SpeedBand {
        lo: 1300.0,
        hi: 1700.0,
    };

    pub fn contains(&self, speed: f64) -> bool {
        speed >= self.lo && speed <= self.hi
    }
}

impl Default for SpeedBand {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// One month of sound speed samples ordered by depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    month: Month,
    samples: Vec<(f64, f64)>,
}

impl Profile {
    pub fn new(month: Month, samples: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_band(month, samples, SpeedBand::DEFAULT)
    }

    pub fn with_band(month: Month, samples: Vec<(f64, f64)>, band: SpeedBand) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::validation(format!(
                "profile {month} has {} samples, need at least 2",
                samples.len()
            )));
        }
        for (k, &(depth, speed)) in samples.iter().enumerate() {
            if !depth.is_finite() || depth < 0.0 {
                return Err(Error::validation(format!(
                    "profile {month}: invalid depth {depth}"
                )));
            }
            if !speed.is_finite() || !band.contains(speed) {
                return Err(Error::validation(format!(
                    "profile {month}: speed {speed} at {depth} m outside [{}, {}]",
                    band.lo, band.hi
                )));
            }
            if k > 0 && depth <= samples[k - 1].0 {
                return Err(Error::validation(format!(
                    "profile {month}: depths not strictly increasing at {depth} m"
                )));
            }
        }
        Ok(Profile { month, samples })
    }

    pub fn month(&self) -> Month {
        self.month
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn depths(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.0).collect()
    }

    pub fn speeds(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn first_depth(&self) -> f64 {
        self.samples[0].0
    }

    pub fn last_depth(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    /// Linearly interpolated speed at `depth`; `None` outside the sampled span.
    pub fn speed_at(&self, depth: f64) -> Option<f64> {
        let i = self.samples.partition_point(|s| s.0 < depth);
        if i == self.samples.len() {
            return None;
        }
        let (d1, s1) = self.samples[i];
        if d1 == depth {
            return Some(s1);
        }
        if i == 0 {
            return None;
        }
        let (d0, s0) = self.samples[i - 1];
        Some(s0 + (s1 - s0) * (depth - d0) / (d1 - d0))
    }
}

/// Which depth grid to build.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Paper58,
    Custom(Vec<f64>),
}

/// Ordered depth levels (m) every profile is resampled onto.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSchedule {
    levels: Vec<f64>,
}

impl DepthSchedule {
    /// The 58-level standard grid from the surface to 1975 m.
    ///
    /// 5 m steps to 10 m, 10 m steps to 180 m, 20 m steps to 460 m, 50 m
    /// steps from 500 m to 1250 m, 100 m steps from 1300 m to 1900 m, then
    /// a final level at 1975 m. Nothing lies between 460 m and 500 m.
    pub fn paper58() -> Self {
        let mut levels = vec![0.0, 5.0, 10.0];
        levels.extend((2..=18).map(|k| k as f64 * 10.0));
        levels.extend((10..=23).map(|k| k as f64 * 20.0));
        levels.extend((10..=25).map(|k| k as f64 * 50.0));
        levels.extend((13..=19).map(|k| k as f64 * 100.0));
        levels.push(1975.0);
        DepthSchedule { levels }
    }

    pub fn custom(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Empty("depth schedule"));
        }
        if levels[0] != 0.0 {
            return Err(Error::validation(format!(
                "depth schedule must start at 0 m, starts at {}",
                levels[0]
            )));
        }
        for w in levels.windows(2) {
            if !w[1].is_finite() || w[1] <= w[0] {
                return Err(Error::validation(format!(
                    "depth schedule not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(DepthSchedule { levels })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn last_level(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Index of the level at exactly `depth`, if any.
    pub fn index_of(&self, depth: f64) -> Option<usize> {
        self.levels.iter().position(|&d| d == depth)
    }
}

pub fn build_depth_schedule(spec: &ScheduleSpec) -> Result<DepthSchedule> {
    match spec {
        ScheduleSpec::Paper58 => Ok(DepthSchedule::paper58()),
        ScheduleSpec::Custom(levels) => DepthSchedule::custom(levels.clone()),
    }
}

/// Resample a profile onto the schedule by linear interpolation.
///
/// Levels outside the profile's span are an error.
pub fn layer_profile(p: &Profile, sched: &DepthSchedule) -> Result<Vec<f64>> {
    layer_profile_with(p, sched, false)
}

/// Like [`layer_profile`], but with `clamp` set levels outside the sampled
/// span take the nearest endpoint speed instead of failing.
pub fn layer_profile_with(p: &Profile, sched: &DepthSchedule, clamp: bool) -> Result<Vec<f64>> {
    sched
        .levels()
        .iter()
        .map(|&z| match p.speed_at(z) {
            Some(v) => Ok(v),
            None if clamp => Ok(if z < p.first_depth() {
                p.samples()[0].1
            } else {
                p.samples()[p.samples().len() - 1].1
            }),
            None => Err(Error::OutOfRange {
                depth: z,
                min: p.first_depth(),
                max: p.last_depth(),
            }),
        })
        .collect()
}

/// Depth-by-month speed matrix: row j is schedule level j, column i is
/// month `start_month + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredSeries {
    schedule: DepthSchedule,
    start_month: Month,
    values: DMatrix<f64>,
}

impl LayeredSeries {
    pub fn new(schedule: DepthSchedule, start_month: Month, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != schedule.len() {
            return Err(Error::dim("series rows", schedule.len(), values.nrows()));
        }
        if values.ncols() == 0 {
            return Err(Error::Empty("layered series"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layered series".into()));
        }
        Ok(LayeredSeries {
            schedule,
            start_month,
            values,
        })
    }

    pub fn schedule(&self) -> &DepthSchedule {
        &self.schedule
    }

    pub fn start_month(&self) -> Month {
        self.start_month
    }

    pub fn end_month(&self) -> Month {
        self.start_month.offset(self.values.ncols() as i32 - 1)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_months(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, month: Month) -> Option<usize> {
        let i = month.months_since(self.start_month);
        (i >= 0 && (i as usize) < self.values.ncols()).then_some(i as usize)
    }

    /// Layered speeds for `month`.
    pub fn column(&self, month: Month) -> Option<Vec<f64>> {
        self.column_index(month)
            .map(|i| self.values.column(i).iter().copied().collect())
    }

    /// Columns for months `first..first+len`, or a window error.
    pub fn months_range(&self, first: Month, len: usize) -> Result<DMatrix<f64>> {
        let last = first.offset(len as i32 - 1);
        match (self.column_index(first), self.column_index(last)) {
            (Some(a), Some(_)) if len > 0 => Ok(self.values.columns(a, len).into_owned()),
            _ => Err(Error::Window {
                first,
                last,
                have_first: self.start_month,
                have_last: self.end_month(),
            }),
        }
    }
}

/// Stack chronologically ordered, gap-free monthly profiles into a series.
pub fn assemble_series(profiles: &[Profile], sched: &DepthSchedule) -> Result<LayeredSeries> {
    assemble_series_with(profiles, sched, false)
}

pub fn assemble_series_with(
    profiles: &[Profile],
    sched: &DepthSchedule,
    clamp: bool,
) -> Result<LayeredSeries> {
    let first = profiles.first().ok_or(Error::Empty("profile list"))?.month();
    let mut values = DMatrix::zeros(sched.len(), profiles.len());
    for (i, p) in profiles.iter().enumerate() {
        let expected = first.offset(i as i32);
        if p.month() != expected {
            return Err(Error::Chronology {
                position: i,
                expected,
                found: p.month(),
            });
        }
        let col = layer_profile_with(p, sched, clamp).map_err(|e| Error::Layering {
            month: p.month(),
            source: Box::new(e),
        })?;
        values.set_column(i, &DVector::from_vec(col));
    }
    LayeredSeries::new(sched.clone(), first, values)
}

/// Training window of `n_cycles` cycles of `cycle_length` months that ends
/// the month before `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub cycle_length: usize,
    pub n_cycles: usize,
    pub target: Month,
}

impl WindowSpec {
    pub fn new(cycle_length: usize, n_cycles: usize, target: Month) -> Result<Self> {
        if cycle_length == 0 || n_cycles == 0 {
            return Err(Error::validation(format!(
                "window needs cycle length and cycle count >= 1, got C={cycle_length} n={n_cycles}"
            )));
        }
        Ok(WindowSpec {
            cycle_length,
            n_cycles,
            target,
        })
    }

    /// Number of training months, nC.
    pub fn train_len(&self) -> usize {
        self.cycle_length * self.n_cycles
    }

    pub fn first_month(&self) -> Month {
        self.target.offset(-(self.train_len() as i32))
    }

    pub fn last_train_month(&self) -> Month {
        self.target.offset(-1)
    }
}

/// Training matrix T (J x nC) for a window; does not require the target month.
pub fn training_window(s: &LayeredSeries, w: &WindowSpec) -> Result<DMatrix<f64>> {
    s.months_range(w.first_month(), w.train_len())
}

/// Split into the training matrix T and validation column V (the target month).
pub fn split_train_validation(
    s: &LayeredSeries,
    w: &WindowSpec,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let full = s.months_range(w.first_month(), w.train_len() + 1)?;
    let n = w.train_len();
    let train = full.columns(0, n).into_owned();
    let valid = full.column(n).into_owned();
    Ok((train, valid))
}

/// Min and max of one depth layer over the training window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowNorm {
    pub min: f64,
    pub max: f64,
}

impl RowNorm {
    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }

    pub fn normalize(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            v * (self.max - self.min) + self.min
        }
    }
}

/// Per-row min-max scaling fitted on a training matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NormParams {
    pub rows: Vec<RowNorm>,
}

impl NormParams {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn fit_norm(t: &DMatrix<f64>) -> Result<NormParams> {
    if t.is_empty() {
        return Err(Error::Empty("training matrix"));
    }
    let rows = t
        .row_iter()
        .map(|r| RowNorm {
            min: r.iter().copied().fold(f64::INFINITY, f64::min),
            max: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect();
    Ok(NormParams { rows })
}

pub fn apply_norm(t: &DMatrix<f64>, p: &NormParams) -> Result<DMatrix<f64>> {
    if t.nrows() != p.len() {
        return Err(Error::dim("normalization rows", p.len(), t.nrows()));
    }
    Ok(DMatrix::from_fn(t.nrows(), t.ncols(), |j, i| {
        p.rows[j].normalize(t[(j, i)])
    }))
}

/// Map a normalized J-vector back to m/s, row by row.
pub fn denorm(values: &[f64], p: &NormParams) -> Result<Vec<f64>> {
    if values.len() != p.len() {
        return Err(Error::dim("denormalization", p.len(), values.len()));
    }
    Ok(values
        .iter()
        .zip(&p.rows)
        .map(|(&v, r)| r.denormalize(v))
        .collect())
}

/// Linear interpolation through `(xs, ys)`, exact at the nodes.
pub(crate) fn piecewise_linear(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let i = xs.partition_point(|&d| d < x);
    if i == xs.len() {
        return None;
    }
    if xs[i] == x {
        return Some(ys[i]);
    }
    if i == 0 {
        return None;
    }
    Some(ys[i - 1] + (ys[i] - ys[i - 1]) * (x - xs[i - 1]) / (xs[i] - xs[i - 1]))
}

/// Resample a layered vector onto a uniform grid 0, step, 2*step, ... up to
/// the deepest schedule level.
pub fn interpolate_full_depth(
    layered: &[f64],
    sched: &DepthSchedule,
    step: f64,
    month: Month,
) -> Result<Profile> {
    if layered.len() != sched.len() {
        return Err(Error::dim("layered vector", sched.len(), layered.len()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::validation(format!("step must be positive, got {step}")));
    }
    let last = sched.last_level();
    let count = (last / step + 1e-9).floor() as usize + 1;
    let samples = (0..count)
        .map(|k| {
            let z = k as f64 * step;
            let v = piecewise_linear(sched.levels(), layered, z).ok_or(Error::OutOfRange {
                depth: z,
                min: sched.levels()[0],
                max: last,
            })?;
            Ok((z, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Profile::new(month, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn m(i: i32) -> Month {
        Month::from_ym(2017, 1).offset(i)
    }

    #[test]
    fn paper58_levels() {
        let s = DepthSchedule::paper58();
        assert_eq!(s.len(), 58);
        assert_eq!(s.levels()[0], 0.0);
        assert_eq!(s.last_level(), 1975.0);
        assert!(s.levels().windows(2).all(|w| w[1] > w[0]));
        // nothing between 460 and 500
        assert!(!s.levels().iter().any(|&d| d > 460.0 && d < 500.0));
        assert_eq!(s.index_of(5.0), Some(1));
        assert_eq!(s.index_of(20.0), Some(3));
    }

    #[test]
    fn custom_schedules() {
        assert_eq!(
            build_depth_schedule(&ScheduleSpec::Custom(vec![0.0, 100.0]))
                .unwrap()
                .len(),
            2
        );
        assert!(build_depth_schedule(&ScheduleSpec::Custom(vec![100.0, 50.0])).is_err());
        assert!(DepthSchedule::custom(vec![-5.0, 0.0]).is_err());
        assert!(DepthSchedule::custom(vec![0.0, 10.0, 10.0]).is_err());
        assert!(DepthSchedule::custom(vec![]).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(Profile::new(m(0), vec![(0.0, 1500.0)]).is_err());
        assert!(Profile::new(m(0), vec![(0.0, 1500.0), (0.0, 1501.0)]).is_err());
        assert!(Profile::new(m(0), vec![(0.0, 1500.0), (10.0, 1800.0)]).is_err());
        assert!(Profile::new(m(0), vec![(-1.0, 1500.0), (10.0, 1500.0)]).is_err());
        assert!(Profile::new(m(0), vec![(0.0, f64::NAN), (10.0, 1500.0)]).is_err());
        let wide = SpeedBand { lo: 0.0, hi: 2000.0 };
        assert!(Profile::with_band(m(0), vec![(0.0, 1500.0), (10.0, 1800.0)], wide).is_ok());
    }

    #[test]
    fn layer_midpoint() {
        let p = Profile::new(m(0), vec![(0.0, 1500.0), (10.0, 1510.0)]).unwrap();
        let s = DepthSchedule::custom(vec![0.0, 5.0, 10.0]).unwrap();
        assert_eq!(layer_profile(&p, &s).unwrap(), vec![1500.0, 1505.0, 1510.0]);
    }

    #[test]
    fn layer_two_point_profile_on_paper58() {
        let p = Profile::new(m(0), vec![(0.0, 1500.0), (2000.0, 1480.0)]).unwrap();
        let v = layer_profile(&p, &DepthSchedule::paper58()).unwrap();
        assert_eq!(v.len(), 58);
        assert_abs_diff_eq!(v[57], 1480.25, epsilon = 1e-9);
    }

    #[test]
    fn layer_out_of_range_and_clamp() {
        let p = Profile::new(m(0), vec![(2.0, 1500.0), (10.0, 1510.0)]).unwrap();
        let s = DepthSchedule::custom(vec![0.0, 5.0, 10.0, 20.0]).unwrap();
        assert!(matches!(
            layer_profile(&p, &s),
            Err(Error::OutOfRange { depth, .. }) if depth == 0.0
        ));
        let v = layer_profile_with(&p, &s, true).unwrap();
        assert_eq!(v[0], 1500.0);
        assert_eq!(v[3], 1510.0);
    }

    #[test]
    fn assemble_shapes_and_gaps() {
        let sched = DepthSchedule::paper58();
        let mk = |i| Profile::new(m(i), vec![(0.0, 1540.0), (2000.0, 1500.0)]).unwrap();
        let profiles: Vec<_> = (0..60).map(mk).collect();
        let s = assemble_series(&profiles, &sched).unwrap();
        assert_eq!(s.values().shape(), (58, 60));
        assert_eq!(s.end_month().to_string(), "2021-12");

        let one = assemble_series(&profiles[..1], &sched).unwrap();
        assert_eq!(one.values().shape(), (58, 1));

        let gap = vec![mk(0), mk(2)];
        assert!(matches!(
            assemble_series(&gap, &sched),
            Err(Error::Chronology { position: 1, .. })
        ));
        let dup = vec![mk(0), mk(0)];
        assert!(assemble_series(&dup, &sched).is_err());

        let shallow = Profile::new(m(1), vec![(0.0, 1540.0), (100.0, 1500.0)]).unwrap();
        let err = assemble_series(&[mk(0), shallow], &sched).unwrap_err();
        assert!(matches!(err, Error::Layering { month, .. } if month == m(1)));
    }

    fn ramp_series(months: usize) -> LayeredSeries {
        let sched = DepthSchedule::custom(vec![0.0, 10.0]).unwrap();
        let values = DMatrix::from_fn(2, months, |j, i| 1500.0 + i as f64 + j as f64 * 100.0);
        LayeredSeries::new(sched, m(0), values).unwrap()
    }

    #[test]
    fn split_four_cycles() {
        let s = ramp_series(60);
        // target 2021-01 is column 48 (0-based)
        let w = WindowSpec::new(12, 4, Month::from_ym(2021, 1)).unwrap();
        let (t, v) = split_train_validation(&s, &w).unwrap();
        assert_eq!(t.ncols(), 48);
        assert_eq!(t[(0, 0)], 1500.0);
        assert_eq!(t[(0, 47)], 1547.0);
        assert_eq!(v[0], 1548.0);
    }

    #[test]
    fn split_minimal_and_errors() {
        let s = ramp_series(13);
        let w = WindowSpec::new(12, 1, m(12)).unwrap();
        let (t, v) = split_train_validation(&s, &w).unwrap();
        assert_eq!(t.ncols(), 12);
        assert_eq!(v[0], 1512.0);

        let beyond = WindowSpec::new(12, 1, m(13)).unwrap();
        assert!(matches!(
            split_train_validation(&s, &beyond),
            Err(Error::Window { .. })
        ));
        // training alone is still available for a true forecast
        assert_eq!(training_window(&s, &beyond).unwrap().ncols(), 12);

        let early = WindowSpec::new(12, 2, m(12)).unwrap();
        assert!(split_train_validation(&s, &early).is_err());
        assert!(WindowSpec::new(0, 1, m(0)).is_err());
    }

    #[test]
    fn norm_endpoints_and_constant() {
        let t = DMatrix::from_row_slice(2, 3, &[1500.0, 1505.0, 1510.0, 1480.0, 1480.0, 1480.0]);
        let p = fit_norm(&t).unwrap();
        let n = apply_norm(&t, &p).unwrap();
        assert_eq!(n.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        assert_eq!(n.row(1).iter().copied().collect::<Vec<_>>(), vec![0.5; 3]);
        assert_eq!(denorm(&[0.0, 0.5], &p).unwrap(), vec![1500.0, 1480.0]);
        assert_eq!(denorm(&[1.0, 0.9], &p).unwrap(), vec![1510.0, 1480.0]);
        assert!(denorm(&[0.0], &p).is_err());
        assert!(fit_norm(&DMatrix::<f64>::zeros(0, 0)).is_err());
    }

    #[test]
    fn full_depth_passthrough_and_midpoint() {
        let s = DepthSchedule::custom(vec![0.0, 5.0, 10.0]).unwrap();
        let p = interpolate_full_depth(&[1500.0, 1502.0, 1507.0], &s, 5.0, m(0)).unwrap();
        assert_eq!(p.samples(), &[(0.0, 1500.0), (5.0, 1502.0), (10.0, 1507.0)]);

        let s2 = DepthSchedule::custom(vec![0.0, 10.0]).unwrap();
        let p2 = interpolate_full_depth(&[1500.0, 1510.0], &s2, 5.0, m(0)).unwrap();
        assert_eq!(p2.samples(), &[(0.0, 1500.0), (5.0, 1505.0), (10.0, 1510.0)]);
        assert!(interpolate_full_depth(&[1500.0], &s2, 5.0, m(0)).is_err());
        assert!(interpolate_full_depth(&[1500.0, 1510.0], &s2, 0.0, m(0)).is_err());
    }

    #[test]
    fn full_depth_sample_count() {
        let s = DepthSchedule::paper58();
        let v = vec![1500.0; 58];
        for step in [1.0, 2.0, 5.0, 25.0, 7.0] {
            let p = interpolate_full_depth(&v, &s, step, m(0)).unwrap();
            let expected = (1975.0 / step).floor() as usize + 1;
            assert_eq!(p.samples().len(), expected, "step {step}");
        }
        let p = interpolate_full_depth(&v, &s, 1.0, m(0)).unwrap();
        assert_eq!(p.samples().len(), 1976);
        assert_eq!(p.last_depth(), 1975.0);
    }

    proptest! {
        #[test]
        fn layering_identity_on_grid(speeds in prop::collection::vec(1450.0f64..1550.0, 58)) {
            let sched = DepthSchedule::paper58();
            let samples: Vec<_> = sched.levels().iter().copied().zip(speeds.iter().copied()).collect();
            let p = Profile::new(m(0), samples).unwrap();
            prop_assert_eq!(layer_profile(&p, &sched).unwrap(), speeds);
        }

        #[test]
        fn full_depth_then_layer_is_identity(speeds in prop::collection::vec(1450.0f64..1550.0, 58),
                                             step in prop::sample::select(vec![1.0, 5.0])) {
            let sched = DepthSchedule::paper58();
            let dense = interpolate_full_depth(&speeds, &sched, step, m(0)).unwrap();
            let back = layer_profile(&dense, &sched).unwrap();
            for (a, b) in back.iter().zip(&speeds) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn norm_round_trip(rows in 1usize..6, cols in 1usize..10, seed in any::<u64>(), constant_row in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut t = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(1400.0..1600.0));
            if constant_row {
                t.row_mut(0).fill(1480.0);
            }
            let p = fit_norm(&t).unwrap();
            let n = apply_norm(&t, &p).unwrap();
            for i in 0..cols {
                let col: Vec<f64> = n.column(i).iter().copied().collect();
                let back = denorm(&col, &p).unwrap();
                for j in 0..rows {
                    prop_assert!((back[j] - t[(j, i)]).abs() < 1e-9);
                    prop_assert!((0.0..=1.0).contains(&col[j]));
                }
            }
        }

        #[test]
        fn split_column_counts(n in 1usize..5, c in 1usize..13, extra in 0usize..5) {
            let s = ramp_series(n * c + 1 + extra);
            let w = WindowSpec::new(c, n, m((n * c) as i32)).unwrap();
            let (t, v) = split_train_validation(&s, &w).unwrap();
            prop_assert_eq!(t.ncols(), n * c);
            // last training column immediately precedes V
            prop_assert_eq!(t[(0, n * c - 1)] + 1.0, v[0]);
        }
    }
}
