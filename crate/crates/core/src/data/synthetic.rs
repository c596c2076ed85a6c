//! Deterministic synthetic market data.
//!
//! The price is a closed-form sum of daily/weekly/annual sinusoids plus
//! autocorrelated anomalies, iid noise, and sparse positive spikes. The load
//! and renewables forecasts expose the anomaly processes that drive the
//! price, so feature-based models have genuine signal that the naive
//! same-hour-yesterday baseline cannot use.

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DataError, TimeSeriesFrame};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub start: DateTime<Utc>,
    pub base_price: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub annual_amplitude: f64,
    /// Scales every stochastic contribution to the price; 0 leaves the pure
    /// closed form.
    pub noise_scale: f64,
    pub price_noise_std: f64,
    /// Per-hour spike probability.
    pub spike_rate: f64,
    pub spike_scale: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            start: Utc.with_ymd_and_hms(2023, 1, 1, 0, 0, 0).unwrap(),
            base_price: 80.0,
            daily_amplitude: 15.0,
            weekly_amplitude: 6.0,
            annual_amplitude: 12.0,
            noise_scale: 1.0,
            price_noise_std: 2.0,
            spike_rate: 0.004,
            spike_scale: 60.0,
        }
    }
}

impl SyntheticSpec {
    /// Deterministic part of the price at hour index k.
    pub fn closed_form(&self, k: usize) -> f64 {
        use std::f64::consts::TAU;
        let k = k as f64;
        self.base_price
            + self.daily_amplitude * (TAU * k / 24.0).sin()
            + self.weekly_amplitude * (TAU * k / 168.0).sin()
            + self.annual_amplitude * (TAU * k / 8760.0).sin()
    }

    /// Parse a flat key-value spec file (one `key value` pair per line,
    /// `#` comments). Unknown keys are rejected.
    pub fn from_kv_text(text: &str) -> Result<Self, DataError> {
        let mut spec = SyntheticSpec::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| DataError::Config(format!("line {}: missing value", lineno + 1)))?;
            let value = value.trim();
            let num = || -> Result<f64, DataError> {
                value
                    .parse()
                    .map_err(|_| DataError::Config(format!("line {}: bad number {value:?}", lineno + 1)))
            };
            match key {
                "start" => {
                    spec.start = DateTime::parse_from_rfc3339(value)
                        .map(|t| t.with_timezone(&Utc))
                        .map_err(|_| {
                            DataError::Config(format!("line {}: bad start timestamp", lineno + 1))
                        })?;
                }
                "base_price" => spec.base_price = num()?,
                "daily_amplitude" => spec.daily_amplitude = num()?,
                "weekly_amplitude" => spec.weekly_amplitude = num()?,
                "annual_amplitude" => spec.annual_amplitude = num()?,
                "noise_scale" => spec.noise_scale = num()?,
                "price_noise_std" => spec.price_noise_std = num()?,
                "spike_rate" => spec.spike_rate = num()?,
                "spike_scale" => spec.spike_scale = num()?,
                other => {
                    return Err(DataError::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(spec)
    }
}

/// Standard normal via Box-Muller; keeps the dependency set small and the
/// draw sequence fully pinned by the seed.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generate `days` full days of hourly data. Same (days, spec, seed) in,
/// bitwise-same frame out.
pub fn gen_synthetic(days: u32, spec: &SyntheticSpec, seed: u64) -> TimeSeriesFrame {
    use std::f64::consts::TAU;
    assert!(days >= 1, "need at least one day");
    let hours = days as usize * 24;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // AR(1) anomaly processes with unit stationary variance.
    let phi_l = 0.97;
    let phi_r = 0.95;
    let phi_n = 0.9;
    let (mut ul, mut ur, mut un) = (0.0f64, 0.0f64, 0.0f64);

    let mut price = Vec::with_capacity(hours);
    let mut load = Vec::with_capacity(hours);
    let mut res = Vec::with_capacity(hours);
    let mut gen = Vec::with_capacity(hours);
    let mut netflow = Vec::with_capacity(hours);

    for k in 0..hours {
        ul = phi_l * ul + (1.0 - phi_l * phi_l).sqrt() * normal(&mut rng);
        ur = phi_r * ur + (1.0 - phi_r * phi_r).sqrt() * normal(&mut rng);
        un = phi_n * un + (1.0 - phi_n * phi_n).sqrt() * normal(&mut rng);
        let eps = normal(&mut rng);
        let spike = if spec.spike_rate > 0.0 && rng.gen_bool(spec.spike_rate.clamp(0.0, 1.0)) {
            spec.spike_scale * rng.gen_range(0.5..1.5)
        } else {
            0.0
        };

        let kf = k as f64;
        price.push(
            spec.closed_form(k)
                + spec.noise_scale * (8.0 * ul - 6.0 * ur + spec.price_noise_std * eps)
                + spike,
        );
        load.push(5000.0 + 800.0 * (TAU * kf / 24.0).sin() + 300.0 * (TAU * kf / 8760.0).sin() + 200.0 * ul);
        res.push(1500.0 + 400.0 * (TAU * kf / 8760.0 + 1.0).sin() + 250.0 * ur);
        gen.push(4600.0 + 700.0 * (TAU * kf / 24.0).sin() + 100.0 * ul + 80.0 * un);
        netflow.push(300.0 * un);
    }

    TimeSeriesFrame::from_columns(
        spec.start,
        vec![
            ("price_eur_mwh", price),
            ("load_fc_mw", load),
            ("res_fc_mw", res),
            ("gen_fc_mw", gen),
            ("netflow_fc_mw", netflow),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ingest_csv, write_frame_csv, CsvSchema, PRICE_COL};

    #[test]
    fn same_seed_same_frame() {
        let spec = SyntheticSpec::default();
        let a = gen_synthetic(10, &spec, 42);
        let b = gen_synthetic(10, &spec, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn different_seed_differs() {
        let spec = SyntheticSpec::default();
        let a = gen_synthetic(3, &spec, 1);
        let b = gen_synthetic(3, &spec, 2);
        assert_ne!(a.column(PRICE_COL).unwrap(), b.column(PRICE_COL).unwrap());
    }

    #[test]
    fn noise_free_price_is_the_closed_form() {
        let spec = SyntheticSpec {
            noise_scale: 0.0,
            spike_rate: 0.0,
            ..SyntheticSpec::default()
        };
        let frame = gen_synthetic(5, &spec, 7);
        let price = frame.column(PRICE_COL).unwrap();
        for (k, &p) in price.iter().enumerate() {
            assert_eq!(p, spec.closed_form(k), "hour {k}");
        }
    }

    #[test]
    fn daily_amplitude_sets_per_day_range() {
        // With only the daily sinusoid active, hourly sampling hits the
        // exact extrema (sin peaks at whole-hour phases), so each day's
        // max - min is exactly twice the amplitude.
        let spec = SyntheticSpec {
            daily_amplitude: 10.0,
            weekly_amplitude: 0.0,
            annual_amplitude: 0.0,
            noise_scale: 0.0,
            spike_rate: 0.0,
            ..SyntheticSpec::default()
        };
        let frame = gen_synthetic(4, &spec, 1);
        let price = frame.column(PRICE_COL).unwrap();
        for day in price.chunks(24) {
            let max = day.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = day.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!((max - min - 20.0).abs() < 1e-9, "range {}", max - min);
        }
    }

    #[test]
    fn spikes_are_sparse_and_positive() {
        let spec = SyntheticSpec {
            noise_scale: 0.0,
            spike_rate: 0.2,
            ..SyntheticSpec::default()
        };
        let frame = gen_synthetic(20, &spec, 3);
        let price = frame.column(PRICE_COL).unwrap();
        let mut spiked = 0usize;
        for (k, &p) in price.iter().enumerate() {
            let excess = p - spec.closed_form(k);
            if excess.abs() > 1e-9 {
                assert!(excess > 0.0, "spike must push the price up");
                assert!(excess >= 0.5 * spec.spike_scale && excess <= 1.5 * spec.spike_scale);
                spiked += 1;
            }
        }
        assert!(spiked > 0, "rate 0.2 over 480 hours should spike");
        assert!(spiked < 240, "spikes should stay sparse");
    }

    #[test]
    fn round_trips_through_ingest() {
        let frame = gen_synthetic(3, &SyntheticSpec::default(), 5);
        let f = tempfile::NamedTempFile::new().unwrap();
        write_frame_csv(&frame, f.path()).unwrap();
        let back = ingest_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(back, frame);
        assert!(!back.has_missing());
    }

    #[test]
    fn exogenous_anomaly_feeds_the_price() {
        // Remove deterministic parts; what's left of the price must be
        // reconstructible from the anomalies exposed by load/res forecasts.
        let spec = SyntheticSpec {
            price_noise_std: 0.0,
            spike_rate: 0.0,
            ..SyntheticSpec::default()
        };
        let frame = gen_synthetic(10, &spec, 11);
        let price = frame.column(PRICE_COL).unwrap();
        let load = frame.column("load_fc_mw").unwrap();
        let res = frame.column("res_fc_mw").unwrap();
        use std::f64::consts::TAU;
        for k in 0..frame.n_hours() {
            let kf = k as f64;
            let ul = (load[k] - 5000.0 - 800.0 * (TAU * kf / 24.0).sin() - 300.0 * (TAU * kf / 8760.0).sin()) / 200.0;
            let ur = (res[k] - 1500.0 - 400.0 * (TAU * kf / 8760.0 + 1.0).sin()) / 250.0;
            let rebuilt = spec.closed_form(k) + 8.0 * ul - 6.0 * ur;
            assert!((rebuilt - price[k]).abs() < 1e-6, "hour {k}");
        }
    }

    #[test]
    fn kv_spec_parsing() {
        let spec = SyntheticSpec::from_kv_text(
            "# demo\nbase_price 55\ndaily_amplitude 9.5\nspike_rate 0\nstart 2022-07-01T00:00:00Z\n",
        )
        .unwrap();
        assert_eq!(spec.base_price, 55.0);
        assert_eq!(spec.daily_amplitude, 9.5);
        assert_eq!(spec.spike_rate, 0.0);
        assert_eq!(spec.start, Utc.with_ymd_and_hms(2022, 7, 1, 0, 0, 0).unwrap());
        assert!(SyntheticSpec::from_kv_text("bogus_key 1\n").is_err());
        assert!(SyntheticSpec::from_kv_text("base_price abc\n").is_err());
    }
}
