//! Seeded synthetic greenhouse data.
//!
//! Weather (cloudiness, outside temperature drift) and sensor noise come from
//! separate ChaCha streams, so changing `noise_level` leaves the underlying
//! climate unchanged.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Column, Interval, TimeSeriesTable};

pub const ENVIRONMENT_COLUMNS: [&str; 5] = ["co2", "humidity", "radiation", "temp_in", "temp_out"];

const PEAK_RADIATION: f64 = 800.0;
const BASE_DIAMETER: f64 = 10.0;
/// Diameter gained per hour by the growth trend (mm).
const GROWTH_PER_HOUR: f64 = 0.002;
/// Peak diurnal shrinkage (mm) at full lagged radiation.
const SHRINK_AMPLITUDE: f64 = 0.08;
const YIELD_MAX: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FicusSdv,
    TomatoYield,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::FicusSdv => "ficus_sdv",
            Scenario::TomatoYield => "tomato_yield",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ficus_sdv" => Ok(Scenario::FicusSdv),
            "tomato_yield" => Ok(Scenario::TomatoYield),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub scenario: Scenario,
    pub days: usize,
    pub seed: u64,
    /// Gaussian noise std as a fraction of each signal's range.
    pub noise_level: f64,
    /// Delay in days between climate and the yield it produces.
    pub dependency_lag: usize,
}

impl SynthConfig {
    pub fn new(scenario: Scenario) -> Self {
        SynthConfig {
            scenario,
            days: match scenario {
                Scenario::FicusSdv => 42,
                Scenario::TomatoYield => 364,
            },
            seed: 0,
            noise_level: 0.05,
            dependency_lag: 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::Config("days must be positive".into()));
        }
        if self.scenario == Scenario::TomatoYield && self.days < 14 {
            return Err(Error::Config(format!(
                "tomato_yield needs at least 14 days, got {}",
                self.days
            )));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::Config(format!("noise_level {}", self.noise_level)));
        }
        if self.dependency_lag == 0 {
            return Err(Error::Config("dependency_lag must be positive".into()));
        }
        Ok(())
    }
}

/// Generated series. `weekly` holds the yield for the tomato scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub hourly: TimeSeriesTable,
    pub weekly: Option<TimeSeriesTable>,
}

/// First timestamp of a scenario. Both runs end in a season no darker than
/// their start, so test targets stay inside the training range.
pub fn start_time(scenario: Scenario) -> DateTime<Utc> {
    match scenario {
        Scenario::FicusSdv => Utc.with_ymd_and_hms(2021, 7, 1, 0, 0, 0).unwrap(),
        Scenario::TomatoYield => Utc.with_ymd_and_hms(2020, 8, 7, 0, 0, 0).unwrap(),
    }
}

fn day_of_year(t: DateTime<Utc>) -> i64 {
    t.ordinal() as i64
}

/// Noise-free climate, hour by hour.
struct Climate {
    radiation: Vec<f64>,
    temp_out: Vec<f64>,
    temp_in: Vec<f64>,
    co2: Vec<f64>,
    humidity: Vec<f64>,
}

fn climate(days: usize, first_day: i64, rng: &mut ChaCha8Rng) -> Climate {
    let hours = days * 24;
    let mut c = Climate {
        radiation: Vec::with_capacity(hours),
        temp_out: Vec::with_capacity(hours),
        temp_in: Vec::with_capacity(hours),
        co2: Vec::with_capacity(hours),
        humidity: Vec::with_capacity(hours),
    };
    let mut drift = 0.0;
    let mut t_in = 18.0;
    for day in 0..days {
        let doy = (first_day + day as i64) as f64;
        let season = 0.5 * (1.0 - (2.0 * PI * (doy - 172.0 + 182.5) / 365.0).cos());
        let cloud = rng.random_range(0.3..1.0);
        drift = 0.8 * drift + rng.random_range(-1.5..1.5);
        for hour in 0..24 {
            let h = hour as f64;
            let sun = (PI * (h - 6.0) / 12.0).sin().max(0.0);
            let rad = PEAK_RADIATION * (0.35 + 0.65 * season) * cloud * sun;
            let out = 4.0 + 14.0 * season + 5.0 * (2.0 * PI * (h - 9.0) / 24.0).sin() + drift;
            t_in += 0.3 * (17.0 + 0.012 * rad + 0.25 * (out - 10.0) - t_in);
            c.radiation.push(rad);
            c.temp_out.push(out);
            c.temp_in.push(t_in);
            c.co2.push((850.0 - 0.6 * rad).clamp(200.0, 1500.0));
            c.humidity
                .push((88.0 - 1.6 * (t_in - 17.0) - 0.015 * rad).clamp(0.0, 100.0));
        }
    }
    c
}

fn range(v: &[f64]) -> f64 {
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    });
    hi - lo
}

/// Adds N(0, (level * range)^2) to each value, then clamps.
fn add_noise(v: &mut [f64], level: f64, bounds: (f64, f64), rng: &mut ChaCha8Rng) {
    let sd = level * range(v);
    if sd > 0.0 {
        let n = Normal::new(0.0, sd).expect("finite std");
        for x in v.iter_mut() {
            *x += n.sample(rng);
        }
    }
    for x in v.iter_mut() {
        *x = x.clamp(bounds.0, bounds.1);
    }
}

fn environment_columns(c: &Climate, skip: usize, noise: f64, rng: &mut ChaCha8Rng) -> Vec<Column> {
    let specs: [(&str, &[f64], (f64, f64)); 5] = [
        ("co2", &c.co2, (200.0, 1500.0)),
        ("humidity", &c.humidity, (0.0, 100.0)),
        ("radiation", &c.radiation, (0.0, f64::INFINITY)),
        ("temp_in", &c.temp_in, (f64::NEG_INFINITY, f64::INFINITY)),
        ("temp_out", &c.temp_out, (f64::NEG_INFINITY, f64::INFINITY)),
    ];
    specs
        .into_iter()
        .map(|(name, values, bounds)| {
            let mut v = values[skip..].to_vec();
            add_noise(&mut v, noise, bounds, rng);
            Column {
                name: name.to_string(),
                values: v,
            }
        })
        .collect()
}

fn hourly_times(scenario: Scenario, hours: usize) -> Vec<DateTime<Utc>> {
    let t0 = start_time(scenario);
    (0..hours).map(|h| t0 + Duration::hours(h as i64)).collect()
}

/// Generates the scenario's series. A pure function of `config`.
pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut weather = ChaCha8Rng::seed_from_u64(config.seed);
    weather.set_stream(0);
    let mut noise = ChaCha8Rng::seed_from_u64(config.seed);
    noise.set_stream(1);
    match config.scenario {
        Scenario::FicusSdv => ficus(config, &mut weather, &mut noise),
        Scenario::TomatoYield => tomato(config, &mut weather, &mut noise),
    }
}

fn ficus(config: &SynthConfig, weather: &mut ChaCha8Rng, noise: &mut ChaCha8Rng) -> Result<SynthData> {
    let first_day = day_of_year(start_time(Scenario::FicusSdv));
    let c = climate(config.days, first_day, weather);

    // Shrinkage follows radiation through a first-order lag, so the stem is
    // thinnest in the afternoon and recovers overnight.
    let mut load = 0.0;
    let shrink: Vec<f64> = c
        .radiation
        .iter()
        .map(|r| {
            load += 0.35 * (r / PEAK_RADIATION - load);
            SHRINK_AMPLITUDE * load
        })
        .collect();
    let clean: Vec<f64> = shrink
        .iter()
        .enumerate()
        .map(|(t, s)| BASE_DIAMETER + GROWTH_PER_HOUR * t as f64 - s)
        .collect();
    let sdv_range = range(&clean.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>());
    let sd = config.noise_level * sdv_range;
    let step = (sd > 0.0).then(|| Normal::new(0.0, sd).expect("finite std"));
    let mut offset = 0.0;
    let diameter: Vec<f64> = clean
        .iter()
        .enumerate()
        .map(|(t, d)| {
            if let (Some(n), true) = (&step, t > 0) {
                offset += n.sample(noise);
            }
            d + offset
        })
        .collect();

    let mut columns = environment_columns(&c, 0, config.noise_level, noise);
    columns.push(Column {
        name: "stem_diameter".into(),
        values: diameter,
    });
    let hourly = TimeSeriesTable::new(
        hourly_times(Scenario::FicusSdv, c.radiation.len()),
        columns,
        Interval::Hourly,
    )?;
    Ok(SynthData { hourly, weekly: None })
}

/// Daily radiation-temperature integral: radiation sum (MJ m^-2) weighted
/// by mean inside temperature above a 10 degree base.
fn daily_rti(c: &Climate) -> Vec<f64> {
    c.radiation
        .chunks(24)
        .zip(c.temp_in.chunks(24))
        .map(|(r, t)| {
            let mj = r.iter().sum::<f64>() * 3600.0 / 1e6;
            let temp = t.iter().sum::<f64>() / 24.0;
            mj * ((temp - 10.0) / 10.0).max(0.0)
        })
        .collect()
}

/// Lagged weekly driver for week `k`: RTI summed over the 7 days ending
/// `lag` days before the harvest day.
fn lagged_integral(rti: &[f64], burn: usize, k: usize, lag: usize) -> f64 {
    let end = burn + 7 * k - lag;
    rti[end - 6..=end].iter().sum()
}

fn tomato(config: &SynthConfig, weather: &mut ChaCha8Rng, noise: &mut ChaCha8Rng) -> Result<SynthData> {
    let burn = config.dependency_lag + 7;
    let first_day = day_of_year(start_time(Scenario::TomatoYield)) - burn as i64;
    let c = climate(config.days + burn, first_day, weather);
    let rti = daily_rti(&c);
    let weeks = (config.days - 1) / 7 + 1;
    let drivers: Vec<f64> = (0..weeks)
        .map(|k| lagged_integral(&rti, burn, k, config.dependency_lag))
        .collect();
    let mut yields: Vec<f64> = drivers.iter().map(|&i| saturating_yield(i)).collect();
    add_noise(&mut yields, config.noise_level, (0.0, f64::INFINITY), noise);

    let hourly = TimeSeriesTable::new(
        hourly_times(Scenario::TomatoYield, config.days * 24),
        environment_columns(&c, burn * 24, config.noise_level, noise),
        Interval::Hourly,
    )?;
    let t0 = start_time(Scenario::TomatoYield);
    let weekly = TimeSeriesTable::new(
        (0..weeks).map(|k| t0 + Duration::weeks(k as i64)).collect(),
        vec![Column {
            name: "yield".into(),
            values: yields,
        }],
        Interval::Weekly,
    )?;
    Ok(SynthData {
        hourly,
        weekly: Some(weekly),
    })
}

/// Weekly yield (kg m^-2) as a saturating response to the lagged integral.
pub fn saturating_yield(integral: f64) -> f64 {
    YIELD_MAX * (1.0 - (-integral / 40.0).exp())
}

/// The noise-free weekly driver, aligned with the weekly yield rows.
pub fn yield_drivers(config: &SynthConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if config.scenario != Scenario::TomatoYield {
        return Err(Error::Config("yield drivers exist only for tomato_yield".into()));
    }
    let mut weather = ChaCha8Rng::seed_from_u64(config.seed);
    weather.set_stream(0);
    let burn = config.dependency_lag + 7;
    let first_day = day_of_year(start_time(Scenario::TomatoYield)) - burn as i64;
    let c = climate(config.days + burn, first_day, &mut weather);
    let rti = daily_rti(&c);
    let weeks = (config.days - 1) / 7 + 1;
    Ok((0..weeks)
        .map(|k| lagged_integral(&rti, burn, k, config.dependency_lag))
        .collect())
}

/// Running total of per-period yields.
pub fn cumulative_yield(yields: &[f64]) -> Vec<f64> {
    yields
        .iter()
        .scan(0.0, |acc, y| {
            *acc += y;
            Some(*acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::compute_sdv;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    fn noiseless(s: Scenario) -> SynthConfig {
        SynthConfig {
            noise_level: 0.0,
            ..SynthConfig::new(s)
        }
    }

    #[test]
    fn deterministic() {
        for s in [Scenario::FicusSdv, Scenario::TomatoYield] {
            let cfg = SynthConfig::new(s);
            assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        }
        let other = SynthConfig {
            seed: 1,
            ..SynthConfig::new(Scenario::FicusSdv)
        };
        assert_ne!(
            generate(&other).unwrap(),
            generate(&SynthConfig::new(Scenario::FicusSdv)).unwrap()
        );
    }

    #[test]
    fn sdv_has_daily_period() {
        let data = generate(&noiseless(Scenario::FicusSdv)).unwrap();
        let sdv = compute_sdv(data.hourly.column("stem_diameter").unwrap()).unwrap();
        let r = pearson(&sdv[..sdv.len() - 24], &sdv[24..]);
        assert!(r > 0.95, "lag-24 autocorrelation {r}");
    }

    #[test]
    fn yield_tracks_lagged_integral() {
        let cfg = noiseless(Scenario::TomatoYield);
        let data = generate(&cfg).unwrap();
        let y = data.weekly.unwrap().column("yield").unwrap().to_vec();
        let drivers = yield_drivers(&cfg).unwrap();
        let lagged = pearson(&y, &drivers);
        assert!(lagged > 0.9, "lagged correlation {lagged}");

        // unlagged weekly integral, shuffled
        let burn = cfg.dependency_lag + 7;
        let mut weather = ChaCha8Rng::seed_from_u64(cfg.seed);
        weather.set_stream(0);
        let first_day = day_of_year(start_time(Scenario::TomatoYield)) - burn as i64;
        let rti = daily_rti(&climate(cfg.days + burn, first_day, &mut weather));
        let mut control: Vec<f64> = (0..y.len()).map(|k| lagged_integral(&rti, burn, k, 0)).collect();
        use rand::seq::SliceRandom;
        control.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
        let shuffled = pearson(&y, &control);
        assert!(shuffled < lagged, "control {shuffled} vs lagged {lagged}");
    }

    #[test]
    fn linear_oracle_solves_yield() {
        let cfg = noiseless(Scenario::TomatoYield);
        let y = generate(&cfg)
            .unwrap()
            .weekly
            .unwrap()
            .column("yield")
            .unwrap()
            .to_vec();
        let x = yield_drivers(&cfg).unwrap();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
            / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        let fit: Vec<f64> = x.iter().map(|a| my + slope * (a - mx)).collect();
        let rel = crate::metrics::relative_mse(&y, &fit).unwrap();
        assert!(rel < 0.05, "relative MSE {rel}");
    }

    #[test]
    fn physical_bounds() {
        for s in [Scenario::FicusSdv, Scenario::TomatoYield] {
            let cfg = SynthConfig {
                noise_level: 0.2,
                ..SynthConfig::new(s)
            };
            let data = generate(&cfg).unwrap();
            let t = &data.hourly;
            assert!(t.column("radiation").unwrap().iter().all(|&r| r >= 0.0));
            assert!(t.column("co2").unwrap().iter().all(|&c| (200.0..=1500.0).contains(&c)));
            assert!(t
                .column("humidity")
                .unwrap()
                .iter()
                .all(|&h| (0.0..=100.0).contains(&h)));
            if let Some(w) = data.weekly {
                let y = w.column("yield").unwrap();
                assert!(y.iter().all(|&v| v >= 0.0));
                let cum = cumulative_yield(y);
                assert!(cum.windows(2).all(|p| p[1] >= p[0]));
            }
        }
    }

    #[test]
    fn shapes() {
        let f = generate(&SynthConfig::new(Scenario::FicusSdv)).unwrap();
        assert_eq!(f.hourly.len(), 42 * 24);
        assert_eq!(
            f.hourly.column_names(),
            ["co2", "humidity", "radiation", "temp_in", "temp_out", "stem_diameter"]
        );
        let t = generate(&SynthConfig {
            days: 15,
            ..SynthConfig::new(Scenario::TomatoYield)
        })
        .unwrap();
        assert_eq!(t.hourly.len(), 15 * 24);
        assert_eq!(t.weekly.unwrap().len(), 3);
    }

    #[test]
    fn invalid_configs() {
        let short = SynthConfig {
            days: 13,
            ..SynthConfig::new(Scenario::TomatoYield)
        };
        assert!(matches!(generate(&short), Err(Error::Config(_))));
        let noisy = SynthConfig {
            noise_level: -0.1,
            ..SynthConfig::new(Scenario::FicusSdv)
        };
        assert!(generate(&noisy).is_err());
    }

    #[test]
    fn noise_leaves_climate_driver_alone() {
        let a = yield_drivers(&noiseless(Scenario::TomatoYield)).unwrap();
        let b = yield_drivers(&SynthConfig::new(Scenario::TomatoYield)).unwrap();
        assert_eq!(a, b);
    }
}
