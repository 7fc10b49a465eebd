//! Deterministic synthetic workloads standing in for the real trace archive.
//!
//! The shapes are qualitative: a requests/day curve that ramps up before a
//! tournament, peaks during it with match-day spikes and decays afterwards,
//! and two requests/second traces, one quiet (peak about 50/s) and one busy
//! and volatile (peak about 3300/s).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::trace::{DayRequestsSeries, DayRow, EpochCount, EpochRequestsSeries, MatchCalendar};

/// Days covered by the day-level trace, including four empty leading days.
pub const TRACE_DAYS: usize = 92;
/// Requests on the busiest day of the day-level profile.
pub const PEAK_DAY_REQUESTS: f64 = 73_291_868.0;
pub const PEAK_DAY: u32 = 66;
const FIRST_MATCH_DAY: u32 = 46;
const LAST_MATCH_DAY: u32 = 78;
const EMPTY_LEADING_DAYS: u32 = 4;

/// 1998-05-01 00:00:00 UTC, the start of day 6.
pub const DAY6_START: u32 = 893_980_800;
/// 1998-06-30 00:00:00 UTC, the start of day 66.
pub const DAY66_START: u32 = 899_164_800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    WorldcupDays,
    Day6Seconds,
    Day66Seconds,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worldcup-days" => Ok(SynthKind::WorldcupDays),
            "day6-seconds" => Ok(SynthKind::Day6Seconds),
            "day66-seconds" => Ok(SynthKind::Day66Seconds),
            other => Err(Error::config(format!("unknown synthetic profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthProfile {
    pub kind: SynthKind,
    pub length: usize,
    pub seed: u64,
    /// Peak value of the generated series.
    pub amplitude: f64,
    /// Relative noise level.
    pub noise: f64,
}

impl SynthProfile {
    pub fn new(kind: SynthKind, seed: u64) -> Self {
        match kind {
            SynthKind::WorldcupDays => SynthProfile {
                kind,
                length: TRACE_DAYS,
                seed,
                amplitude: PEAK_DAY_REQUESTS,
                noise: 0.05,
            },
            SynthKind::Day6Seconds => SynthProfile {
                kind,
                length: 86_400,
                seed,
                amplitude: 50.0,
                noise: 0.05,
            },
            SynthKind::Day66Seconds => SynthProfile {
                kind,
                length: 3_500,
                seed,
                amplitude: 3_300.0,
                noise: 0.08,
            },
        }
    }

    pub fn with_length(mut self, length: usize) -> Self {
        self.length = length;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.length < 3 || !(self.amplitude > 0.0) || !(self.noise >= 0.0) {
            return Err(Error::config(format!("invalid synthetic profile {self:?}")));
        }
        if self.kind == SynthKind::WorldcupDays && self.length as u32 <= EMPTY_LEADING_DAYS {
            return Err(Error::config("day profile needs more than the empty leading days"));
        }
        Ok(())
    }
}

/// Matches per day of the tournament, day 1 being 1998-04-26.
pub fn worldcup_calendar() -> MatchCalendar {
    let group_stage = [2, 2, 3, 3, 3, 3, 2, 2, 2, 2, 3, 3, 3, 4, 4, 4, 3];
    let mut entries: Vec<(u32, u32)> = group_stage
        .iter()
        .enumerate()
        .map(|(i, &m)| (FIRST_MATCH_DAY + i as u32, m))
        .collect();
    // round of 16, quarter finals, semi finals, third place, final
    entries.extend([(63, 2), (64, 2), (65, 2), (66, 2), (69, 2), (70, 2), (73, 1), (74, 1), (77, 1), (78, 1)]);
    entries.into_iter().collect()
}

fn lognormal_factor(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 1.0;
    }
    Normal::new(0.0, sigma).unwrap().sample(rng).exp()
}

/// Requests/day with match columns from [`worldcup_calendar`].
pub fn synth_day_requests(profile: &SynthProfile) -> Result<DayRequestsSeries> {
    profile.validate()?;
    if profile.kind != SynthKind::WorldcupDays {
        return Err(Error::config("not a day-level profile"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let calendar = worldcup_calendar();
    let mut level = Vec::with_capacity(profile.length);
    for day in 1..=profile.length as u32 {
        let d = f64::from(day);
        let base = if day <= EMPTY_LEADING_DAYS {
            0.0
        } else if day < FIRST_MATCH_DAY {
            // 1.5% of the peak rising to 25% by the opening day
            let x = (d - 5.0) / f64::from(FIRST_MATCH_DAY - 5);
            0.015 * (x * (0.25f64 / 0.015).ln()).exp()
        } else if day <= LAST_MATCH_DAY {
            let bump = (-((d - f64::from(PEAK_DAY)) / 8.0).powi(2)).exp();
            0.35 + 0.3 * bump + 0.06 * f64::from(calendar.matches(day))
        } else {
            0.2 * (-(d - f64::from(LAST_MATCH_DAY)) / 3.0).exp() + 0.01
        };
        // Day 1 is a Sunday; weekends are quieter outside the tournament.
        let weekday = (day - 1) % 7;
        let weekend = matches!(weekday, 0 | 6) && !(FIRST_MATCH_DAY..=LAST_MATCH_DAY).contains(&day);
        let shaped = base * if weekend { 0.85 } else { 1.0 };
        level.push(shaped * lognormal_factor(&mut rng, profile.noise));
    }
    let peak = level.iter().copied().fold(0.0, f64::max);
    let rows = level
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let day = i as u32 + 1;
            let matches = calendar.matches(day);
            DayRow {
                day,
                requests: (v / peak * profile.amplitude).round() as u64,
                matches,
                is_match: u8::from(matches >= 1),
            }
        })
        .collect();
    Ok(DayRequestsSeries { rows })
}

/// Requests/second for every second of the profile's length.
pub fn synth_epoch_requests(profile: &SynthProfile) -> Result<EpochRequestsSeries> {
    profile.validate()?;
    // (first epoch, mean rate, AR(1) persistence of the log level, daily swing, per-second jitter)
    let (start, base_rate, persistence, swing, jitter) = match profile.kind {
        SynthKind::Day6Seconds => (DAY6_START, 20.0, 0.98, 0.2, 0.0),
        SynthKind::Day66Seconds => (DAY66_START + 9 * 3_500, 2_000.0, 0.98, 0.1, 0.2),
        SynthKind::WorldcupDays => return Err(Error::config("not a per-second profile")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let shock = Normal::new(0.0, profile.noise.max(1e-12)).unwrap();
    let mut log_level = 0.0;
    let mut rates = Vec::with_capacity(profile.length);
    for t in 0..profile.length {
        log_level = persistence * log_level + shock.sample(&mut rng);
        let daily = 1.0 + swing * (std::f64::consts::TAU * t as f64 / 86_400.0 - 1.0).sin();
        let burst = if rand::Rng::gen_bool(&mut rng, 0.002) { 1.6 } else { 1.0 };
        rates.push(base_rate * daily * log_level.exp() * burst * lognormal_factor(&mut rng, jitter));
    }
    let counts: Vec<f64> = rates
        .iter()
        .map(|&lambda| Poisson::new(lambda.max(1e-3)).unwrap().sample(&mut rng))
        .collect();
    let peak = counts.iter().copied().fold(0.0, f64::max).max(1.0);
    let rows = counts
        .iter()
        .enumerate()
        .map(|(t, c)| EpochCount {
            epoch: start + t as u32,
            requests: ((c / peak * profile.amplitude).round() as u64).max(1),
        })
        .collect();
    Ok(EpochRequestsSeries { rows })
}

pub fn synth_series(profile: &SynthProfile) -> Result<TimeSeries> {
    match profile.kind {
        SynthKind::WorldcupDays => synth_day_requests(profile)?.to_time_series("day-requests"),
        SynthKind::Day6Seconds => synth_epoch_requests(profile)?.to_time_series("wc_day6_1", false),
        SynthKind::Day66Seconds => synth_epoch_requests(profile)?.to_time_series("wc_day66_10", false),
    }
}
