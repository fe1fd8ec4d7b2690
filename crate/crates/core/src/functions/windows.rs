use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use super::FunctionsError;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// One local-time clock hour: day number since 1970-01-01 (local) and hour of day.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HourKey {
    pub day: i64,
    pub hour: u8,
}

impl HourKey {
    pub fn from_utc(timestamp: i64, utc_offset_s: i64) -> Self {
        let local = timestamp + utc_offset_s;
        HourKey {
            day: local.div_euclid(SECONDS_PER_DAY),
            hour: (local.rem_euclid(SECONDS_PER_DAY) / 3600) as u8,
        }
    }

    /// Day of week, Monday = 0.
    pub fn weekday(&self) -> usize {
        (self.day + 3).rem_euclid(7) as usize
    }

    pub fn start_utc(&self, utc_offset_s: i64) -> i64 {
        self.day * SECONDS_PER_DAY + self.hour as i64 * 3600 - utc_offset_s
    }
}

impl fmt::Display for HourKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::from_timestamp(self.day * SECONDS_PER_DAY, 0) {
            Some(d) => write!(f, "{}T{:02}", d.date_naive(), self.hour),
            None => write!(f, "day{}T{:02}", self.day, self.hour),
        }
    }
}

impl FromStr for HourKey {
    type Err = String;

    /// Parses `YYYY-MM-DDTHH`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (date, hour) = s.split_once('T').ok_or_else(|| format!("bad hour key '{s}'"))?;
        let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|e| format!("bad hour key '{s}': {e}"))?;
        let hour: u8 = hour.parse().map_err(|_| format!("bad hour in '{s}'"))?;
        if hour > 23 {
            return Err(format!("bad hour in '{s}'"));
        }
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        Ok(HourKey {
            day: (date - epoch).num_days(),
            hour,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Work,
    Entertainment,
    Home,
}

impl Window {
    pub const ALL: [Window; 3] = [Window::Work, Window::Entertainment, Window::Home];

    pub fn label(self) -> Label {
        match self {
            Window::Work => Label::Workplace,
            Window::Entertainment => Label::Entertainment,
            Window::Home => Label::Residential,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Workplace,
    Entertainment,
    Residential,
    Other,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Workplace => "workplace",
            Label::Entertainment => "entertainment",
            Label::Residential => "residential",
            Label::Other => "other",
        }
    }

    /// The time window in which this label's regions are hot, if any.
    pub fn window(self) -> Option<Window> {
        match self {
            Label::Workplace => Some(Window::Work),
            Label::Entertainment => Some(Window::Entertainment),
            Label::Residential => Some(Window::Home),
            Label::Other => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "workplace" => Ok(Label::Workplace),
            "entertainment" => Ok(Label::Entertainment),
            "residential" => Ok(Label::Residential),
            "other" => Ok(Label::Other),
            _ => Err(format!("bad label '{s}'")),
        }
    }
}

type Slots = [[bool; 24]; 7];

/// Weekly (day-of-week, hour) slots for the work, entertainment and home windows.
/// Each hour is assigned by its start time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimeWindows {
    slots: [Slots; 3],
}

const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

fn day_index(s: &str) -> Result<usize, FunctionsError> {
    DAYS.iter()
        .position(|d| d.eq_ignore_ascii_case(s))
        .ok_or_else(|| FunctionsError::InvalidWindows(format!("unknown day '{s}'")))
}

/// Parses `"mon-fri 08-17"`: days inclusive, hours half-open; `23-08` wraps past midnight
/// within each listed day.
pub fn parse_slot_spec(spec: &str) -> Result<Vec<(usize, u8)>, FunctionsError> {
    let bad = || FunctionsError::InvalidWindows(format!("bad window '{spec}', expected e.g. 'mon-fri 08-17'"));
    let (days, hours) = spec.trim().split_once(' ').ok_or_else(bad)?;
    let (d0, d1) = match days.split_once('-') {
        Some((a, b)) => (day_index(a)?, day_index(b)?),
        None => (day_index(days)?, day_index(days)?),
    };
    if d1 < d0 {
        return Err(bad());
    }
    let (h0, h1) = hours.trim().split_once('-').ok_or_else(bad)?;
    let h0: u8 = h0.parse().map_err(|_| bad())?;
    let h1: u8 = h1.parse().map_err(|_| bad())?;
    if h0 > 23 || h1 > 24 || h0 == h1 {
        return Err(bad());
    }
    let hours: Vec<u8> = if h0 < h1 { (h0..h1).collect() } else { (h0..24).chain(0..h1).collect() };
    Ok((d0..=d1).flat_map(|d| hours.iter().map(move |&h| (d, h))).collect())
}

impl TimeWindows {
    pub fn from_specs(work: &[String], entertainment: &[String], home: &[String]) -> Result<Self, FunctionsError> {
        let mut slots = [[[false; 24]; 7]; 3];
        for (w, specs) in [(Window::Work, work), (Window::Entertainment, entertainment), (Window::Home, home)] {
            for spec in specs {
                for (d, h) in parse_slot_spec(spec)? {
                    slots[w.index()][d][h as usize] = true;
                }
            }
        }
        for d in 0..7 {
            for h in 0..24 {
                if slots.iter().filter(|s| s[d][h]).count() > 1 {
                    return Err(FunctionsError::InvalidWindows(format!("windows overlap at {} {:02}:00", DAYS[d], h)));
                }
            }
        }
        Ok(TimeWindows { slots })
    }

    pub fn window_at(&self, weekday: usize, hour: u8) -> Option<Window> {
        Window::ALL.into_iter().find(|w| self.slots[w.index()][weekday][hour as usize])
    }

    pub fn window_of(&self, key: &HourKey) -> Option<Window> {
        self.window_at(key.weekday(), key.hour)
    }

    pub fn slot_count(&self, w: Window) -> usize {
        self.slots[w.index()].iter().flatten().filter(|b| **b).count()
    }
}

pub fn default_specs() -> (Vec<String>, Vec<String>, Vec<String>) {
    (
        vec!["mon-fri 08-17".into()],
        vec!["mon-fri 17-23".into(), "sat-sun 08-22".into()],
        vec!["mon-sun 23-08".into()],
    )
}

impl Default for TimeWindows {
    /// Work Mon-Fri 08-17; entertainment Mon-Fri 17-23 and Sat-Sun 08-22; home 23-08 every day.
    fn default() -> Self {
        let (w, e, h) = default_specs();
        TimeWindows::from_specs(&w, &e, &h).expect("default windows are valid")
    }
}
