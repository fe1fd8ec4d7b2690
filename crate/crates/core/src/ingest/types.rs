use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use super::IngestError;

/// Opaque taxi identifier.
///
/// Ordering is "natural": two purely numeric ids compare by value, so `"9" < "10"`.
/// Anything else falls back to byte-wise comparison, with numeric ids sorting first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TaxiId(Arc<str>);

impl TaxiId {
    pub fn new(id: &str) -> Self {
        TaxiId(Arc::from(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric(&self) -> Option<u128> {
        if self.0.is_empty() || !self.0.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        self.0.parse().ok()
    }
}

impl Ord for TaxiId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for TaxiId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for TaxiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaxiId({})", self.0)
    }
}

impl fmt::Display for TaxiId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TaxiId {
    fn from(s: &str) -> Self {
        TaxiId::new(s)
    }
}

impl From<u32> for TaxiId {
    fn from(n: u32) -> Self {
        TaxiId::new(&n.to_string())
    }
}

/// One timestamped position of one taxi. Timestamps are UTC seconds since the epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct GpsPoint {
    pub taxi: TaxiId,
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    /// Passenger-on-board flag, only carried by some datasets. Never used for trip extraction.
    pub occupied: Option<bool>,
}

impl GpsPoint {
    pub fn new(taxi: impl Into<TaxiId>, timestamp: i64, lat: f64, lon: f64) -> Self {
        GpsPoint {
            taxi: taxi.into(),
            timestamp,
            lat,
            lon,
            occupied: None,
        }
    }

    pub fn has_valid_coordinates(&self) -> bool {
        valid_lat_lon(self.lat, self.lon)
    }
}

pub(crate) fn valid_lat_lon(lat: f64, lon: f64) -> bool {
    (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)
}

/// Axis-aligned lat/lon box. All four edges are inclusive for containment.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CityBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl CityBounds {
    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self, IngestError> {
        let b = CityBounds {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let finite = [self.lat_min, self.lat_max, self.lon_min, self.lon_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lat_min >= self.lat_max || self.lon_min >= self.lon_max {
            return Err(IngestError::InvalidBounds(*self));
        }
        if !valid_lat_lon(self.lat_min, self.lon_min) || !valid_lat_lon(self.lat_max, self.lon_max) {
            return Err(IngestError::InvalidBounds(*self));
        }
        Ok(())
    }

    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.lat_min && lat <= self.lat_max && lon >= self.lon_min && lon <= self.lon_max
    }

    pub fn lat_mid(&self) -> f64 {
        (self.lat_min + self.lat_max) / 2.0
    }

    pub fn lon_mid(&self) -> f64 {
        (self.lon_min + self.lon_max) / 2.0
    }

    /// Area in square degrees.
    pub fn area(&self) -> f64 {
        (self.lat_max - self.lat_min) * (self.lon_max - self.lon_min)
    }

    /// City boxes used for the three reference datasets.
    pub fn rome() -> Self {
        CityBounds { lat_min: 41.79, lat_max: 41.98, lon_min: 12.36, lon_max: 12.61 }
    }

    pub fn san_francisco() -> Self {
        CityBounds { lat_min: 37.70, lat_max: 37.81, lon_min: -122.52, lon_max: -122.36 }
    }

    pub fn beijing() -> Self {
        CityBounds { lat_min: 39.41, lat_max: 41.08, lon_min: 115.37, lon_max: 117.5 }
    }
}

/// Uniform-grid histogram over a box. Row 0 is the southern-most row; cells are row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCounts {
    pub bounds: CityBounds,
    pub rows: usize,
    pub cols: usize,
    pub counts: Vec<u64>,
}

impl GridCounts {
    pub fn new(bounds: CityBounds, rows: usize, cols: usize, counts: Vec<u64>) -> Result<Self, IngestError> {
        bounds.validate()?;
        if rows == 0 || cols == 0 {
            return Err(IngestError::InvalidGrid(format!("grid shape {rows}x{cols} must be positive")));
        }
        if counts.len() != rows * cols {
            return Err(IngestError::InvalidGrid(format!(
                "expected {} cells for a {rows}x{cols} grid, got {}",
                rows * cols,
                counts.len()
            )));
        }
        Ok(GridCounts { bounds, rows, cols, counts })
    }

    pub fn zeros(bounds: CityBounds, rows: usize, cols: usize) -> Result<Self, IngestError> {
        Self::new(bounds, rows, cols, vec![0; rows * cols])
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}
