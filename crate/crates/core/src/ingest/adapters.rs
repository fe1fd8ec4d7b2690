//! Line parsers for the supported dataset layouts.
//!
//! - canonical: `taxi_id;unix_seconds;lat;lon[;occupied]`
//! - beijing (T-Drive): `taxi_id,YYYY-MM-DD HH:MM:SS,lon,lat`, naive local time
//! - sanfrancisco (cabspotting, one file per cab): `lat lon occupied unix_seconds`
//! - rome (CRAWDAD roma/taxi): `taxi_id;YYYY-MM-DD HH:MM:SS.ffffff+HH;POINT(lat lon)`

use chrono::{DateTime, NaiveDateTime};

use super::types::valid_lat_lon;
use super::{GpsPoint, ParseOptions, TaxiId, TraceFormat};

pub(super) const OUT_OF_RANGE: &str = "coordinates out of range";

pub(super) fn parse_line(line: &str, format: TraceFormat, opts: &ParseOptions) -> Result<GpsPoint, String> {
    let line = line.trim();
    if line.is_empty() {
        return Err("empty line".into());
    }
    let point = match format {
        TraceFormat::Canonical => canonical(line)?,
        TraceFormat::Beijing => beijing(line, opts.utc_offset_s)?,
        TraceFormat::SanFrancisco => san_francisco(line, opts)?,
        TraceFormat::Rome => rome(line)?,
    };
    if !point.lat.is_finite() || !point.lon.is_finite() || !valid_lat_lon(point.lat, point.lon) {
        return Err(format!("{OUT_OF_RANGE}: lat {} lon {}", point.lat, point.lon));
    }
    if point.timestamp < 0 {
        return Err(format!("negative timestamp {}", point.timestamp));
    }
    Ok(point)
}

fn field<T: std::str::FromStr>(raw: &str, name: &str) -> Result<T, String> {
    raw.trim().parse::<T>().map_err(|_| format!("bad {name} '{}'", raw.trim()))
}

fn taxi(raw: &str) -> Result<TaxiId, String> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err("empty taxi id".into());
    }
    Ok(TaxiId::new(raw))
}

fn canonical(line: &str) -> Result<GpsPoint, String> {
    let f: Vec<&str> = line.split(';').collect();
    if f.len() != 4 && f.len() != 5 {
        return Err(format!("expected 4 or 5 ';'-separated fields, got {}", f.len()));
    }
    let occupied = match f.get(4).map(|s| s.trim()) {
        None => None,
        Some("1") => Some(true),
        Some("0") => Some(false),
        Some(other) => return Err(format!("bad occupancy flag '{other}'")),
    };
    Ok(GpsPoint {
        taxi: taxi(f[0])?,
        timestamp: field(f[1], "timestamp")?,
        lat: field(f[2], "latitude")?,
        lon: field(f[3], "longitude")?,
        occupied,
    })
}

fn beijing(line: &str, utc_offset_s: i64) -> Result<GpsPoint, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 4 {
        return Err(format!("expected 4 ','-separated fields, got {}", f.len()));
    }
    let local = NaiveDateTime::parse_from_str(f[1].trim(), "%Y-%m-%d %H:%M:%S")
        .map_err(|e| format!("bad date-time '{}': {e}", f[1].trim()))?;
    Ok(GpsPoint {
        taxi: taxi(f[0])?,
        timestamp: local.and_utc().timestamp() - utc_offset_s,
        lon: field(f[2], "longitude")?,
        lat: field(f[3], "latitude")?,
        occupied: None,
    })
}

fn san_francisco(line: &str, opts: &ParseOptions) -> Result<GpsPoint, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 4 {
        return Err(format!("expected 4 whitespace-separated fields, got {}", f.len()));
    }
    let occupied = match f[2] {
        "1" => true,
        "0" => false,
        other => return Err(format!("bad occupancy flag '{other}'")),
    };
    Ok(GpsPoint {
        taxi: opts.taxi_id.clone().ok_or("no taxi id configured")?,
        lat: field(f[0], "latitude")?,
        lon: field(f[1], "longitude")?,
        occupied: Some(occupied),
        timestamp: field(f[3], "timestamp")?,
    })
}

fn rome(line: &str) -> Result<GpsPoint, String> {
    let f: Vec<&str> = line.split(';').collect();
    if f.len() != 3 {
        return Err(format!("expected 3 ';'-separated fields, got {}", f.len()));
    }
    let ts = DateTime::parse_from_str(f[1].trim(), "%Y-%m-%d %H:%M:%S%.f%#z")
        .map_err(|e| format!("bad timestamp '{}': {e}", f[1].trim()))?;
    let coords = f[2]
        .trim()
        .strip_prefix("POINT(")
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| format!("bad POINT field '{}'", f[2].trim()))?;
    let mut c = coords.split_whitespace();
    let (lat, lon) = match (c.next(), c.next(), c.next()) {
        (Some(a), Some(b), None) => (field(a, "latitude")?, field(b, "longitude")?),
        _ => return Err(format!("bad POINT field '{}'", f[2].trim())),
    };
    Ok(GpsPoint {
        taxi: taxi(f[0])?,
        timestamp: ts.timestamp(),
        lat,
        lon,
        occupied: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beijing_local_time_shifted_to_utc() {
        let p = parse_line("1131,2008-02-02 18:22:47,116.44933,39.92911", TraceFormat::Beijing, &ParseOptions {
            utc_offset_s: 8 * 3600,
            taxi_id: None,
        })
        .unwrap();
        assert_eq!(p.taxi.as_str(), "1131");
        // 2008-02-02 10:22:47 UTC
        assert_eq!(p.timestamp, 1201947767);
        assert_eq!((p.lat, p.lon), (39.92911, 116.44933));
    }

    #[test]
    fn sanfrancisco_line() {
        let opts = ParseOptions {
            utc_offset_s: 0,
            taxi_id: Some(TaxiId::new("abboip")),
        };
        let p = parse_line("37.75134 -122.39488 1 1213084687", TraceFormat::SanFrancisco, &opts).unwrap();
        assert_eq!(p.timestamp, 1213084687);
        assert_eq!(p.occupied, Some(true));
        assert_eq!(p.lon, -122.39488);
    }

    #[test]
    fn rome_line_with_offset_and_fraction() {
        let p = parse_line(
            "156;2014-02-01 00:00:00.739166+01;POINT(41.8836718276551 12.4877775603346)",
            TraceFormat::Rome,
            &ParseOptions::default(),
        )
        .unwrap();
        // 2014-01-31 23:00:00 UTC
        assert_eq!(p.timestamp, 1391209200);
        assert_eq!(p.lat, 41.8836718276551);
    }

    #[test]
    fn rome_bad_point() {
        assert!(parse_line("1;2014-02-01 00:00:00+01;POINT(41.8)", TraceFormat::Rome, &ParseOptions::default()).is_err());
    }
}
