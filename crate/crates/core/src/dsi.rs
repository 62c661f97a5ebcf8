//! Demand, supply, and demand-supply ratio surfaces on a city grid.
//!
//! Each user spreads demand around their activity centre as a Gaussian bump
//! of width `radius_pattern`, truncated at that radius; each venue spreads
//! supply as an untruncated Gaussian whose width is the mean distance to its
//! visitors' centres. Cell values are kernel evaluations at the cell
//! centroid, and DSR is the per-cell demand/supply quotient, undefined where
//! supply is numerically zero. The kernels are one-dimensional normal
//! densities applied to the planar distance; see docs/model-notes.md.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::geo::{ProjectedPoint, Reference};
use crate::poptics::UserActivityProfile;
use crate::tlda::PatternDistributions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsiConfig {
    /// Grid cell edge length in meters.
    pub cell_size: f64,
    /// Lower bound for venue supply widths, in meters.
    pub sigma_floor: f64,
    /// Supply below this is treated as zero and the cell's DSR undefined.
    pub supply_epsilon: f64,
    /// Extra empty cells padded around the data bounding box.
    pub pad_cells: usize,
}

impl Default for DsiConfig {
    fn default() -> Self {
        DsiConfig {
            cell_size: 400.0,
            sigma_floor: 100.0,
            supply_epsilon: 1e-12,
            pad_cells: 1,
        }
    }
}

impl DsiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell_size.is_nan() || self.cell_size <= 0.0 {
            return Err(Error::config("cell_size must be positive"));
        }
        if self.sigma_floor.is_nan() || self.sigma_floor <= 0.0 {
            return Err(Error::config("sigma_floor must be positive"));
        }
        if self.supply_epsilon.is_nan() || self.supply_epsilon <= 0.0 {
            return Err(Error::config("supply_epsilon must be positive"));
        }
        Ok(())
    }
}

/// An axis-aligned grid in projected coordinates. Because the projection
/// maps latitude/longitude onto y/x linearly, the grid is aligned with the
/// geographic axes as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// South-west corner.
    pub origin: ProjectedPoint,
    pub cell_size: f64,
    pub n_cols: usize,
    pub n_rows: usize,
}

impl GridSpec {
    /// Smallest padded grid covering every given point.
    pub fn from_bounds<I>(points: I, cell_size: f64, pad_cells: usize) -> Result<GridSpec>
    where
        I: IntoIterator<Item = ProjectedPoint>,
    {
        let mut min_x = f64::INFINITY;
        let mut min_y = f64::INFINITY;
        let mut max_x = f64::NEG_INFINITY;
        let mut max_y = f64::NEG_INFINITY;
        let mut any = false;
        for p in points {
            any = true;
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
        if !any {
            return Err(Error::data("cannot size a grid around zero points"));
        }
        let pad = pad_cells as f64 * cell_size;
        let origin = ProjectedPoint::new(min_x - pad, min_y - pad);
        let n_cols = (((max_x - origin.x) / cell_size).floor() as usize + 1) + pad_cells;
        let n_rows = (((max_y - origin.y) / cell_size).floor() as usize + 1) + pad_cells;
        Ok(GridSpec {
            origin,
            cell_size,
            n_cols,
            n_rows,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cols * self.n_rows
    }

    pub fn centroid(&self, row: usize, col: usize) -> ProjectedPoint {
        ProjectedPoint::new(
            self.origin.x + (col as f64 + 0.5) * self.cell_size,
            self.origin.y + (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing the point, if inside the grid.
    pub fn cell_of(&self, p: ProjectedPoint) -> Option<(usize, usize)> {
        let col = (p.x - self.origin.x) / self.cell_size;
        let row = (p.y - self.origin.y) / self.cell_size;
        if col < 0.0 || row < 0.0 {
            return None;
        }
        let (row, col) = (row as usize, col as usize);
        if row < self.n_rows && col < self.n_cols {
            Some((row, col))
        } else {
            None
        }
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }
}

/// Gaussian bump height at planar distance `d` for width `s`.
fn kernel(d: f64, s: f64) -> f64 {
    (1.0 / (2.0 * PI * s * s).sqrt()) * (-d * d / (2.0 * s * s)).exp()
}

/// Demand surface of one pattern: the sum of user bumps, each truncated at
/// the user's pattern radius (the boundary itself is included). Input order
/// does not matter; contributions are accumulated in user-index order.
pub fn demand_layer(profiles: &[UserActivityProfile], spec: &GridSpec) -> Vec<f64> {
    let mut sorted: Vec<&UserActivityProfile> = profiles.iter().collect();
    sorted.sort_by_key(|p| p.user);
    let mut values = vec![0.0; spec.n_cells()];
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            let x = spec.centroid(row, col);
            let mut sum = 0.0;
            for p in &sorted {
                let d = x.distance(&p.centre);
                if d <= p.radius_pattern {
                    sum += kernel(d, p.radius_pattern);
                }
            }
            values[spec.index(row, col)] = sum;
        }
    }
    values
}

/// A venue's contribution to its pattern's supply surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VenueSupplyProfile {
    /// Venue index in the corpus vocabulary.
    pub venue: usize,
    pub location: ProjectedPoint,
    /// Pattern inherited from the venue's category.
    pub pattern: usize,
    /// Attenuation width: mean distance to visitor centres, floored.
    pub sigma: f64,
    pub visitors: usize,
    /// True when the venue had no located visitors and the floor was used.
    pub sigma_fallback: bool,
}

/// The pattern a venue category belongs to: the argmax of its phi column,
/// ties toward the lower pattern index.
pub fn category_pattern(dists: &PatternDistributions, category: usize) -> usize {
    let mut best = 0;
    for k in 1..dists.phi.len() {
        if dists.phi[k][category] > dists.phi[best][category] {
            best = k;
        }
    }
    best
}

/// Mean distance from the venue to its visitors' activity centres, floored.
pub fn venue_sigma(
    location: ProjectedPoint,
    visitor_centres: &[ProjectedPoint],
    floor: f64,
) -> (f64, bool) {
    if visitor_centres.is_empty() {
        return (floor, true);
    }
    let mean = visitor_centres
        .iter()
        .map(|c| location.distance(c))
        .sum::<f64>()
        / visitor_centres.len() as f64;
    (mean.max(floor), false)
}

/// Build one supply profile per venue appearing in the corpus.
///
/// A venue's location is its first observed coordinate, its pattern comes
/// from its category, and its width from the users who checked in there.
pub fn build_venue_profiles(
    corpus: &Corpus,
    dists: &PatternDistributions,
    user_profiles: &[UserActivityProfile],
    config: &DsiConfig,
) -> Vec<VenueSupplyProfile> {
    let n_venues = corpus.venues.len();
    let mut location: Vec<Option<ProjectedPoint>> = vec![None; n_venues];
    let mut category: Vec<usize> = vec![0; n_venues];
    let mut visitors: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); n_venues];
    for e in &corpus.events {
        let v = e.venue as usize;
        if location[v].is_none() {
            location[v] = Some(e.point());
            category[v] = e.category as usize;
        }
        visitors[v].insert(e.user);
    }
    (0..n_venues)
        .map(|v| {
            let loc = location[v].expect("every interned venue has an event");
            let centres: Vec<ProjectedPoint> = visitors[v]
                .iter()
                .map(|&u| user_profiles[u as usize].centre)
                .collect();
            let (sigma, fallback) = venue_sigma(loc, &centres, config.sigma_floor);
            VenueSupplyProfile {
                venue: v,
                location: loc,
                pattern: category_pattern(dists, category[v]),
                sigma,
                visitors: centres.len(),
                sigma_fallback: fallback,
            }
        })
        .collect()
}

/// Supply surface of one pattern: untruncated venue bumps, accumulated in
/// venue-index order regardless of input order.
pub fn supply_layer(venues: &[VenueSupplyProfile], spec: &GridSpec) -> Vec<f64> {
    let mut sorted: Vec<&VenueSupplyProfile> = venues.iter().collect();
    sorted.sort_by_key(|v| v.venue);
    let mut values = vec![0.0; spec.n_cells()];
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            let x = spec.centroid(row, col);
            let mut sum = 0.0;
            for v in &sorted {
                sum += kernel(x.distance(&v.location), v.sigma);
            }
            values[spec.index(row, col)] = sum;
        }
    }
    values
}

/// Per-cell demand/supply quotient; `None` where supply is numerically zero.
pub fn dsr_layer(demand: &[f64], supply: &[f64], supply_epsilon: f64) -> Vec<Option<f64>> {
    demand
        .iter()
        .zip(supply)
        .map(|(&d, &s)| {
            if s > supply_epsilon {
                Some(d / s)
            } else {
                None
            }
        })
        .collect()
}

/// All per-pattern layers on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsrGrid {
    pub spec: GridSpec,
    pub patterns: usize,
    /// Row-major cell values, one vector per pattern.
    pub demand: Vec<Vec<f64>>,
    pub supply: Vec<Vec<f64>>,
    pub dsr: Vec<Vec<Option<f64>>>,
}

impl DsrGrid {
    /// Number of patterns whose DSR layer has no defined cell at all.
    pub fn fully_undefined_patterns(&self) -> usize {
        self.dsr
            .iter()
            .filter(|layer| layer.iter().all(Option::is_none))
            .count()
    }
}

/// Size the grid from user centres and venue locations, then compute every
/// pattern's demand, supply, and DSR layers.
pub fn build_dsr_grid(
    patterns: usize,
    user_profiles: &[UserActivityProfile],
    venue_profiles: &[VenueSupplyProfile],
    config: &DsiConfig,
) -> Result<DsrGrid> {
    config.validate()?;
    let spec = GridSpec::from_bounds(
        user_profiles
            .iter()
            .map(|p| p.centre)
            .chain(venue_profiles.iter().map(|v| v.location)),
        config.cell_size,
        config.pad_cells,
    )?;
    for p in user_profiles {
        if spec.cell_of(p.centre).is_none() {
            return Err(Error::internal("grid does not cover a user centre"));
        }
    }
    for v in venue_profiles {
        if spec.cell_of(v.location).is_none() {
            return Err(Error::internal("grid does not cover a venue"));
        }
    }
    let mut demand = Vec::with_capacity(patterns);
    let mut supply = Vec::with_capacity(patterns);
    let mut dsr = Vec::with_capacity(patterns);
    for z in 0..patterns {
        let users: Vec<UserActivityProfile> = user_profiles
            .iter()
            .filter(|p| p.pattern == z)
            .copied()
            .collect();
        let venues: Vec<VenueSupplyProfile> = venue_profiles
            .iter()
            .filter(|v| v.pattern == z)
            .copied()
            .collect();
        let d = demand_layer(&users, &spec);
        let s = supply_layer(&venues, &spec);
        let r = dsr_layer(&d, &s, config.supply_epsilon);
        demand.push(d);
        supply.push(s);
        dsr.push(r);
    }
    Ok(DsrGrid {
        spec,
        patterns,
        demand,
        supply,
        dsr,
    })
}

fn min_max(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = values.clone().fold(f64::INFINITY, f64::min);
    let hi = values.fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

fn normalized(v: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// `row,col,value,value_norm` CSV of a dense layer; the norm column is
/// min-max scaled.
pub fn write_layer_csv<W: Write>(w: W, spec: &GridSpec, values: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row", "col", "value", "value_norm"])?;
    let (lo, hi) = min_max(values.iter().copied());
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            let v = values[spec.index(row, col)];
            out.write_record([
                row.to_string(),
                col.to_string(),
                v.to_string(),
                normalized(v, lo, hi).to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// DSR layer CSV; undefined cells are omitted.
pub fn write_dsr_csv<W: Write>(w: W, spec: &GridSpec, dsr: &[Option<f64>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["row", "col", "value", "value_norm"])?;
    let (lo, hi) = min_max(dsr.iter().flatten().copied());
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            if let Some(v) = dsr[spec.index(row, col)] {
                out.write_record([
                    row.to_string(),
                    col.to_string(),
                    v.to_string(),
                    normalized(v, lo, hi).to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Cells ranked by DSR descending: `rank,row,col,dsr`. Undefined cells are
/// omitted; ties order by (row, col).
pub fn write_priority_csv<W: Write>(w: W, spec: &GridSpec, dsr: &[Option<f64>]) -> Result<()> {
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            if let Some(v) = dsr[spec.index(row, col)] {
                cells.push((row, col, v));
            }
        }
    }
    cells.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "row", "col", "dsr"])?;
    for (rank, (row, col, v)) in cells.iter().enumerate() {
        out.write_record([
            (rank + 1).to_string(),
            row.to_string(),
            col.to_string(),
            v.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// GeoJSON FeatureCollection of cell polygons for one pattern, with demand,
/// supply, and (where defined) DSR properties. Coordinates are
/// longitude/latitude via the inverse projection.
pub fn write_grid_geojson<W: Write>(
    w: W,
    spec: &GridSpec,
    reference: &Reference,
    pattern: usize,
    demand: &[f64],
    supply: &[f64],
    dsr: &[Option<f64>],
) -> Result<()> {
    let mut features = Vec::with_capacity(spec.n_cells());
    for row in 0..spec.n_rows {
        for col in 0..spec.n_cols {
            let i = spec.index(row, col);
            let s = spec.cell_size;
            let x0 = spec.origin.x + col as f64 * s;
            let y0 = spec.origin.y + row as f64 * s;
            let ring: Vec<[f64; 2]> = [
                (x0, y0),
                (x0 + s, y0),
                (x0 + s, y0 + s),
                (x0, y0 + s),
                (x0, y0),
            ]
            .iter()
            .map(|&(x, y)| {
                let (lat, lon) = reference.unproject(ProjectedPoint::new(x, y));
                [lon, lat]
            })
            .collect();
            let mut properties = serde_json::json!({
                "pattern": pattern,
                "row": row,
                "col": col,
                "demand": demand[i],
                "supply": supply[i],
            });
            if let Some(v) = dsr[i] {
                properties["dsr"] = serde_json::json!(v);
            }
            features.push(serde_json::json!({
                "type": "Feature",
                "geometry": { "type": "Polygon", "coordinates": [ring] },
                "properties": properties,
            }));
        }
    }
    let collection = serde_json::json!({
        "type": "FeatureCollection",
        "features": features,
    });
    serde_json::to_writer(w, &collection)?;
    Ok(())
}

/// `venue,pattern,x,y,sigma,visitors` CSV of the supply profiles.
pub fn write_venue_profiles_csv<W: Write>(
    w: W,
    corpus: &Corpus,
    venues: &[VenueSupplyProfile],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["venue", "pattern", "x", "y", "sigma", "visitors"])?;
    for v in venues {
        out.write_record([
            corpus.venues[v.venue].clone(),
            v.pattern.to_string(),
            v.location.x.to_string(),
            v.location.y.to_string(),
            v.sigma.to_string(),
            v.visitors.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
