//! Great-circle geometry on a spherical Earth and an exact spatial index.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean Earth radius (6371.0088 km) in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;
pub const METERS_PER_MILE: f64 = 1609.344;
/// Catchment radius for the facility-count feature.
pub const CATCHMENT_MILES: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    /// Latitude must lie in [-90, 90] and longitude in [-180, 180]; a
    /// longitude of -180 is stored as 180.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::InvalidCoordinate { lat, lon });
        }
        let lon = if lon == -180.0 { 180.0 } else { lon };
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Haversine great-circle distance in miles.
pub fn haversine_miles(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = (dphi * 0.5).sin();
    let s2 = (dlambda * 0.5).sin();
    let h = s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2;
    2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin()
}

/// A query hit: position of the point in the indexed set and its distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub miles: f64,
}

/// Exact nearest-neighbour and radius queries over geographic points.
///
/// Points are kept sorted by latitude. Since the great-circle distance
/// between two points is at least `R * |dlat|`, a query sweeps outward in
/// latitude from the query point and stops once that bound exceeds the
/// current answer; every candidate is confirmed with the haversine
/// distance, so results equal a brute-force scan. Ties in distance are
/// ordered by ascending id.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    ids: Vec<String>,
    points: Vec<GeoPoint>,
    by_lat: Vec<usize>,
}

// Absolute slack on the latitude bound, in miles, covering rounding in the
// haversine evaluation.
const BOUND_SLACK: f64 = 1e-7;

struct Candidate<'a> {
    miles: f64,
    id: &'a str,
    index: usize,
}

impl Candidate<'_> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.miles.total_cmp(&other.miles).then_with(|| self.id.cmp(other.id))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate<'_> {}
impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

impl SpatialIndex {
    pub fn build<I, S>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, GeoPoint)>,
        S: Into<String>,
    {
        let (ids, points): (Vec<String>, Vec<GeoPoint>) = points.into_iter().map(|(id, p)| (id.into(), p)).unzip();
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut by_lat: Vec<usize> = (0..points.len()).collect();
        by_lat.sort_by(|&a, &b| points[a].lat.total_cmp(&points[b].lat).then_with(|| ids[a].cmp(&ids[b])));
        Ok(Self { ids, points, by_lat })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn id(&self, index: usize) -> &str {
        &self.ids[index]
    }

    pub fn point(&self, index: usize) -> GeoPoint {
        self.points[index]
    }

    fn lat_bound(&self, p: GeoPoint, slot: usize) -> f64 {
        let lat = self.points[self.by_lat[slot]].lat;
        EARTH_RADIUS_MILES * (lat - p.lat).abs().to_radians()
    }

    /// The `k` closest points to `p`, ascending by (distance, id).
    pub fn k_nearest(&self, p: GeoPoint, k: usize) -> Vec<Neighbor> {
        let k = k.min(self.len());
        if k == 0 {
            return Vec::new();
        }
        let start = self.by_lat.partition_point(|&i| self.points[i].lat < p.lat);
        // `down` is one past the next slot below; `up` is the next slot above.
        let (mut down, mut up) = (start, start);
        let mut heap: BinaryHeap<Candidate<'_>> = BinaryHeap::with_capacity(k + 1);
        loop {
            let down_bound = (down > 0).then(|| self.lat_bound(p, down - 1));
            let up_bound = (up < self.by_lat.len()).then(|| self.lat_bound(p, up));
            let (slot, bound) = match (down_bound, up_bound) {
                (None, None) => break,
                (Some(d), None) => (down - 1, d),
                (None, Some(u)) => (up, u),
                (Some(d), Some(u)) => {
                    if d <= u {
                        (down - 1, d)
                    } else {
                        (up, u)
                    }
                }
            };
            if heap.len() == k {
                let worst = heap.peek().map(|c| c.miles).unwrap_or(f64::INFINITY);
                if bound > worst + BOUND_SLACK {
                    break;
                }
            }
            if slot < start {
                down -= 1;
            } else {
                up += 1;
            }
            let index = self.by_lat[slot];
            let cand = Candidate {
                miles: haversine_miles(p, self.points[index]),
                id: &self.ids[index],
                index,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(top) = heap.peek() {
                if cand < *top {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
        heap.into_sorted_vec()
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                miles: c.miles,
            })
            .collect()
    }

    /// All points with distance `<= r_miles` (inclusive), ascending by (distance, id).
    pub fn within_radius(&self, p: GeoPoint, r_miles: f64) -> Vec<Neighbor> {
        if r_miles < 0.0 || self.is_empty() {
            return Vec::new();
        }
        let dlat = ((r_miles + BOUND_SLACK) / EARTH_RADIUS_MILES).to_degrees();
        let lo = self.by_lat.partition_point(|&i| self.points[i].lat < p.lat - dlat);
        let hi = self.by_lat.partition_point(|&i| self.points[i].lat <= p.lat + dlat);
        let mut hits: Vec<Candidate<'_>> = self.by_lat[lo..hi]
            .iter()
            .filter_map(|&index| {
                let miles = haversine_miles(p, self.points[index]);
                (miles <= r_miles).then(|| Candidate {
                    miles,
                    id: &self.ids[index],
                    index,
                })
            })
            .collect();
        hits.sort();
        hits.into_iter()
            .map(|c| Neighbor {
                index: c.index,
                miles: c.miles,
            })
            .collect()
    }

    pub fn count_within_radius(&self, p: GeoPoint, r_miles: f64) -> usize {
        self.within_radius(p, r_miles).len()
    }
}

/// Nearest-facility distance and facility count within `radius_miles` for
/// every query point.
pub fn accessibility_features(
    units: &[GeoPoint],
    facilities: &SpatialIndex,
    radius_miles: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if facilities.is_empty() {
        return Err(Error::NoFacilities);
    }
    let pairs: Vec<(f64, f64)> = units
        .par_iter()
        .map(|&p| {
            let nearest = facilities.k_nearest(p, 1)[0].miles;
            let count = facilities.count_within_radius(p, radius_miles) as f64;
            (nearest, count)
        })
        .collect();
    Ok(pairs.into_iter().unzip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 180.01).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert_eq!(pt(0.0, -180.0).lon(), 180.0);
    }

    #[test]
    fn reference_distances() {
        let p = pt(35.1, -90.0);
        assert_eq!(haversine_miles(p, p), 0.0);
        let antipodal = PI * EARTH_RADIUS_MILES;
        assert!((haversine_miles(pt(0.0, 0.0), pt(0.0, 180.0)) - antipodal).abs() < 1e-6);
        let degree = 2.0 * PI * EARTH_RADIUS_MILES / 360.0;
        assert!((haversine_miles(pt(0.0, 0.0), pt(0.0, 1.0)) - degree).abs() < 1e-6);
        assert!((antipodal - 12436.815).abs() < 0.001);
        assert!((degree - 69.0934).abs() < 0.0001);
    }

    #[test]
    fn radius_in_km_is_consistent() {
        assert!((EARTH_RADIUS_MILES * METERS_PER_MILE - 6_371_008.8).abs() < 1.0);
    }

    #[test]
    fn antimeridian_is_short() {
        let d = haversine_miles(pt(0.0, 179.5), pt(0.0, -179.5));
        assert!((d - 2.0 * PI * EARTH_RADIUS_MILES / 360.0).abs() < 1e-6);
    }

    #[test]
    fn empty_and_single_point_index() {
        let empty = SpatialIndex::build(Vec::<(String, GeoPoint)>::new()).unwrap();
        assert!(empty.k_nearest(pt(1.0, 1.0), 3).is_empty());
        assert_eq!(empty.count_within_radius(pt(1.0, 1.0), 100.0), 0);

        let one = SpatialIndex::build([("a", pt(10.0, 10.0))]).unwrap();
        let hit = one.k_nearest(pt(-40.0, 100.0), 5);
        assert_eq!(hit.len(), 1);
        assert_eq!(one.id(hit[0].index), "a");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = SpatialIndex::build([("a", pt(0.0, 0.0)), ("a", pt(1.0, 1.0))]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(id) if id == "a"));
    }

    #[test]
    fn ties_break_by_id() {
        let idx = SpatialIndex::build([("c", pt(0.0, 1.0)), ("b", pt(0.0, -1.0)), ("a", pt(5.0, 0.0))]).unwrap();
        let hits = idx.k_nearest(pt(0.0, 0.0), 2);
        assert_eq!(hits[0].miles, hits[1].miles);
        assert_eq!(idx.id(hits[0].index), "b");
        assert_eq!(idx.id(hits[1].index), "c");
        let within = idx.within_radius(pt(0.0, 0.0), 100.0);
        assert_eq!(idx.id(within[0].index), "b");
    }

    #[test]
    fn query_at_indexed_point_comes_first() {
        let idx = SpatialIndex::build([("x", pt(35.0, -90.0)), ("y", pt(35.1, -90.0))]).unwrap();
        let hits = idx.k_nearest(pt(35.1, -90.0), 1);
        assert_eq!(idx.id(hits[0].index), "y");
        assert_eq!(hits[0].miles, 0.0);
    }

    #[test]
    fn radius_zero_is_inclusive() {
        let idx = SpatialIndex::build([("f", pt(35.0, -90.0))]).unwrap();
        assert_eq!(idx.count_within_radius(pt(35.0, -90.0), 0.0), 1);
        assert_eq!(idx.count_within_radius(pt(35.0, -90.001), 0.0), 0);
    }

    #[test]
    fn accessibility_requires_facilities() {
        let idx = SpatialIndex::build(Vec::<(String, GeoPoint)>::new()).unwrap();
        assert!(matches!(
            accessibility_features(&[pt(0.0, 0.0)], &idx, CATCHMENT_MILES),
            Err(Error::NoFacilities)
        ));
    }

    #[test]
    fn colocated_unit_has_zero_distance() {
        let idx = SpatialIndex::build([("f", pt(35.0, -90.0)), ("g", pt(35.05, -90.0))]).unwrap();
        let (near, count) = accessibility_features(&[pt(35.0, -90.0)], &idx, CATCHMENT_MILES).unwrap();
        assert_eq!(near[0], 0.0);
        assert_eq!(count[0], 2.0);
    }
}
