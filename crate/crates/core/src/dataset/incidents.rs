use std::path::Path;

use ndarray::Array2;
use rstar::primitives::{GeomWithData, Line};
use rstar::RTree;
use serde::{Deserialize, Serialize};

use super::{StreetGraph, YearMonth};
use crate::error::{Error, Result};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// A geolocated event with a calendar date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncidentRecord {
    pub lon: f64,
    pub lat: f64,
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

/// Inclusive month range defining the dynamic bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: YearMonth,
    pub end: YearMonth,
}

impl TimeRange {
    pub fn new(start: YearMonth, end: YearMonth) -> Result<Self> {
        if end < start {
            return Err(Error::Config(format!("empty time range {start}..{end}")));
        }
        Ok(Self { start, end })
    }

    pub fn bins(&self) -> usize {
        self.end.months_since(self.start) as usize + 1
    }

    pub fn axis(&self) -> Vec<YearMonth> {
        self.start.range(self.bins())
    }

    fn bin_of(&self, year: i32, month: u32) -> Option<usize> {
        let ym = YearMonth { year, month };
        (self.start <= ym && ym <= self.end).then(|| ym.months_since(self.start) as usize)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentReport {
    pub assigned: usize,
    /// Incidents dated outside the time range.
    pub out_of_range: usize,
    /// Incidents with non-finite coordinates or an impossible date.
    pub invalid: usize,
}

/// Equirectangular projection to metres around a reference point.
struct LocalPlane {
    lon0: f64,
    lat0: f64,
    cos_lat0: f64,
}

impl LocalPlane {
    fn around_centroid(graph: &StreetGraph) -> Self {
        let n = graph.len().max(1) as f64;
        let lon0 = graph.nodes().iter().map(|v| v.lon).sum::<f64>() / n;
        let lat0 = graph.nodes().iter().map(|v| v.lat).sum::<f64>() / n;
        Self {
            lon0,
            lat0,
            cos_lat0: lat0.to_radians().cos(),
        }
    }

    fn project(&self, lon: f64, lat: f64) -> [f64; 2] {
        [
            EARTH_RADIUS_M * (lon - self.lon0).to_radians() * self.cos_lat0,
            EARTH_RADIUS_M * (lat - self.lat0).to_radians(),
        ]
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist2(p, a);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist2(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

/// Bins incidents into an `n × T` count matrix: each in-range incident goes
/// to its nearest edge (point-to-segment distance in a local planar
/// projection) and then to the closer endpoint of that edge. Ties resolve to
/// the lowest node id.
pub fn assign_incidents(
    graph: &StreetGraph,
    incidents: &[IncidentRecord],
    range: TimeRange,
) -> Result<(Array2<f64>, AssignmentReport)> {
    if graph.edges().is_empty() {
        return Err(Error::Graph("incident assignment needs at least one edge".into()));
    }
    let plane = LocalPlane::around_centroid(graph);
    let points: Vec<[f64; 2]> = graph
        .nodes()
        .iter()
        .map(|v| plane.project(v.lon, v.lat))
        .collect();
    let ids = graph.node_ids();
    let segments: Vec<_> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(a, b))| GeomWithData::new(Line::new(points[a], points[b]), e))
        .collect();
    let tree = RTree::bulk_load(segments);

    let mut counts = Array2::zeros((graph.len(), range.bins()));
    let mut report = AssignmentReport::default();
    for inc in incidents {
        if !inc.lon.is_finite() || !inc.lat.is_finite() || !(1..=31).contains(&inc.day) {
            report.invalid += 1;
            continue;
        }
        let Some(bin) = range.bin_of(inc.year, inc.month) else {
            if (1..=12).contains(&inc.month) {
                report.out_of_range += 1;
            } else {
                report.invalid += 1;
            }
            continue;
        };
        let p = plane.project(inc.lon, inc.lat);

        // The tree yields candidates by its own distance; re-rank the
        // near-tied head with the local formula and the id tie-break.
        let mut best: Option<(f64, (u64, u64), usize)> = None;
        let mut cutoff = f64::INFINITY;
        for (seg, d2) in tree.nearest_neighbor_iter_with_distance_2(&p) {
            if d2 > cutoff {
                break;
            }
            if cutoff.is_infinite() {
                cutoff = d2 * (1.0 + 1e-9) + 1e-12;
            }
            let (a, b) = graph.edges()[seg.data];
            let d = segment_dist2(p, points[a], points[b]);
            let key = (ids[a].min(ids[b]), ids[a].max(ids[b]));
            let better = match best {
                None => true,
                Some((bd, bk, _)) => d < bd || (d == bd && key < bk),
            };
            if better {
                best = Some((d, key, seg.data));
            }
        }
        let (_, _, edge) = best.expect("tree is non-empty");
        let (a, b) = graph.edges()[edge];
        let (da, db) = (dist2(p, points[a]), dist2(p, points[b]));
        let node = if da < db || (da == db && ids[a] < ids[b]) { a } else { b };
        counts[[node, bin]] += 1.0;
        report.assigned += 1;
    }
    Ok((counts, report))
}

/// Reads `lon,lat,date` rows with ISO `YYYY-MM-DD` dates.
pub fn load_incidents(path: &Path) -> Result<Vec<IncidentRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let file = path.display().to_string();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let schema = |message: String| Error::Schema {
            file: file.clone(),
            row: line,
            column: None,
            message,
        };
        if record.len() != 3 {
            return Err(schema(format!("expected 3 fields, found {}", record.len())));
        }
        let lon = record[0].parse().map_err(|_| schema(format!("bad lon `{}`", &record[0])))?;
        let lat = record[1].parse().map_err(|_| schema(format!("bad lat `{}`", &record[1])))?;
        let parts: Vec<&str> = record[2].split('-').collect();
        let date = match parts.as_slice() {
            [y, m, d] => y.parse().ok().zip(m.parse().ok()).zip(d.parse().ok()),
            _ => None,
        };
        let ((year, month), day) = date.ok_or_else(|| schema(format!("bad date `{}`", &record[2])))?;
        out.push(IncidentRecord {
            lon,
            lat,
            year,
            month,
            day,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Node;
    use rand::{Rng, SeedableRng};

    fn range() -> TimeRange {
        TimeRange::new(YearMonth::new(2010, 1).unwrap(), YearMonth::new(2010, 12).unwrap()).unwrap()
    }

    fn incident(lon: f64, lat: f64, month: u32) -> IncidentRecord {
        IncidentRecord {
            lon,
            lat,
            year: 2010,
            month,
            day: 15,
        }
    }

    /// Path 10 - 20 - 30 along the equator plus a spur 20 - 40.
    fn toy_graph() -> StreetGraph {
        let nodes = vec![
            Node { id: 10, lon: 0.0, lat: 0.0 },
            Node { id: 20, lon: 0.01, lat: 0.0 },
            Node { id: 30, lon: 0.02, lat: 0.0 },
            Node { id: 40, lon: 0.01, lat: 0.01 },
        ];
        StreetGraph::new(nodes, &[(10, 20), (20, 30), (20, 40)]).unwrap()
    }

    #[test]
    fn incident_on_node_goes_to_that_node() {
        let g = toy_graph();
        let (m, rep) = assign_incidents(&g, &[incident(0.02, 0.0, 3)], range()).unwrap();
        assert_eq!(m[[2, 2]], 1.0);
        assert_eq!(m.sum(), 1.0);
        assert_eq!(rep.assigned, 1);
    }

    #[test]
    fn equidistant_endpoints_pick_lower_id() {
        let nodes = vec![
            Node { id: 7, lon: 0.01, lat: 0.0 },
            Node { id: 3, lon: -0.01, lat: 0.0 },
        ];
        let g = StreetGraph::new(nodes, &[(7, 3)]).unwrap();
        // centroid is the origin, so the midpoint is exactly equidistant
        let (m, _) = assign_incidents(&g, &[incident(0.0, 0.001, 1)], range()).unwrap();
        assert_eq!(m[[1, 0]], 1.0);
    }

    #[test]
    fn out_of_range_incidents_are_skipped() {
        let g = toy_graph();
        let mut late = incident(0.0, 0.0, 1);
        late.year = 2011;
        let (m, rep) = assign_incidents(&g, &[late, incident(0.0, 0.0, 1)], range()).unwrap();
        assert_eq!(m.sum(), 1.0);
        assert_eq!((rep.assigned, rep.out_of_range), (1, 1));
    }

    #[test]
    fn requires_an_edge() {
        let g = StreetGraph::new(vec![Node { id: 1, lon: 0.0, lat: 0.0 }], &[]).unwrap();
        assert!(assign_incidents(&g, &[], range()).is_err());
    }

    /// Exhaustive oracle: scan every edge, keep the minimum distance with
    /// the id-pair tie-break, then compare endpoints.
    fn brute_force(g: &StreetGraph, inc: &IncidentRecord) -> usize {
        let plane = LocalPlane::around_centroid(g);
        let pts: Vec<[f64; 2]> = g.nodes().iter().map(|v| plane.project(v.lon, v.lat)).collect();
        let p = plane.project(inc.lon, inc.lat);
        let seg = |a: [f64; 2], b: [f64; 2]| {
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let t = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
            (p[0] - qx).powi(2) + (p[1] - qy).powi(2)
        };
        let ids = g.node_ids();
        let &(a, b) = g
            .edges()
            .iter()
            .min_by(|&&(a1, b1), &&(a2, b2)| {
                seg(pts[a1], pts[b1])
                    .partial_cmp(&seg(pts[a2], pts[b2]))
                    .unwrap()
                    .then((ids[a1].min(ids[b1]), ids[a1].max(ids[b1])).cmp(&(ids[a2].min(ids[b2]), ids[a2].max(ids[b2]))))
            })
            .unwrap();
        let d = |i: usize| (p[0] - pts[i][0]).powi(2) + (p[1] - pts[i][1]).powi(2);
        if d(a) < d(b) || (d(a) == d(b) && ids[a] < ids[b]) {
            a
        } else {
            b
        }
    }

    #[test]
    fn random_incidents_match_brute_force() {
        let g = toy_graph();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let incidents: Vec<_> = (0..10)
            .map(|_| {
                incident(
                    rng.random_range(-0.005..0.025),
                    rng.random_range(-0.005..0.015),
                    rng.random_range(1..=12),
                )
            })
            .collect();
        let (m, rep) = assign_incidents(&g, &incidents, range()).unwrap();
        let mut expected = Array2::<f64>::zeros((4, 12));
        for inc in &incidents {
            expected[[brute_force(&g, inc), inc.month as usize - 1]] += 1.0;
        }
        assert_eq!(m, expected);
        assert_eq!(rep.assigned, 10);
    }

    #[test]
    fn loads_incident_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("incidents.csv");
        std::fs::write(&path, "lon,lat,date\n-46.6,-23.5,2010-03-04\n").unwrap();
        let got = load_incidents(&path).unwrap();
        assert_eq!(got[0].month, 3);
        std::fs::write(&path, "lon,lat,date\n-46.6,-23.5,2010/03/04\n").unwrap();
        assert!(load_incidents(&path).is_err());
    }
}
