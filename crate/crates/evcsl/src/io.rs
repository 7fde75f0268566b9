//! Instance and solution files, synthetic city generation, and CSV import
//! of pre-extracted city data. The JSON and CSV layouts are documented in
//! `docs/formats.md` at the repository root.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    point_distance, Coords, DistanceCap, Instance, Matrix, Metric, Solution, ValidationError,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot access {path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {detail}")]
    Schema { path: String, detail: String },
    #[error("{path}: {source}")]
    Validation {
        path: String,
        source: ValidationError,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} line {line}: {detail}")]
    CsvRow {
        path: String,
        line: u64,
        detail: String,
    },
    #[error("invalid generator spec: {0}")]
    Spec(String),
}

impl IoError {
    fn schema(path: &Path, detail: impl Into<String>) -> Self {
        IoError::Schema {
            path: path.display().to_string(),
            detail: detail.into(),
        }
    }
}

/// `"unbounded"` or a number of meters.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CapRepr {
    Meters(f64),
    Word(String),
}

impl CapRepr {
    fn to_cap(&self, path: &Path, field: &str) -> Result<DistanceCap, IoError> {
        match self {
            CapRepr::Meters(v) => Ok(DistanceCap::Meters(*v)),
            CapRepr::Word(w) if w == "unbounded" => Ok(DistanceCap::Unbounded),
            CapRepr::Word(w) => Err(IoError::schema(
                path,
                format!("field `{field}`: expected a number or \"unbounded\", got \"{w}\""),
            )),
        }
    }

    fn from_cap(cap: DistanceCap) -> CapRepr {
        match cap {
            DistanceCap::Meters(v) => CapRepr::Meters(v),
            DistanceCap::Unbounded => CapRepr::Word("unbounded".to_string()),
        }
    }
}

/// On-disk instance layout. Exactly one of the matrix form (`dc`/`de`) and
/// the coordinate form (`distance` + point lists) must be present.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    format_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    n_clients: usize,
    n_candidates: usize,
    n_substations: usize,
    n_stations: usize,
    max_client_dist: CapRepr,
    max_substation_dist: CapRepr,
    users: Vec<f64>,
    mp: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dc: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    de: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clients: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    substations: Option<Vec<[f64; 2]>>,
}

/// Loads and validates an instance. Coordinate-form files get their
/// distance matrices computed here, and the coordinates are retained on
/// the instance for geometry-aware neighborhoods.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    let parsed: InstanceFile =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
    instance_from_file(parsed, path)
}

fn instance_from_file(parsed: InstanceFile, path: &Path) -> Result<Instance, IoError> {
    if parsed.format_version != FORMAT_VERSION {
        return Err(IoError::schema(
            path,
            format!(
                "field `format_version`: expected {FORMAT_VERSION}, got {}",
                parsed.format_version
            ),
        ));
    }
    if parsed.users.len() != parsed.n_clients {
        return Err(IoError::schema(
            path,
            format!(
                "field `users`: {} entries but n_clients = {}",
                parsed.users.len(),
                parsed.n_clients
            ),
        ));
    }
    if parsed.mp.len() != parsed.n_substations {
        return Err(IoError::schema(
            path,
            format!(
                "field `mp`: {} entries but n_substations = {}",
                parsed.mp.len(),
                parsed.n_substations
            ),
        ));
    }

    let matrix_form = parsed.dc.is_some() || parsed.de.is_some();
    let coord_form = parsed.distance.is_some()
        || parsed.clients.is_some()
        || parsed.candidates.is_some()
        || parsed.substations.is_some();
    if matrix_form && coord_form {
        return Err(IoError::schema(
            path,
            "both matrix fields (dc/de) and coordinate fields present; use exactly one form",
        ));
    }

    let wrap_validation = |source: ValidationError| IoError::Validation {
        path: path.display().to_string(),
        source,
    };

    let (dc, de, coords) = if matrix_form {
        let dc_rows = parsed
            .dc
            .ok_or_else(|| IoError::schema(path, "matrix form requires field `dc`"))?;
        let de_rows = parsed
            .de
            .ok_or_else(|| IoError::schema(path, "matrix form requires field `de`"))?;
        if dc_rows.len() != parsed.n_clients {
            return Err(IoError::schema(
                path,
                format!("field `dc`: {} rows but n_clients = {}", dc_rows.len(), parsed.n_clients),
            ));
        }
        if de_rows.len() != parsed.n_substations {
            return Err(IoError::schema(
                path,
                format!(
                    "field `de`: {} rows but n_substations = {}",
                    de_rows.len(),
                    parsed.n_substations
                ),
            ));
        }
        let dc = Matrix::from_rows(dc_rows, parsed.n_candidates).map_err(wrap_validation)?;
        let de = Matrix::from_rows(de_rows, parsed.n_candidates).map_err(wrap_validation)?;
        (dc, de, None)
    } else if coord_form {
        let metric = parsed
            .distance
            .ok_or_else(|| IoError::schema(path, "coordinate form requires field `distance`"))?;
        let clients = parsed
            .clients
            .ok_or_else(|| IoError::schema(path, "coordinate form requires field `clients`"))?;
        let candidates = parsed
            .candidates
            .ok_or_else(|| IoError::schema(path, "coordinate form requires field `candidates`"))?;
        let substations = parsed
            .substations
            .ok_or_else(|| IoError::schema(path, "coordinate form requires field `substations`"))?;
        if clients.len() != parsed.n_clients {
            return Err(IoError::schema(
                path,
                format!(
                    "field `clients`: {} points but n_clients = {}",
                    clients.len(),
                    parsed.n_clients
                ),
            ));
        }
        if candidates.len() != parsed.n_candidates {
            return Err(IoError::schema(
                path,
                format!(
                    "field `candidates`: {} points but n_candidates = {}",
                    candidates.len(),
                    parsed.n_candidates
                ),
            ));
        }
        if substations.len() != parsed.n_substations {
            return Err(IoError::schema(
                path,
                format!(
                    "field `substations`: {} points but n_substations = {}",
                    substations.len(),
                    parsed.n_substations
                ),
            ));
        }
        let dc = matrix_from_points(metric, &clients, &candidates);
        let de = matrix_from_points(metric, &substations, &candidates);
        let coords = Coords {
            metric,
            clients,
            candidates,
            substations,
        };
        (dc, de, Some(coords))
    } else {
        return Err(IoError::schema(
            path,
            "instance needs either matrix fields (dc, de) or coordinate fields \
             (distance, clients, candidates, substations)",
        ));
    };

    Instance::new(
        parsed.name,
        parsed.users,
        dc,
        de,
        parsed.max_client_dist.to_cap(path, "max_client_dist")?,
        parsed.max_substation_dist.to_cap(path, "max_substation_dist")?,
        parsed.mp,
        parsed.n_stations,
        coords,
    )
    .map_err(wrap_validation)
}

/// Pairwise distances from each of `rows` to each of `cols`.
fn matrix_from_points(metric: Metric, rows: &[[f64; 2]], cols: &[[f64; 2]]) -> Matrix {
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        for &c in cols {
            data.push(point_distance(metric, r, c));
        }
    }
    Matrix::from_flat(rows.len(), cols.len(), data).expect("dimensions match by construction")
}

/// Saves an instance. Coordinate-backed instances are written in
/// coordinate form (compact and lossless, matrices are recomputed on
/// load); matrix-only instances are written with explicit matrices.
pub fn save_instance(instance: &Instance, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let file = match instance.coords() {
        Some(coords) => InstanceFile {
            format_version: FORMAT_VERSION,
            name: instance.name().map(str::to_string),
            n_clients: instance.n_clients(),
            n_candidates: instance.n_candidates(),
            n_substations: instance.n_substations(),
            n_stations: instance.n_stations(),
            max_client_dist: CapRepr::from_cap(instance.max_client_dist()),
            max_substation_dist: CapRepr::from_cap(instance.max_substation_dist()),
            users: instance.users().to_vec(),
            mp: instance.substation_capacity().to_vec(),
            dc: None,
            de: None,
            distance: Some(coords.metric),
            clients: Some(coords.clients.clone()),
            candidates: Some(coords.candidates.clone()),
            substations: Some(coords.substations.clone()),
        },
        None => InstanceFile {
            format_version: FORMAT_VERSION,
            name: instance.name().map(str::to_string),
            n_clients: instance.n_clients(),
            n_candidates: instance.n_candidates(),
            n_substations: instance.n_substations(),
            n_stations: instance.n_stations(),
            max_client_dist: CapRepr::from_cap(instance.max_client_dist()),
            max_substation_dist: CapRepr::from_cap(instance.max_substation_dist()),
            users: instance.users().to_vec(),
            mp: instance.substation_capacity().to_vec(),
            dc: Some(matrix_rows(instance.client_matrix())),
            de: Some(matrix_rows(instance.substation_matrix())),
            distance: None,
            clients: None,
            candidates: None,
            substations: None,
        },
    };

    let out = File::create(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = BufWriter::new(out);
    serde_json::to_writer(&mut writer, &file).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    writer.write_all(b"\n").map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Saves a solution as a JSON list of open candidate indices.
pub fn save_solution(solution: &Solution, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let out = File::create(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    let mut writer = BufWriter::new(out);
    serde_json::to_writer(&mut writer, solution.open()).map_err(|source| IoError::Json {
        path: path.display().to_string(),
        source,
    })?;
    writer.write_all(b"\n").map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

/// Loads a solution file and validates it against `instance`.
pub fn load_solution(path: impl AsRef<Path>, instance: &Instance) -> Result<Solution, IoError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    let open: Vec<usize> =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
            path: path.display().to_string(),
            source,
        })?;
    Solution::new(open, instance).map_err(|source| IoError::Validation {
        path: path.display().to_string(),
        source,
    })
}

/// Spatial layout of a generated city.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Geometry {
    /// Points uniform over a square with the given side.
    UniformSquare { side_m: f64 },
    /// Population hotspots: hotspot centers uniform over the square,
    /// client and candidate points normal around a random hotspot.
    Clustered {
        side_m: f64,
        n_hotspots: usize,
        hotspot_stddev_m: f64,
    },
}

/// Parameters of the synthetic generator. Generated instances use planar
/// coordinates in meters (euclidean metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub name: Option<String>,
    pub n_clients: usize,
    pub n_candidates: usize,
    pub n_substations: usize,
    pub n_stations: usize,
    pub geometry: Geometry,
    /// Uniform range for client weights, inclusive of the lower bound.
    pub users_range: (f64, f64),
    /// Uniform inclusive range for substation capacities. Capacities are
    /// topped up round-robin when their sum falls below `n_stations`.
    pub capacity_range: (u32, u32),
    pub max_client_dist: DistanceCap,
    pub max_substation_dist: DistanceCap,
    pub seed: u64,
}

/// A generator spec with the dimensions of the real full-city scenario:
/// 363 client neighborhoods, 33,550 candidate road segments and 14
/// substations.
pub fn malaga_like(n_stations: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        name: Some(format!("malaga-like-ms{n_stations}-seed{seed}")),
        n_clients: 363,
        n_candidates: 33_550,
        n_substations: 14,
        n_stations,
        geometry: Geometry::Clustered {
            side_m: 12_000.0,
            n_hotspots: 12,
            hotspot_stddev_m: 900.0,
        },
        users_range: (200.0, 3_500.0),
        capacity_range: (4, 8),
        max_client_dist: DistanceCap::Unbounded,
        max_substation_dist: DistanceCap::Unbounded,
        seed,
    }
}

/// Generates an instance from the spec. Deterministic for a fixed seed;
/// the output always satisfies every instance invariant by construction.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Instance, IoError> {
    if spec.n_clients == 0 || spec.n_candidates == 0 || spec.n_substations == 0 {
        return Err(IoError::Spec("all entity counts must be positive".into()));
    }
    if spec.n_stations == 0 || spec.n_stations > spec.n_candidates {
        return Err(IoError::Spec(format!(
            "n_stations must satisfy 1 <= Ms <= {}, got {}",
            spec.n_candidates, spec.n_stations
        )));
    }
    if !(spec.users_range.0 > 0.0) || spec.users_range.1 < spec.users_range.0 {
        return Err(IoError::Spec("users_range must be positive and ordered".into()));
    }
    if spec.capacity_range.1 < spec.capacity_range.0 {
        return Err(IoError::Spec("capacity_range must be ordered".into()));
    }
    let side = match spec.geometry {
        Geometry::UniformSquare { side_m } => side_m,
        Geometry::Clustered { side_m, n_hotspots, hotspot_stddev_m } => {
            if n_hotspots == 0 {
                return Err(IoError::Spec("n_hotspots must be positive".into()));
            }
            if !(hotspot_stddev_m >= 0.0) {
                return Err(IoError::Spec("hotspot_stddev_m must be non-negative".into()));
            }
            side_m
        }
    };
    if !(side > 0.0) || !side.is_finite() {
        return Err(IoError::Spec("geometry side must be positive and finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let hotspots: Vec<[f64; 2]> = match spec.geometry {
        Geometry::UniformSquare { .. } => Vec::new(),
        Geometry::Clustered { n_hotspots, .. } => (0..n_hotspots)
            .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
            .collect(),
    };

    let place = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        match spec.geometry {
            Geometry::UniformSquare { .. } => {
                [rng.random_range(0.0..side), rng.random_range(0.0..side)]
            }
            Geometry::Clustered { hotspot_stddev_m, .. } => {
                let center = hotspots[rng.random_range(0..hotspots.len())];
                let normal = Normal::new(0.0, hotspot_stddev_m).expect("stddev validated");
                [center[0] + normal.sample(rng), center[1] + normal.sample(rng)]
            }
        }
    };

    let clients: Vec<[f64; 2]> = (0..spec.n_clients).map(|_| place(&mut rng)).collect();
    let candidates: Vec<[f64; 2]> = (0..spec.n_candidates).map(|_| place(&mut rng)).collect();
    // Substations spread uniformly regardless of population clustering.
    let substations: Vec<[f64; 2]> = (0..spec.n_substations)
        .map(|_| [rng.random_range(0.0..side), rng.random_range(0.0..side)])
        .collect();

    let users: Vec<f64> = (0..spec.n_clients)
        .map(|_| rng.random_range(spec.users_range.0..=spec.users_range.1))
        .collect();
    let mut mp: Vec<u32> = (0..spec.n_substations)
        .map(|_| rng.random_range(spec.capacity_range.0..=spec.capacity_range.1))
        .collect();
    let mut i = 0;
    while mp.iter().map(|&x| x as u64).sum::<u64>() < spec.n_stations as u64 {
        let idx = i % mp.len();
        mp[idx] += 1;
        i += 1;
    }

    let dc = matrix_from_points(Metric::Euclidean, &clients, &candidates);
    let de = matrix_from_points(Metric::Euclidean, &substations, &candidates);
    let coords = Coords {
        metric: Metric::Euclidean,
        clients,
        candidates,
        substations,
    };

    Instance::new(
        spec.name.clone(),
        users,
        dc,
        de,
        spec.max_client_dist,
        spec.max_substation_dist,
        mp,
        spec.n_stations,
        Some(coords),
    )
    .map_err(|e| IoError::Spec(e.to_string()))
}

/// Import parameters accompanying the three city CSV files.
#[derive(Debug, Clone)]
pub struct ImportParams {
    pub name: Option<String>,
    pub n_stations: usize,
    pub max_client_dist: DistanceCap,
    pub max_substation_dist: DistanceCap,
}

/// Builds an instance from pre-extracted city CSVs (lon/lat in degrees):
/// clients `id,lon,lat,population`, candidates `id,lon,lat`, substations
/// `id,lon,lat,capacity`. Headers are fixed and case-sensitive. Rows with
/// missing or non-finite fields are rejected with their line number.
pub fn import_city(
    clients_csv: impl AsRef<Path>,
    candidates_csv: impl AsRef<Path>,
    substations_csv: impl AsRef<Path>,
    params: &ImportParams,
) -> Result<Instance, IoError> {
    let clients = read_csv(clients_csv.as_ref(), &["id", "lon", "lat", "population"])?;
    let candidates = read_csv(candidates_csv.as_ref(), &["id", "lon", "lat"])?;
    let substations = read_csv(substations_csv.as_ref(), &["id", "lon", "lat", "capacity"])?;

    let clients_path = clients_csv.as_ref();
    let mut users = Vec::with_capacity(clients.len());
    let mut client_pts = Vec::with_capacity(clients.len());
    for row in &clients {
        let population = row.number(clients_path, 3)?;
        if !(population > 0.0) {
            return Err(IoError::CsvRow {
                path: clients_path.display().to_string(),
                line: row.line,
                detail: format!("population {} must be positive", population),
            });
        }
        users.push(population);
        client_pts.push(row.point(clients_path)?);
    }

    let candidates_path = candidates_csv.as_ref();
    let candidate_pts = candidates
        .iter()
        .map(|row| row.point(candidates_path))
        .collect::<Result<Vec<_>, _>>()?;

    let substations_path = substations_csv.as_ref();
    let mut mp = Vec::with_capacity(substations.len());
    let mut substation_pts = Vec::with_capacity(substations.len());
    for row in &substations {
        let capacity = row.number(substations_path, 3)?;
        if capacity < 0.0 || capacity.fract() != 0.0 || capacity > u32::MAX as f64 {
            return Err(IoError::CsvRow {
                path: substations_path.display().to_string(),
                line: row.line,
                detail: format!("capacity {} must be a non-negative integer", capacity),
            });
        }
        mp.push(capacity as u32);
        substation_pts.push(row.point(substations_path)?);
    }

    let dc = matrix_from_points(Metric::Haversine, &client_pts, &candidate_pts);
    let de = matrix_from_points(Metric::Haversine, &substation_pts, &candidate_pts);
    let coords = Coords {
        metric: Metric::Haversine,
        clients: client_pts,
        candidates: candidate_pts,
        substations: substation_pts,
    };

    Instance::new(
        params.name.clone(),
        users,
        dc,
        de,
        params.max_client_dist,
        params.max_substation_dist,
        mp,
        params.n_stations,
        Some(coords),
    )
    .map_err(|source| IoError::Validation {
        path: clients_path.display().to_string(),
        source,
    })
}

struct CsvRow {
    line: u64,
    fields: Vec<String>,
}

impl CsvRow {
    fn number(&self, path: &Path, idx: usize) -> Result<f64, IoError> {
        let raw = &self.fields[idx];
        let value: f64 = raw.trim().parse().map_err(|_| IoError::CsvRow {
            path: path.display().to_string(),
            line: self.line,
            detail: format!("cannot parse `{raw}` as a number"),
        })?;
        if !value.is_finite() {
            return Err(IoError::CsvRow {
                path: path.display().to_string(),
                line: self.line,
                detail: format!("non-finite value {value}"),
            });
        }
        Ok(value)
    }

    /// Columns 1 and 2 are lon and lat in every file.
    fn point(&self, path: &Path) -> Result<[f64; 2], IoError> {
        Ok([self.number(path, 1)?, self.number(path, 2)?])
    }
}

fn read_csv(path: &Path, expected_header: &[&str]) -> Result<Vec<CsvRow>, IoError> {
    let file = File::open(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let header = reader.headers().map_err(|source| IoError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected_header {
        return Err(IoError::schema(
            path,
            format!("expected header {expected_header:?}, got {got:?}"),
        ));
    }

    let mut rows = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|source| IoError::Csv {
            path: path.display().to_string(),
            source,
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected_header.len() {
            return Err(IoError::CsvRow {
                path: path.display().to_string(),
                line,
                detail: format!("expected {} fields, got {}", expected_header.len(), record.len()),
            });
        }
        let fields: Vec<String> = record.iter().map(str::to_string).collect();
        for (i, f) in fields.iter().enumerate() {
            if f.trim().is_empty() {
                return Err(IoError::CsvRow {
                    path: path.display().to_string(),
                    line,
                    detail: format!("empty field `{}`", expected_header[i]),
                });
            }
        }
        let id = fields[0].clone();
        if !seen_ids.insert(id.clone()) {
            return Err(IoError::CsvRow {
                path: path.display().to_string(),
                line,
                detail: format!("duplicate id `{id}`"),
            });
        }
        rows.push(CsvRow { line, fields });
    }
    if rows.is_empty() {
        return Err(IoError::schema(path, "file contains no data rows"));
    }
    Ok(rows)
}
