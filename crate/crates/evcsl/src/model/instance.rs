//! Immutable problem data: clients, candidate locations, substations and
//! the distance matrices between them.

use thiserror::Error;

/// Mean Earth radius in meters, used for haversine distances.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Validation failure when constructing or loading an [`Instance`] or a
/// [`Solution`](crate::model::Solution). Names the offending field.
#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("field `{field}`: {detail}")]
    Field { field: &'static str, detail: String },
}

impl ValidationError {
    pub fn new(field: &'static str, detail: impl Into<String>) -> Self {
        ValidationError::Field {
            field,
            detail: detail.into(),
        }
    }
}

/// Dense row-major matrix of distances in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from a flat row-major buffer.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ValidationError> {
        if data.len() != rows * cols {
            return Err(ValidationError::new(
                "matrix",
                format!("expected {}x{} = {} entries, got {}", rows, cols, rows * cols, data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows, checking that every row has `cols` entries.
    pub fn from_rows(rows_data: Vec<Vec<f64>>, cols: usize) -> Result<Self, ValidationError> {
        let rows = rows_data.len();
        let mut data = Vec::with_capacity(rows * cols);
        for (i, row) in rows_data.into_iter().enumerate() {
            if row.len() != cols {
                return Err(ValidationError::new(
                    "matrix",
                    format!("row {} has {} entries, expected {}", i, row.len(), cols),
                ));
            }
            data.extend(row);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Column `c` collected into a fresh vector.
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// A maximum-distance constraint in meters, or no constraint at all.
///
/// The unbounded case is explicit because real instance files must state
/// whether a cap applies; there is no implicit "very large" default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceCap {
    Unbounded,
    Meters(f64),
}

impl DistanceCap {
    /// True when distance `d` satisfies the cap.
    #[inline]
    pub fn allows(&self, d: f64) -> bool {
        match *self {
            DistanceCap::Unbounded => true,
            DistanceCap::Meters(limit) => d <= limit,
        }
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, DistanceCap::Unbounded)
    }
}

// Serialized as a number of meters or the string "unbounded".
impl serde::Serialize for DistanceCap {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            DistanceCap::Unbounded => serializer.serialize_str("unbounded"),
            DistanceCap::Meters(v) => serializer.serialize_f64(*v),
        }
    }
}

impl<'de> serde::Deserialize<'de> for DistanceCap {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct CapVisitor;
        impl serde::de::Visitor<'_> for CapVisitor {
            type Value = DistanceCap;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                write!(f, "a number of meters or the string \"unbounded\"")
            }

            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<DistanceCap, E> {
                Ok(DistanceCap::Meters(v))
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<DistanceCap, E> {
                Ok(DistanceCap::Meters(v as f64))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<DistanceCap, E> {
                Ok(DistanceCap::Meters(v as f64))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<DistanceCap, E> {
                if v == "unbounded" {
                    Ok(DistanceCap::Unbounded)
                } else {
                    Err(E::invalid_value(serde::de::Unexpected::Str(v), &self))
                }
            }
        }
        deserializer.deserialize_any(CapVisitor)
    }
}

/// Coordinate metric for instances built from point locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Great-circle distance on lon/lat degrees.
    Haversine,
    /// Straight-line distance on planar x/y meters.
    Euclidean,
}

/// Point coordinates retained from coordinate-form instances. `[lon, lat]`
/// degrees for haversine, `[x, y]` meters for euclidean.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords {
    pub metric: Metric,
    pub clients: Vec<[f64; 2]>,
    pub candidates: Vec<[f64; 2]>,
    pub substations: Vec<[f64; 2]>,
}

/// Great-circle distance in meters between two `[lon, lat]` points in degrees.
pub fn haversine_m(a: [f64; 2], b: [f64; 2]) -> f64 {
    let lat1 = a[1].to_radians();
    let lat2 = b[1].to_radians();
    let dlat = lat2 - lat1;
    let dlon = (b[0] - a[0]).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Straight-line distance in meters between two planar `[x, y]` points.
pub fn euclidean_m(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Distance between two points under `metric`.
pub fn point_distance(metric: Metric, a: [f64; 2], b: [f64; 2]) -> f64 {
    match metric {
        Metric::Haversine => haversine_m(a, b),
        Metric::Euclidean => euclidean_m(a, b),
    }
}

/// A key that sorts identically to [`point_distance`] but is cheaper to
/// compute; used when ranking many candidate pairs.
///
/// For haversine the key is the haversine parameter (monotone in the
/// central angle for any two points less than half the globe apart), for
/// euclidean the squared distance.
#[inline]
pub fn point_distance_key(metric: Metric, a: [f64; 2], b: [f64; 2]) -> f64 {
    match metric {
        Metric::Haversine => {
            let lat1 = a[1].to_radians();
            let lat2 = b[1].to_radians();
            let dlat = lat2 - lat1;
            let dlon = (b[0] - a[0]).to_radians();
            (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2)
        }
        Metric::Euclidean => {
            let dx = a[0] - b[0];
            let dy = a[1] - b[1];
            dx * dx + dy * dy
        }
    }
}

/// Immutable problem data for one EV charging station location instance.
///
/// Construction validates every invariant; afterwards the data never
/// changes, so an `Instance` can be shared freely across solver runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: Option<String>,
    n_clients: usize,
    n_candidates: usize,
    n_substations: usize,
    users: Vec<f64>,
    dc: Matrix,
    de: Matrix,
    max_client_dist: DistanceCap,
    max_substation_dist: DistanceCap,
    substation_capacity: Vec<u32>,
    n_stations: usize,
    total_users: f64,
    coords: Option<Coords>,
}

impl Instance {
    /// Validates and builds an instance from its raw parts.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: Option<String>,
        users: Vec<f64>,
        dc: Matrix,
        de: Matrix,
        max_client_dist: DistanceCap,
        max_substation_dist: DistanceCap,
        substation_capacity: Vec<u32>,
        n_stations: usize,
        coords: Option<Coords>,
    ) -> Result<Self, ValidationError> {
        let n_clients = dc.rows();
        let n_candidates = dc.cols();
        let n_substations = de.rows();

        if n_clients == 0 {
            return Err(ValidationError::new("dc", "instance has no clients"));
        }
        if n_candidates == 0 {
            return Err(ValidationError::new("dc", "instance has no candidate locations"));
        }
        if de.cols() != n_candidates {
            return Err(ValidationError::new(
                "de",
                format!("has {} columns but dc has {} candidates", de.cols(), n_candidates),
            ));
        }
        if users.len() != n_clients {
            return Err(ValidationError::new(
                "users",
                format!("has {} entries, expected {} (one per client)", users.len(), n_clients),
            ));
        }
        if substation_capacity.len() != n_substations {
            return Err(ValidationError::new(
                "mp",
                format!(
                    "has {} entries, expected {} (one per substation)",
                    substation_capacity.len(),
                    n_substations
                ),
            ));
        }
        if n_stations < 1 || n_stations > n_candidates {
            return Err(ValidationError::new(
                "n_stations",
                format!("must satisfy 1 <= Ms <= {} (candidates), got {}", n_candidates, n_stations),
            ));
        }
        for (c, &u) in users.iter().enumerate() {
            if !(u > 0.0) || !u.is_finite() {
                return Err(ValidationError::new(
                    "users",
                    format!("client {} has weight {}, must be positive and finite", c, u),
                ));
            }
        }
        check_distances("dc", &dc)?;
        check_distances("de", &de)?;
        check_cap("max_client_dist", max_client_dist)?;
        check_cap("max_substation_dist", max_substation_dist)?;
        let capacity_sum: u64 = substation_capacity.iter().map(|&m| m as u64).sum();
        if capacity_sum < n_stations as u64 {
            return Err(ValidationError::new(
                "mp",
                format!(
                    "total substation capacity {} cannot feed {} stations; instance is structurally infeasible",
                    capacity_sum, n_stations
                ),
            ));
        }
        if let Some(c) = &coords {
            if c.clients.len() != n_clients
                || c.candidates.len() != n_candidates
                || c.substations.len() != n_substations
            {
                return Err(ValidationError::new(
                    "coords",
                    "coordinate list lengths do not match instance dimensions",
                ));
            }
        }

        let total_users = users.iter().sum();
        Ok(Instance {
            name,
            n_clients,
            n_candidates,
            n_substations,
            users,
            dc,
            de,
            max_client_dist,
            max_substation_dist,
            substation_capacity,
            n_stations,
            total_users,
            coords,
        })
    }

    /// Same data with a different number of stations to place. Used to
    /// derive the Ms-sweep variants of one scenario.
    pub fn with_n_stations(&self, n_stations: usize) -> Result<Self, ValidationError> {
        let mut inst = self.clone();
        if n_stations < 1 || n_stations > inst.n_candidates {
            return Err(ValidationError::new(
                "n_stations",
                format!("must satisfy 1 <= Ms <= {}, got {}", inst.n_candidates, n_stations),
            ));
        }
        let capacity_sum: u64 = inst.substation_capacity.iter().map(|&m| m as u64).sum();
        if capacity_sum < n_stations as u64 {
            return Err(ValidationError::new(
                "mp",
                format!("total substation capacity {} cannot feed {} stations", capacity_sum, n_stations),
            ));
        }
        inst.n_stations = n_stations;
        Ok(inst)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n_clients(&self) -> usize {
        self.n_clients
    }

    pub fn n_candidates(&self) -> usize {
        self.n_candidates
    }

    pub fn n_substations(&self) -> usize {
        self.n_substations
    }

    /// Number of stations every solution must open (Ms).
    pub fn n_stations(&self) -> usize {
        self.n_stations
    }

    pub fn users(&self) -> &[f64] {
        &self.users
    }

    /// Sum of all client weights, the denominator of the average distance.
    pub fn total_users(&self) -> f64 {
        self.total_users
    }

    /// Distance in meters from client `c` to candidate `s`.
    #[inline]
    pub fn client_distance(&self, c: usize, s: usize) -> f64 {
        self.dc.get(c, s)
    }

    /// All candidate distances for client `c`.
    #[inline]
    pub fn client_distances(&self, c: usize) -> &[f64] {
        self.dc.row(c)
    }

    /// Distance in meters from substation `e` to candidate `s`.
    #[inline]
    pub fn substation_distance(&self, e: usize, s: usize) -> f64 {
        self.de.get(e, s)
    }

    pub fn client_matrix(&self) -> &Matrix {
        &self.dc
    }

    pub fn substation_matrix(&self) -> &Matrix {
        &self.de
    }

    pub fn max_client_dist(&self) -> DistanceCap {
        self.max_client_dist
    }

    pub fn max_substation_dist(&self) -> DistanceCap {
        self.max_substation_dist
    }

    /// Per-substation maximum number of fed stations (mp).
    pub fn substation_capacity(&self) -> &[u32] {
        &self.substation_capacity
    }

    pub fn coords(&self) -> Option<&Coords> {
        self.coords.as_ref()
    }
}

fn check_distances(field: &'static str, m: &Matrix) -> Result<(), ValidationError> {
    for r in 0..m.rows() {
        for (c, &d) in m.row(r).iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(ValidationError::new(
                    field,
                    format!("entry [{r}][{c}] = {d}, distances must be non-negative and finite"),
                ));
            }
        }
    }
    Ok(())
}

fn check_cap(field: &'static str, cap: DistanceCap) -> Result<(), ValidationError> {
    if let DistanceCap::Meters(v) = cap {
        if !v.is_finite() || v < 0.0 {
            return Err(ValidationError::new(
                field,
                format!("cap {v} must be non-negative and finite (or \"unbounded\")"),
            ));
        }
    }
    Ok(())
}
