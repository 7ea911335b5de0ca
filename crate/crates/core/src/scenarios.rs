//! Seeded problem generators: the three-node toy problem, isotonic-style
//! problems on random geometric graphs, sensor-network target localisation
//! LPs, and small random QPs for oracle sweeps.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::oracle::{consensus_lp, SmallLp};
use crate::problem::{EdgeConstraintBlock, LocalObjective, Node, NodeConstraintBlock, ProblemGraph, RowKind};

/// Placement attempts before a generator gives up.
pub const MAX_ATTEMPTS: usize = 100;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn scalar_node(a: f64) -> Node {
    Node::new(LocalObjective::squared_distance(&DVector::from_element(1, a)))
}

fn scalar_edge(i: usize, j: usize, a_ij: f64, a_ji: f64, b: f64, kind: RowKind) -> EdgeConstraintBlock {
    EdgeConstraintBlock {
        i,
        j,
        a_ij: DMatrix::from_element(1, 1, a_ij),
        a_ji: DMatrix::from_element(1, 1, a_ji),
        b: DVector::from_element(1, b),
        kinds: vec![kind],
    }
}

fn scalar_bound(i: usize, a: f64, b: f64, kind: RowKind) -> NodeConstraintBlock {
    NodeConstraintBlock {
        i,
        a: DMatrix::from_element(1, 1, a),
        b: DVector::from_element(1, b),
        kinds: vec![kind],
    }
}

/// Three scalar nodes on a triangle with costs `½(x_i − a_i)²` and
///
/// ```text
///   x_1 >= 0,  x_2 = 1             (node constraints)
///   x_1 = x_2, x_2 >= x_3, x_1 + x_3 <= 2   (edge constraints)
/// ```
///
/// Nodes are numbered from zero, so `x_1` is node 0.
pub fn toy_problem(a: [f64; 3]) -> ProblemGraph {
    use RowKind::{Equality as Eq, Inequality as Ineq};
    ProblemGraph::new(
        a.iter().map(|&v| scalar_node(v)).collect(),
        vec![
            scalar_edge(0, 1, 1.0, -1.0, 0.0, Eq),
            scalar_edge(1, 2, -1.0, 1.0, 0.0, Ineq),
            scalar_edge(0, 2, 1.0, 1.0, 2.0, Ineq),
        ],
        vec![scalar_bound(0, -1.0, 0.0, Ineq), scalar_bound(1, 1.0, 1.0, Eq)],
    )
    .expect("toy problem is valid")
}

/// Observations `a_i ~ N(0, 1)` drawn from `seed`.
pub fn toy_observations(seed: u64) -> [f64; 3] {
    let mut r = rng(seed);
    std::array::from_fn(|_| StandardNormal.sample(&mut r))
}

pub fn gen_toy(seed: u64) -> ProblemGraph {
    toy_problem(toy_observations(seed))
}

/// `√(2 ln n / n)`.
pub fn connectivity_radius(n: usize) -> f64 {
    let n = n as f64;
    (2.0 * n.ln() / n).sqrt()
}

/// Pairs `(i, j)`, `i < j`, whose points lie within `radius`.
pub fn geometric_edges(points: &[[f64; 2]], radius: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            if (dx * dx + dy * dy).sqrt() <= radius {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[derive(Clone, Debug)]
pub struct GeometricScenario {
    pub points: Vec<[f64; 2]>,
    pub radius: f64,
    pub observations: Vec<f64>,
    pub problem: ProblemGraph,
}

/// Scalar nodes at `points` with costs `½(x_i − a_i)²` and one row
/// `x_i − x_j <= 0` for every pair `i < j` within `radius`.
pub fn geometric_problem(points: &[[f64; 2]], observations: &[f64], radius: f64) -> Result<ProblemGraph> {
    let edges = geometric_edges(points, radius)
        .into_iter()
        .map(|(i, j)| scalar_edge(i, j, 1.0, -1.0, 0.0, RowKind::Inequality))
        .collect();
    ProblemGraph::new(observations.iter().map(|&a| scalar_node(a)).collect(), edges, vec![])
}

/// Uniform points in the unit square, resampled until the graph at the
/// connectivity radius is connected.
pub fn gen_geometric(n: usize, seed: u64) -> Result<GeometricScenario> {
    if n < 2 {
        return Err(Error::Generation(format!("need at least 2 nodes, got {n}")));
    }
    let mut r = rng(seed);
    let observations: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    let radius = connectivity_radius(n);
    for _ in 0..MAX_ATTEMPTS {
        let points: Vec<[f64; 2]> = (0..n).map(|_| [r.random(), r.random()]).collect();
        if !is_connected(n, &geometric_edges(&points, radius)) {
            continue;
        }
        let problem = geometric_problem(&points, &observations, radius)?;
        return Ok(GeometricScenario {
            points,
            radius,
            observations,
            problem,
        });
    }
    Err(Error::Generation(format!(
        "no connected placement of {n} nodes after {MAX_ATTEMPTS} attempts"
    )))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalisationParams {
    /// Standard deviation of the bearing noise, radians.
    pub bearing_noise: f64,
    /// Half opening angle of each sensing cone, radians.
    pub half_angle: f64,
}

impl Default for LocalisationParams {
    fn default() -> Self {
        LocalisationParams {
            bearing_noise: 0.05,
            half_angle: 0.15,
        }
    }
}

/// Half-plane `normalᵀ x <= offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl HalfPlane {
    pub fn slack(&self, p: [f64; 2]) -> f64 {
        self.offset - self.normal[0] * p[0] - self.normal[1] * p[1]
    }
}

/// Two half-planes bounding the cone with apex `sensor`, axis `bearing` and
/// half opening `half_angle`.
pub fn sensing_cone(sensor: [f64; 2], bearing: f64, half_angle: f64) -> [HalfPlane; 2] {
    let upper = bearing + half_angle;
    let lower = bearing - half_angle;
    let n1 = [-upper.sin(), upper.cos()];
    let n2 = [lower.sin(), -lower.cos()];
    [n1, n2].map(|n| HalfPlane {
        normal: n,
        offset: n[0] * sensor[0] + n[1] * sensor[1],
    })
}

/// The four outward directions of an axis-aligned bounding rectangle; the
/// rectangle LPs minimise `dᵀx` for each.
pub const RECTANGLE_DIRECTIONS: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

#[derive(Clone, Debug)]
pub struct LocalisationScenario {
    pub sensors: Vec<[f64; 2]>,
    pub target: [f64; 2],
    pub bearings: Vec<f64>,
    pub half_planes: Vec<HalfPlane>,
    pub network: Vec<(usize, usize)>,
    /// Nodes carry `(x, y, r)` and maximise `Σ r_i`.
    pub chebyshev: ProblemGraph,
    /// One LP per entry of [`RECTANGLE_DIRECTIONS`].
    pub rectangles: Vec<ProblemGraph>,
}

fn consensus_edges(network: &[(usize, usize)], dim: usize) -> Vec<EdgeConstraintBlock> {
    network
        .iter()
        .map(|&(i, j)| EdgeConstraintBlock {
            i,
            j,
            a_ij: DMatrix::identity(dim, dim),
            a_ji: -DMatrix::identity(dim, dim),
            b: DVector::zeros(dim),
            kinds: vec![RowKind::Equality; dim],
        })
        .collect()
}

impl LocalisationScenario {
    /// Builds the Chebyshev-centre and bounding-rectangle problems for given
    /// sensor placements and measured bearings. Every node carries every
    /// half-plane as a node constraint; neighbours agree through consensus
    /// equalities.
    pub fn from_geometry(
        sensors: Vec<[f64; 2]>,
        target: [f64; 2],
        bearings: Vec<f64>,
        half_angle: f64,
    ) -> Result<Self> {
        let n = sensors.len();
        if n < 2 || bearings.len() != n {
            return Err(Error::Generation(format!(
                "need at least two sensors with one bearing each, got {n} sensors and {} bearings",
                bearings.len()
            )));
        }
        let half_planes: Vec<HalfPlane> = sensors
            .iter()
            .zip(&bearings)
            .flat_map(|(&s, &b)| sensing_cone(s, b, half_angle))
            .collect();
        let network = geometric_edges(&sensors, connectivity_radius(n));
        let m = half_planes.len();

        let cheb_rows = DMatrix::from_fn(m, 3, |r, c| {
            let h = &half_planes[r];
            match c {
                0 | 1 => h.normal[c],
                _ => (h.normal[0].powi(2) + h.normal[1].powi(2)).sqrt(),
            }
        });
        let plane_rows = DMatrix::from_fn(m, 2, |r, c| half_planes[r].normal[c]);
        let offsets = DVector::from_iterator(m, half_planes.iter().map(|h| h.offset));
        let node_rows = |a: &DMatrix<f64>| -> Vec<NodeConstraintBlock> {
            (0..n)
                .map(|i| NodeConstraintBlock {
                    i,
                    a: a.clone(),
                    b: offsets.clone(),
                    kinds: vec![RowKind::Inequality; m],
                })
                .collect()
        };

        let chebyshev = ProblemGraph::new(
            (0..n)
                .map(|_| {
                    Node::new(LocalObjective::Linear {
                        g: DVector::from_column_slice(&[0.0, 0.0, -1.0]),
                    })
                })
                .collect(),
            consensus_edges(&network, 3),
            node_rows(&cheb_rows),
        )?;
        let rectangles = RECTANGLE_DIRECTIONS
            .iter()
            .map(|d| {
                ProblemGraph::new(
                    (0..n)
                        .map(|_| {
                            Node::new(LocalObjective::Linear {
                                g: DVector::from_column_slice(d),
                            })
                        })
                        .collect(),
                    consensus_edges(&network, 2),
                    node_rows(&plane_rows),
                )
            })
            .collect::<Result<Vec<_>>>()?;

        let scenario = LocalisationScenario {
            sensors,
            target,
            bearings,
            half_planes,
            network,
            chebyshev,
            rectangles,
        };
        let (_, radius) = scenario.chebyshev_centre()?;
        if radius <= 0.0 {
            return Err(Error::EmptyIntersection);
        }
        for lp in &scenario.rectangles {
            consensus_lp(lp).expect("consensus structure").solve()?;
        }
        Ok(scenario)
    }

    /// Centralised Chebyshev centre `(x_c, r)` by vertex enumeration.
    pub fn chebyshev_centre(&self) -> Result<([f64; 2], f64)> {
        let lp: SmallLp = consensus_lp(&self.chebyshev).expect("consensus structure");
        let sol = lp.solve().map_err(|e| match e {
            Error::Infeasible => Error::EmptyIntersection,
            other => other,
        })?;
        Ok(([sol[0], sol[1]], sol[2]))
    }

    /// Centralised bounding box `[x_min, x_max, y_min, y_max]` of the polytope.
    pub fn bounding_box(&self) -> Result<[f64; 4]> {
        let mut out = [0.0; 4];
        for (k, lp) in self.rectangles.iter().enumerate() {
            let x = consensus_lp(lp).expect("consensus structure").solve()?;
            let d = RECTANGLE_DIRECTIONS[k];
            out[k] = d[0] * x[0] + d[1] * x[1];
        }
        // minimising +e1 gives x_min; minimising −e1 gives −x_max
        Ok([out[0], -out[1], out[2], -out[3]])
    }
}

/// Random sensors and target in the unit square with noisy bearings,
/// resampled until the sensor network is connected and the cones intersect
/// in a bounded, non-degenerate polytope.
pub fn gen_localisation(num_sensors: usize, seed: u64) -> Result<LocalisationScenario> {
    gen_localisation_with(num_sensors, seed, LocalisationParams::default())
}

pub fn gen_localisation_with(
    num_sensors: usize,
    seed: u64,
    params: LocalisationParams,
) -> Result<LocalisationScenario> {
    if num_sensors < 2 {
        return Err(Error::Generation(format!("need at least 2 sensors, got {num_sensors}")));
    }
    let noise = Normal::new(0.0, params.bearing_noise).map_err(|e| Error::Generation(format!("bearing noise: {e}")))?;
    let mut r = rng(seed);
    let mut last_err = Error::EmptyIntersection;
    for _ in 0..MAX_ATTEMPTS {
        let target: [f64; 2] = [r.random(), r.random()];
        let sensors: Vec<[f64; 2]> = (0..num_sensors).map(|_| [r.random(), r.random()]).collect();
        let bearings: Vec<f64> = sensors
            .iter()
            .map(|s| (target[1] - s[1]).atan2(target[0] - s[0]) + noise.sample(&mut r))
            .collect();
        if !is_connected(
            num_sensors,
            &geometric_edges(&sensors, connectivity_radius(num_sensors)),
        ) {
            continue;
        }
        match LocalisationScenario::from_geometry(sensors, target, bearings, params.half_angle) {
            Ok(s) => return Ok(s),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

/// Small random QP on a connected graph: scalar nodes with costs
/// `½ w_i (x_i − t_i)²`, a random spanning tree plus extra edges, one
/// inequality row per edge and optional upper bounds on nodes, at most
/// `max_rows` inequality rows in total. Rows are built around a random point
/// so the problem is always feasible.
pub fn gen_random_qp(seed: u64, max_nodes: usize, max_rows: usize) -> ProblemGraph {
    assert!(
        max_nodes >= 2 && max_rows + 1 >= max_nodes,
        "a spanning tree must fit the row budget"
    );
    let mut r = rng(seed);
    let n = r.random_range(2..=max_nodes);
    let anchor: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let coef = |r: &mut ChaCha8Rng| {
        let mag: f64 = r.random_range(0.3..1.5);
        if r.random_bool(0.5) {
            mag
        } else {
            -mag
        }
    };

    let nodes: Vec<Node> = (0..n)
        .map(|_| {
            let w: f64 = r.random_range(0.5..2.0);
            let t: f64 = 2.0 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r);
            Node::new(LocalObjective::Quadratic {
                q_matrix: DMatrix::from_element(1, 1, w),
                q: DVector::from_element(1, -w * t),
            })
        })
        .collect();

    let mut pairs: Vec<(usize, usize)> = (1..n).map(|k| (r.random_range(0..k), k)).collect();
    let mut budget = max_rows - pairs.len();
    for _ in 0..2 * n {
        if budget == 0 {
            break;
        }
        let i = r.random_range(0..n);
        let j = r.random_range(0..n);
        let (lo, hi) = (i.min(j), i.max(j));
        if lo != hi && !pairs.contains(&(lo, hi)) && r.random_bool(0.5) {
            pairs.push((lo, hi));
            budget -= 1;
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| {
            let (ai, aj) = (coef(&mut r), coef(&mut r));
            let slack: f64 = r.random_range(0.0..0.3);
            scalar_edge(
                i,
                j,
                ai,
                aj,
                ai * anchor[i] + aj * anchor[j] + slack,
                RowKind::Inequality,
            )
        })
        .collect();

    let mut bounds = Vec::new();
    for (i, &x0) in anchor.iter().enumerate() {
        if budget > 0 && r.random_bool(0.3) {
            let a = coef(&mut r);
            bounds.push(scalar_bound(
                i,
                a,
                a * x0 + r.random_range(0.0..0.3),
                RowKind::Inequality,
            ));
            budget -= 1;
        }
    }
    ProblemGraph::new(nodes, edges, bounds).expect("random QP is valid")
}

/// Angle helper used by tests and tools: wraps to `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    } else if t <= -PI {
        t += 2.0 * PI;
    }
    t
}
