//! Semi-synthetic localization: a square room observed by light sensors
//! whose triangular detection zones point at a light-source segment.
//! Provides scene generation, the sensor likelihood, observation
//! sampling, the closed-form MAP baseline, and dataset export.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{default_names, Dataset, LabelMatrix};
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Room geometry and sensor noise rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    grid_w: usize,
    sensors: Vec<[f64; 2]>,
    light_a: [f64; 2],
    light_b: [f64; 2],
    /// False negative rate (sensor silent with one active tile in view).
    eps_fn: f64,
    /// False positive rate (sensor firing with an empty view).
    eps_fp: f64,
}

impl Scenario {
    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn sensors(&self) -> &[[f64; 2]] {
        &self.sensors
    }

    pub fn light(&self) -> ([f64; 2], [f64; 2]) {
        (self.light_a, self.light_b)
    }

    pub fn eps_fn(&self) -> f64 {
        self.eps_fn
    }

    pub fn eps_fp(&self) -> f64 {
        self.eps_fp
    }

    pub fn n_sensors(&self) -> usize {
        self.sensors.len()
    }

    /// Detection triangle of sensor `d`: (sensor, light_a, light_b).
    pub fn triangle(&self, d: usize) -> [[f64; 2]; 3] {
        [self.sensors[d], self.light_a, self.light_b]
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "grid_w": self.grid_w,
            "sensors": self.sensors,
            "light": [self.light_a, self.light_b],
            "eps_fn": self.eps_fn,
            "eps_fp": self.eps_fp,
        })
        .to_string()
    }
}

/// A `W x W` grid of active/inactive tiles. Row-major storage with the
/// x index fastest: tile (i, j) covers `[i, i+1] x [j, j+1]` and sits at
/// flat index `j * W + i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    w: usize,
    tiles: Vec<u8>,
}

impl Scene {
    pub fn empty(w: usize) -> Self {
        Self {
            w,
            tiles: vec![0; w * w],
        }
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn tiles(&self) -> &[u8] {
        &self.tiles
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.tiles[j * self.w + i]
    }

    pub fn set(&mut self, i: usize, j: usize, value: u8) {
        self.tiles[j * self.w + i] = value;
    }

    pub fn active_count(&self) -> usize {
        self.tiles.iter().map(|&t| t as usize).sum()
    }

    /// Center of tile (i, j).
    pub fn tile_center(i: usize, j: usize) -> [f64; 2] {
        [i as f64 + 0.5, j as f64 + 0.5]
    }
}

/// MAP output over the three-level alphabet {0, 0.5, 1}; 0.5 marks the
/// shadow zones no firing decision reached.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEstimate {
    w: usize,
    tiles: Vec<f64>,
}

impl MapEstimate {
    pub fn w(&self) -> usize {
        self.w
    }

    pub fn tiles(&self) -> &[f64] {
        &self.tiles
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.tiles[j * self.w + i]
    }

    /// Collapses the estimate to bits for metric computation; shadow
    /// tiles (0.5) score as background.
    pub fn to_bits(&self) -> Vec<u8> {
        self.tiles.iter().map(|&v| (v == 1.0) as u8).collect()
    }
}

/// Builds the standard scenario: a light segment spanning the middle half
/// of the bottom edge and sensors evenly spaced along the left, top, and
/// right edges (walking the boundary from the bottom-left corner, never
/// landing on a corner).
pub fn build_scenario(
    grid_w: usize,
    n_sensors: usize,
    eps_fn: f64,
    eps_fp: f64,
) -> Result<Scenario> {
    if grid_w < 4 {
        return Err(Error::config("grid width must be at least 4"));
    }
    if n_sensors < 1 {
        return Err(Error::config("at least one sensor is required"));
    }
    for (name, eps) in [("eps_fn", eps_fn), ("eps_fp", eps_fp)] {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::config(format!("{name} must lie in (0, 0.5)")));
        }
    }
    let w = grid_w as f64;
    let mut sensors = Vec::with_capacity(n_sensors);
    // Perimeter path of length 3W: up the left edge, across the top,
    // down the right edge.
    let total = 3.0 * w;
    for d in 0..n_sensors {
        let s = (d as f64 + 0.5) * total / n_sensors as f64;
        let pos = if s < w {
            [0.0, s]
        } else if s < 2.0 * w {
            [s - w, w]
        } else {
            [w, 3.0 * w - s]
        };
        sensors.push(pos);
    }
    Ok(Scenario {
        grid_w,
        sensors,
        light_a: [0.25 * w, 0.0],
        light_b: [0.75 * w, 0.0],
        eps_fn,
        eps_fp,
    })
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Closed point-in-triangle test: boundary points count as inside.
pub fn point_in_triangle(p: [f64; 2], tri: &[[f64; 2]; 3]) -> bool {
    let d1 = cross(tri[0], tri[1], p);
    let d2 = cross(tri[1], tri[2], p);
    let d3 = cross(tri[2], tri[0], p);
    let has_neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
    let has_pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
    !(has_neg && has_pos)
}

/// Number of active tiles whose center lies inside sensor `d`'s triangle.
pub fn tile_count(scene: &Scene, scenario: &Scenario, d: usize) -> usize {
    let tri = scenario.triangle(d);
    let w = scene.w();
    let mut count = 0;
    for j in 0..w {
        for i in 0..w {
            if scene.get(i, j) == 1 && point_in_triangle(Scene::tile_center(i, j), &tri) {
                count += 1;
            }
        }
    }
    count
}

/// Sensor likelihood `p(x_d = 1 | c)`: the false positive rate on an
/// empty view, rising from `1 - eps_fn` toward 1 as more tiles activate.
pub fn sensor_prob(c: usize, scenario: &Scenario) -> f64 {
    match c {
        0 => scenario.eps_fp,
        1 => 1.0 - scenario.eps_fn,
        _ => 1.0 - scenario.eps_fn * (-0.1 * (c as f64 - 1.0)).exp(),
    }
}

/// Generates a scene: a `round(W/8) x 2` rectangle at a random anchor
/// (clipped to the grid), a 2x2 square in the corner farthest from the
/// rectangle's center, and `floor(L/100)` random tile flips.
pub fn generate_scene(scenario: &Scenario, seed: u64) -> Scene {
    let w = scenario.grid_w();
    let mut scene = Scene::empty(w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let rect_w = ((w as f64 / 8.0).round() as usize).max(1);
    let ax = rng.random_range(0..w);
    let ay = rng.random_range(0..w);
    let x_end = (ax + rect_w).min(w);
    let y_end = (ay + 2).min(w);
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut rect_tiles = 0.0;
    for j in ay..y_end {
        for i in ax..x_end {
            scene.set(i, j, 1);
            let c = Scene::tile_center(i, j);
            cx += c[0];
            cy += c[1];
            rect_tiles += 1.0;
        }
    }
    cx /= rect_tiles;
    cy /= rect_tiles;

    // 2x2 corner blocks, identified by their lower-left tile.
    let far = w - 2;
    let corners = [(0, 0), (far, 0), (0, far), (far, far)];
    let (bx, by) = corners
        .into_iter()
        .max_by(|a, b| {
            let da = (a.0 as f64 + 1.0 - cx).powi(2) + (a.1 as f64 + 1.0 - cy).powi(2);
            let db = (b.0 as f64 + 1.0 - cx).powi(2) + (b.1 as f64 + 1.0 - cy).powi(2);
            da.total_cmp(&db)
        })
        .unwrap();
    for j in by..by + 2 {
        for i in bx..bx + 2 {
            scene.set(i, j, 1);
        }
    }

    let flips = (w * w) / 100;
    if flips > 0 {
        for idx in rand::seq::index::sample(&mut rng, w * w, flips) {
            scene.tiles[idx] ^= 1;
        }
    }
    scene
}

/// `D x m` Bernoulli observations, one row per sensor, with success
/// probability given by the sensor likelihood.
pub fn sample_observations(
    scene: &Scene,
    scenario: &Scenario,
    m: usize,
    seed: u64,
) -> Result<Vec<u8>> {
    if m < 1 {
        return Err(Error::config("observation count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = scenario.n_sensors();
    let mut obs = Vec::with_capacity(d * m);
    for sensor in 0..d {
        let p = sensor_prob(tile_count(scene, scenario, sensor), scenario);
        for _ in 0..m {
            obs.push((rng.random::<f64>() < p) as u8);
        }
    }
    Ok(obs)
}

/// Closed-form MAP baseline: estimate each sensor's firing rate, decide
/// whether its triangle is empty, zero out the triangles of quiet
/// sensors, then raise the still-undecided tiles of firing triangles to 1.
/// Tiles outside every decision stay at 0.5.
pub fn map_estimate(observations: &[u8], scenario: &Scenario) -> Result<MapEstimate> {
    let d = scenario.n_sensors();
    if d == 0 || observations.len() % d != 0 || observations.is_empty() {
        return Err(Error::input("observations must be a D x m matrix"));
    }
    let m = observations.len() / d;
    let w = scenario.grid_w();
    let mut tiles = vec![0.5f64; w * w];

    let theta: Vec<f64> = (0..d)
        .map(|s| {
            let row = &observations[s * m..(s + 1) * m];
            row.iter().map(|&b| b as f64).sum::<f64>() / m as f64
        })
        .collect();
    let fired: Vec<bool> = theta.iter().map(|&t| t > 0.5).collect();

    for s in 0..d {
        if !fired[s] {
            let tri = scenario.triangle(s);
            for j in 0..w {
                for i in 0..w {
                    if point_in_triangle(Scene::tile_center(i, j), &tri) {
                        tiles[j * w + i] = 0.0;
                    }
                }
            }
        }
    }
    for s in 0..d {
        if fired[s] {
            let tri = scenario.triangle(s);
            for j in 0..w {
                for i in 0..w {
                    let idx = j * w + i;
                    if tiles[idx] == 0.5 && point_in_triangle(Scene::tile_center(i, j), &tri) {
                        tiles[idx] = 1.0;
                    }
                }
            }
        }
    }
    Ok(MapEstimate { w, tiles })
}

/// Generates a localization dataset: per instance one scene, `m_obs`
/// observations per sensor, features are the per-sensor observation
/// means, labels the flattened tile grid.
pub fn generate_localization_dataset(
    grid_w: usize,
    n_sensors: usize,
    n_instances: usize,
    m_obs: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_instances < 1 {
        return Err(Error::config("instance count must be at least 1"));
    }
    let scenario = build_scenario(grid_w, n_sensors, 0.15, 0.01)?;
    let l = grid_w * grid_w;
    let mut features = Vec::with_capacity(n_instances * n_sensors);
    let mut labels = Vec::with_capacity(n_instances * l);
    for i in 0..n_instances {
        let scene = generate_scene(&scenario, derive_seed(seed, 2 * i as u64));
        let obs = sample_observations(&scene, &scenario, m_obs, derive_seed(seed, 2 * i as u64 + 1))?;
        for s in 0..n_sensors {
            let row = &obs[s * m_obs..(s + 1) * m_obs];
            features.push(row.iter().map(|&b| b as f64).sum::<f64>() / m_obs as f64);
        }
        labels.extend_from_slice(scene.tiles());
    }
    let mut label_names = Vec::with_capacity(l);
    for j in 0..grid_w {
        for i in 0..grid_w {
            label_names.push(format!("t{j}_{i}"));
        }
    }
    Dataset::new(
        features,
        LabelMatrix::new(n_instances, l, labels)?,
        default_names("s", n_sensors),
        label_names,
    )
}
