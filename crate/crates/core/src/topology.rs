//! Network topologies: transmitters, receivers, associations and the mean
//! received SNR matrix derived from them.
//!
//! Human-facing quantities (powers, thresholds, SNR overrides) are kept in
//! dB / dBm exactly as written in topology files; everything returned by the
//! accessors used for analysis is linear.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current topology file schema version.
pub const SCHEMA_VERSION: u32 = 1;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmitter {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Receiver {
    pub id: u32,
    pub x_m: f64,
    pub y_m: f64,
    /// SINR threshold required to decode at this receiver.
    pub theta_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub version: u32,
    pub transmitters: Vec<Transmitter>,
    pub receivers: Vec<Receiver>,
    /// Transmitter id to serving receiver id.
    pub association: BTreeMap<u32, u32>,
    pub noise_dbm: f64,
    pub alpha: f64,
    /// Optional K x L mean-SNR matrix in dB (row = transmitter, column =
    /// receiver, both in list order). When present it replaces the geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_db: Option<Vec<Vec<f64>>>,
}

/// Linear mean received SNR, `rho[(k, l)]` for transmitter k at receiver l.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrMatrix {
    pub rho: DMatrix<f64>,
}

impl SnrMatrix {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.rho[(k, l)]
    }

    pub fn num_tx(&self) -> usize {
        self.rho.nrows()
    }

    pub fn num_rx(&self) -> usize {
        self.rho.ncols()
    }
}

fn dist(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    (ax - bx).hypot(ay - by)
}

impl Topology {
    pub fn num_tx(&self) -> usize {
        self.transmitters.len()
    }

    pub fn num_rx(&self) -> usize {
        self.receivers.len()
    }

    /// Check every structural invariant; errors name the offending entity.
    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::Topology(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        if self.transmitters.is_empty() {
            return Err(Error::Topology("at least one transmitter is required".into()));
        }
        if self.receivers.is_empty() {
            return Err(Error::Topology("at least one receiver is required".into()));
        }
        if !(self.alpha > 2.0) || !self.alpha.is_finite() {
            return Err(Error::Topology(format!(
                "path-loss exponent must exceed 2, got {}",
                self.alpha
            )));
        }
        if !self.noise_dbm.is_finite() {
            return Err(Error::Topology("noise_dbm must be finite".into()));
        }

        let mut tx_ids = BTreeSet::new();
        for t in &self.transmitters {
            if !tx_ids.insert(t.id) {
                return Err(Error::Topology(format!("duplicate transmitter id {}", t.id)));
            }
            if ![t.x_m, t.y_m, t.power_dbm].iter().all(|v| v.is_finite()) {
                return Err(Error::Topology(format!(
                    "transmitter {} has a non-finite field",
                    t.id
                )));
            }
        }
        let mut rx_ids = BTreeSet::new();
        for r in &self.receivers {
            if !rx_ids.insert(r.id) {
                return Err(Error::Topology(format!("duplicate receiver id {}", r.id)));
            }
            if ![r.x_m, r.y_m, r.theta_db].iter().all(|v| v.is_finite()) {
                return Err(Error::Topology(format!("receiver {} has a non-finite field", r.id)));
            }
        }
        for t in &self.transmitters {
            match self.association.get(&t.id) {
                None => {
                    return Err(Error::Topology(format!(
                        "transmitter {} has no association entry",
                        t.id
                    )))
                }
                Some(rx) if !rx_ids.contains(rx) => {
                    return Err(Error::Topology(format!(
                        "transmitter {} is associated with unknown receiver {rx}",
                        t.id
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(tx) = self.association.keys().find(|id| !tx_ids.contains(id)) {
            return Err(Error::Topology(format!(
                "association references unknown transmitter {tx}"
            )));
        }

        match &self.rho_db {
            Some(m) => {
                if m.len() != self.num_tx() {
                    return Err(Error::Topology(format!(
                        "rho_db has {} rows, expected {}",
                        m.len(),
                        self.num_tx()
                    )));
                }
                for (k, row) in m.iter().enumerate() {
                    if row.len() != self.num_rx() {
                        return Err(Error::Topology(format!(
                            "rho_db row for transmitter {} has {} entries, expected {}",
                            self.transmitters[k].id,
                            row.len(),
                            self.num_rx()
                        )));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Topology(format!(
                            "rho_db row for transmitter {} has a non-finite entry",
                            self.transmitters[k].id
                        )));
                    }
                }
            }
            None => {
                for t in &self.transmitters {
                    for r in &self.receivers {
                        if !(dist(t.x_m, t.y_m, r.x_m, r.y_m) > 0.0) {
                            return Err(Error::Topology(format!(
                                "transmitter {} and receiver {} are co-located (distance zero)",
                                t.id, r.id
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Index (in receiver list order) of each transmitter's serving receiver.
    pub fn serving_receivers(&self) -> Result<Vec<usize>> {
        let index: BTreeMap<u32, usize> = self
            .receivers
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id, i))
            .collect();
        self.transmitters
            .iter()
            .map(|t| {
                let rx = self.association.get(&t.id).ok_or_else(|| {
                    Error::Topology(format!("transmitter {} has no association entry", t.id))
                })?;
                index.get(rx).copied().ok_or_else(|| {
                    Error::Topology(format!(
                        "transmitter {} is associated with unknown receiver {rx}",
                        t.id
                    ))
                })
            })
            .collect()
    }

    /// Linear SINR threshold of each receiver.
    pub fn thresholds(&self) -> Vec<f64> {
        self.receivers.iter().map(|r| db_to_linear(r.theta_db)).collect()
    }

    /// Linear threshold seen by each transmitter at its serving receiver.
    pub fn tx_thresholds(&self) -> Result<Vec<f64>> {
        let th = self.thresholds();
        Ok(self.serving_receivers()?.into_iter().map(|l| th[l]).collect())
    }

    pub fn distance(&self, k: usize, l: usize) -> f64 {
        let (t, r) = (&self.transmitters[k], &self.receivers[l]);
        dist(t.x_m, t.y_m, r.x_m, r.y_m)
    }

    /// Mean received SNR of every transmitter at every receiver.
    pub fn mean_snr_matrix(&self) -> Result<SnrMatrix> {
        self.validate()?;
        let (k, l) = (self.num_tx(), self.num_rx());
        let rho = match &self.rho_db {
            Some(m) => DMatrix::from_fn(k, l, |i, j| db_to_linear(m[i][j])),
            None => {
                let noise = db_to_linear(self.noise_dbm);
                DMatrix::from_fn(k, l, |i, j| {
                    db_to_linear(self.transmitters[i].power_dbm)
                        * self.distance(i, j).powf(-self.alpha)
                        / noise
                })
            }
        };
        if let Some(((i, j), v)) = rho
            .iter()
            .enumerate()
            .map(|(n, v)| ((n % k, n / k), v))
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::Topology(format!(
                "mean SNR of transmitter {} at receiver {} is {v}",
                self.transmitters[i].id, self.receivers[j].id
            )));
        }
        Ok(SnrMatrix { rho })
    }

    /// K transmitters served by one receiver, every mean SNR equal to `rho_db`.
    pub fn symmetric(k: usize, rho_db: f64, theta_db: f64) -> Result<Topology> {
        if k == 0 {
            return Err(Error::InvalidParameter("symmetric topology needs K >= 1".into()));
        }
        let transmitters = (0..k)
            .map(|i| {
                let ang = std::f64::consts::TAU * i as f64 / k as f64;
                Transmitter {
                    id: i as u32 + 1,
                    x_m: 10.0 * ang.cos(),
                    y_m: 10.0 * ang.sin(),
                    power_dbm: 0.0,
                }
            })
            .collect();
        let topo = Topology {
            version: SCHEMA_VERSION,
            transmitters,
            receivers: vec![Receiver {
                id: 1,
                x_m: 0.0,
                y_m: 0.0,
                theta_db,
            }],
            association: (1..=k as u32).map(|i| (i, 1)).collect(),
            noise_dbm: 0.0,
            alpha: 4.0,
            rho_db: Some(vec![vec![rho_db]; k]),
        };
        topo.validate()?;
        Ok(topo)
    }

    /// Dedicated T-R pairs (transmitter i served by receiver i) given only the
    /// dB SNR matrix and per-receiver thresholds.
    pub fn from_rho_db(rho_db: Vec<Vec<f64>>, theta_db: &[f64]) -> Result<Topology> {
        let k = rho_db.len();
        if theta_db.len() != k {
            return Err(Error::Dimension {
                what: "receiver thresholds",
                expected: k,
                got: theta_db.len(),
            });
        }
        let topo = Topology {
            version: SCHEMA_VERSION,
            transmitters: (0..k)
                .map(|i| Transmitter {
                    id: i as u32 + 1,
                    x_m: 100.0 * i as f64,
                    y_m: 0.0,
                    power_dbm: 0.0,
                })
                .collect(),
            receivers: (0..k)
                .map(|i| Receiver {
                    id: i as u32 + 1,
                    x_m: 100.0 * i as f64 + 10.0,
                    y_m: 0.0,
                    theta_db: theta_db[i],
                })
                .collect(),
            association: (1..=k as u32).map(|i| (i, i)).collect(),
            noise_dbm: 0.0,
            alpha: 4.0,
            rho_db: Some(rho_db),
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parse and validate a topology document.
    pub fn from_json(text: &str) -> Result<Topology> {
        let topo: Topology = serde_json::from_str(text).map_err(|e| {
            Error::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        topo.validate()?;
        Ok(topo)
    }
}

pub fn save_topology(topo: &Topology, path: impl AsRef<Path>) -> Result<()> {
    topo.validate()?;
    fs::write(path, topo.to_json()? + "\n")?;
    Ok(())
}

pub fn load_topology(path: impl AsRef<Path>) -> Result<Topology> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Topology::from_json(&text)
}

/// Radio parameters shared by every node produced by a generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub power_dbm: f64,
    pub theta_db: f64,
    pub noise_dbm: f64,
    pub alpha: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            power_dbm: 17.0,
            theta_db: 0.0,
            noise_dbm: -90.0,
            alpha: 3.8,
        }
    }
}

/// Transmit power assignment for cellular topologies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerRule {
    /// Every transmitter uses `RadioParams::power_dbm`.
    Fixed,
    /// Channel-inversion power control: each transmitter's mean SNR at its
    /// serving BS equals this many dB.
    TargetSnrDb(f64),
}

/// Homogeneous PPP on `[0, side]^2`.
pub fn gen_ppp_square(density: f64, side: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::InvalidParameter(format!("density must be positive, got {density}")));
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::InvalidParameter(format!("side length must be positive, got {side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean = density * side * side;
    let n = Poisson::new(mean)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?
        .sample(&mut rng) as usize;
    if n == 0 {
        return Err(Error::EmptyTopology);
    }
    Ok(uniform_points(n, side, &mut rng))
}

/// `n` i.i.d. uniform points on `[0, side]^2`.
pub fn gen_uniform_square(n: usize, side: f64, seed: u64) -> Result<Vec<[f64; 2]>> {
    if n == 0 {
        return Err(Error::EmptyTopology);
    }
    if !(side > 0.0 && side.is_finite()) {
        return Err(Error::InvalidParameter(format!("side length must be positive, got {side}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(uniform_points(n, side, &mut rng))
}

fn uniform_points(n: usize, side: f64, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| [rng.gen::<f64>() * side, rng.gen::<f64>() * side])
        .collect()
}

/// Bipolar network: each transmitter gets a dedicated receiver at distance
/// `tr_distance` in a uniformly random direction.
pub fn gen_bipolar(
    tx_positions: &[[f64; 2]],
    tr_distance: f64,
    radio: RadioParams,
    seed: u64,
) -> Result<Topology> {
    if !(tr_distance > 0.0 && tr_distance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "T-R distance must be positive, got {tr_distance}"
        )));
    }
    if tx_positions.is_empty() {
        return Err(Error::EmptyTopology);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transmitters = Vec::with_capacity(tx_positions.len());
    let mut receivers = Vec::with_capacity(tx_positions.len());
    for (i, p) in tx_positions.iter().enumerate() {
        let id = i as u32 + 1;
        let ang = rng.gen::<f64>() * std::f64::consts::TAU;
        transmitters.push(Transmitter {
            id,
            x_m: p[0],
            y_m: p[1],
            power_dbm: radio.power_dbm,
        });
        receivers.push(Receiver {
            id,
            x_m: p[0] + tr_distance * ang.cos(),
            y_m: p[1] + tr_distance * ang.sin(),
            theta_db: radio.theta_db,
        });
    }
    let topo = Topology {
        version: SCHEMA_VERSION,
        association: (1..=tx_positions.len() as u32).map(|i| (i, i)).collect(),
        transmitters,
        receivers,
        noise_dbm: radio.noise_dbm,
        alpha: radio.alpha,
        rho_db: None,
    };
    topo.validate()?;
    Ok(topo)
}

/// Cellular uplink: every transmitter is served by its nearest BS, ties going
/// to the lower BS id.
pub fn gen_cellular(
    tx_positions: &[[f64; 2]],
    bs_positions: &[[f64; 2]],
    radio: RadioParams,
    power: PowerRule,
) -> Result<Topology> {
    if bs_positions.is_empty() {
        return Err(Error::InvalidParameter("at least one base station is required".into()));
    }
    if tx_positions.is_empty() {
        return Err(Error::EmptyTopology);
    }
    let receivers: Vec<Receiver> = bs_positions
        .iter()
        .enumerate()
        .map(|(i, p)| Receiver {
            id: i as u32 + 1,
            x_m: p[0],
            y_m: p[1],
            theta_db: radio.theta_db,
        })
        .collect();
    let mut transmitters = Vec::with_capacity(tx_positions.len());
    let mut association = BTreeMap::new();
    for (i, p) in tx_positions.iter().enumerate() {
        let id = i as u32 + 1;
        let (best, d) = receivers
            .iter()
            .map(|r| (r.id, dist(p[0], p[1], r.x_m, r.y_m)))
            .fold((0u32, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        let power_dbm = match power {
            PowerRule::Fixed => radio.power_dbm,
            PowerRule::TargetSnrDb(target) => {
                target + radio.noise_dbm + 10.0 * radio.alpha * d.log10()
            }
        };
        transmitters.push(Transmitter {
            id,
            x_m: p[0],
            y_m: p[1],
            power_dbm,
        });
        association.insert(id, best);
    }
    let topo = Topology {
        version: SCHEMA_VERSION,
        transmitters,
        receivers,
        association,
        noise_dbm: radio.noise_dbm,
        alpha: radio.alpha,
        rho_db: None,
    };
    topo.validate()?;
    Ok(topo)
}

/// Reference scenarios reproduced by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Two dedicated pairs with strong cross links.
    Fig4a,
    /// Two dedicated pairs, weak link from transmitter 1 to receiver 2.
    Fig4c,
    /// 25 power-controlled transmitters around one BS (symmetric, 10 dB, 0 dB).
    Fig5a,
    /// PPP transmitters around two BSs, own-link SNR 0 dB, threshold -8 dB.
    Fig5c,
    /// Bipolar PPP, density 1e-4 on a 300 m square, 25 m links.
    Fig2,
    /// Ten bipolar pairs on a 300 m square.
    Fig10,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig2,
        Preset::Fig4a,
        Preset::Fig4c,
        Preset::Fig5a,
        Preset::Fig5c,
        Preset::Fig10,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig4a => "fig4a",
            Preset::Fig4c => "fig4c",
            Preset::Fig5a => "fig5a",
            Preset::Fig5c => "fig5c",
            Preset::Fig10 => "fig10",
        }
    }

    pub fn parse(s: &str) -> Result<Preset> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown preset '{s}' (expected one of fig2, fig4a, fig4c, fig5a, fig5c, fig10)"
                ))
            })
    }

    /// Build the preset topology. Random presets reseed (seed + 1, ...) until
    /// the point process is non-empty.
    pub fn build(self, seed: u64) -> Result<Topology> {
        match self {
            Preset::Fig4a => two_pair(8.8),
            Preset::Fig4c => two_pair(-3.4),
            Preset::Fig5a => {
                let radio = RadioParams {
                    power_dbm: 0.0,
                    theta_db: 0.0,
                    noise_dbm: -90.0,
                    alpha: 4.0,
                };
                let tx = gen_uniform_square(25, 150.0, seed)?;
                let bs = gen_uniform_square(1, 150.0, seed ^ 0x5eed)?;
                gen_cellular(&tx, &bs, radio, PowerRule::TargetSnrDb(10.0))
            }
            Preset::Fig5c => {
                let radio = RadioParams {
                    power_dbm: 0.0,
                    theta_db: -8.0,
                    noise_dbm: -90.0,
                    alpha: 4.0,
                };
                let tx = reseeding(seed, |s| gen_ppp_square(1e-3, 150.0, s))?;
                let bs = gen_uniform_square(2, 150.0, seed ^ 0x5eed)?;
                gen_cellular(&tx, &bs, radio, PowerRule::TargetSnrDb(0.0))
            }
            Preset::Fig2 => {
                let tx = reseeding(seed, |s| gen_ppp_square(1e-4, 300.0, s))?;
                gen_bipolar(&tx, 25.0, RadioParams::default(), seed ^ 0xb1)
            }
            Preset::Fig10 => {
                let tx = gen_uniform_square(10, 300.0, seed)?;
                gen_bipolar(&tx, 25.0, RadioParams::default(), seed ^ 0xb1)
            }
        }
    }
}

fn two_pair(rho12_db: f64) -> Result<Topology> {
    Topology::from_rho_db(vec![vec![-3.0, rho12_db], vec![5.1, -1.3]], &[-5.0, -7.0])
}

/// Retry a point-process draw with successive seeds while it comes back empty.
pub fn reseeding<T>(seed: u64, mut draw: impl FnMut(u64) -> Result<T>) -> Result<T> {
    for attempt in 0..1000u64 {
        match draw(seed.wrapping_add(attempt)) {
            Err(Error::EmptyTopology) => continue,
            other => return other,
        }
    }
    Err(Error::EmptyTopology)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single_link(power: f64, noise: f64, d: f64, alpha: f64) -> Topology {
        Topology {
            version: SCHEMA_VERSION,
            transmitters: vec![Transmitter {
                id: 1,
                x_m: 0.0,
                y_m: 0.0,
                power_dbm: power,
            }],
            receivers: vec![Receiver {
                id: 1,
                x_m: d,
                y_m: 0.0,
                theta_db: 0.0,
            }],
            association: [(1, 1)].into_iter().collect(),
            noise_dbm: noise,
            alpha,
            rho_db: None,
        }
    }

    #[test]
    fn snr_examples() {
        let rho = |t: &Topology| t.mean_snr_matrix().unwrap().get(0, 0);
        assert!((rho(&single_link(0.0, 0.0, 1.0, 4.0)) - 1.0).abs() < 1e-12);

        let r = rho(&single_link(17.0, -90.0, 25.0, 3.8));
        let oracle = 10f64.powf(10.7 - 3.8 * 25f64.log10());
        assert!((r - oracle).abs() / oracle < 1e-12);
        assert!((r - 2.44e5).abs() / 2.44e5 < 0.01);

        let near = rho(&single_link(5.0, -80.0, 30.0, 4.0));
        let far = rho(&single_link(5.0, -80.0, 60.0, 4.0));
        assert!((near / far - 16.0).abs() < 1e-9);
    }

    #[test]
    fn override_takes_precedence() {
        let t = Preset::Fig4a.build(0).unwrap();
        let m = t.mean_snr_matrix().unwrap();
        assert!((m.get(0, 0) - db_to_linear(-3.0)).abs() < 1e-12);
        assert!((m.get(0, 1) - db_to_linear(8.8)).abs() < 1e-12);
        assert!((m.get(1, 0) - db_to_linear(5.1)).abs() < 1e-12);
        assert!((linear_to_db(m.get(1, 1)) + 1.3).abs() < 1e-12);
        assert_eq!(t.serving_receivers().unwrap(), vec![0, 1]);
    }

    #[test]
    fn ppp_counts_and_determinism() {
        let a = gen_ppp_square(1e-4, 300.0, 9).unwrap();
        let b = gen_ppp_square(1e-4, 300.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| (0.0..=300.0).contains(&p[0]) && (0.0..=300.0).contains(&p[1])));

        let n = 10_000u64;
        let mut total = 0usize;
        for s in 0..n {
            total += gen_ppp_square(1e-4, 300.0, s).map(|v| v.len()).unwrap_or(0);
        }
        let mean = total as f64 / n as f64;
        let se = (9.0 / n as f64).sqrt();
        assert!((mean - 9.0).abs() < 3.0 * se, "mean {mean}");
        assert!(gen_ppp_square(0.0, 10.0, 0).is_err());
    }

    #[test]
    fn bipolar_geometry() {
        let t = gen_bipolar(&[[0.0, 0.0]], 25.0, RadioParams::default(), 3).unwrap();
        assert!((t.distance(0, 0) - 25.0).abs() < 1e-9);

        let pts = gen_uniform_square(7, 300.0, 1).unwrap();
        let t = gen_bipolar(&pts, 25.0, RadioParams::default(), 1).unwrap();
        assert_eq!(t.num_rx(), 7);
        assert_eq!(t.serving_receivers().unwrap(), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn cellular_nearest_and_ties() {
        let bs = [[0.0, 0.0], [10.0, 0.0]];
        let t = gen_cellular(
            &[[5.0, 3.0], [1.0, 1.0], [9.0, 0.5]],
            &bs,
            RadioParams::default(),
            PowerRule::Fixed,
        )
        .unwrap();
        assert_eq!(t.association[&1], 1);
        assert_eq!(t.association[&2], 1);
        assert_eq!(t.association[&3], 2);

        let one = gen_cellular(&[[1.0, 2.0], [50.0, 9.0]], &[[3.0, 3.0]], RadioParams::default(), PowerRule::Fixed)
            .unwrap();
        assert!(one.association.values().all(|&r| r == 1));
    }

    #[test]
    fn power_control_hits_target() {
        let t = Preset::Fig5a.build(4).unwrap();
        let m = t.mean_snr_matrix().unwrap();
        for k in 0..t.num_tx() {
            assert!((linear_to_db(m.get(k, 0)) - 10.0).abs() < 1e-9);
        }
        let t = Preset::Fig5c.build(4).unwrap();
        let m = t.mean_snr_matrix().unwrap();
        let serve = t.serving_receivers().unwrap();
        for (k, &l) in serve.iter().enumerate() {
            assert!(linear_to_db(m.get(k, l)).abs() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip() {
        for p in Preset::ALL {
            let t = p.build(2).unwrap();
            assert_eq!(Topology::from_json(&t.to_json().unwrap()).unwrap(), t);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let t = Preset::Fig4a.build(0).unwrap();
        save_topology(&t, &path).unwrap();
        assert_eq!(load_topology(&path).unwrap(), t);
    }

    #[test]
    fn rejects_bad_files() {
        let mut t = single_link(0.0, 0.0, 1.0, 4.0);
        t.receivers[0].x_m = 0.0;
        let err = Topology::from_json(&t.to_json().unwrap()).unwrap_err();
        assert!(err.to_string().contains("distance zero"), "{err}");

        let mut t = single_link(0.0, 0.0, 1.0, 4.0);
        t.transmitters.push(Transmitter {
            id: 7,
            x_m: 3.0,
            y_m: 3.0,
            power_dbm: 0.0,
        });
        let err = t.validate().unwrap_err();
        assert!(err.to_string().contains("transmitter 7"), "{err}");

        let err = Topology::from_json("{\"version\": 1,\n \"transmitters\": 3}").unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("line 2")), "{err}");

        let mut t = single_link(0.0, 0.0, 1.0, 4.0);
        t.alpha = 2.0;
        assert!(t.validate().is_err());
    }

    proptest! {
        #[test]
        fn snr_monotone_in_distance_and_power(
            d in 1.0f64..500.0,
            grow in 1.001f64..3.0,
            p in -10.0f64..30.0,
            dp in 0.01f64..10.0,
            alpha in 2.1f64..6.0,
        ) {
            let rho = |t: &Topology| t.mean_snr_matrix().unwrap().get(0, 0);
            let base = rho(&single_link(p, -90.0, d, alpha));
            prop_assert!(rho(&single_link(p, -90.0, d * grow, alpha)) < base);
            prop_assert!(rho(&single_link(p + dp, -90.0, d, alpha)) > base);
        }
    }
}
