use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::qos::{EngineInfo, QosMatrix, QosSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub continent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Location {
    pub region: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSpec {
    pub id: String,
    pub region: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

impl EngineSpec {
    pub fn endpoint(&self) -> String {
        self.url
            .clone()
            .unwrap_or_else(|| format!("http://{}.engines.example/services/Engine", self.id))
    }

    pub fn location(&self) -> Location {
        Location {
            region: self.region.clone(),
            zone: self.zone.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: String,
    pub region: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
}

impl ServiceSpec {
    pub fn location(&self) -> Location {
        Location {
            region: self.region.clone(),
            zone: self.zone.clone(),
        }
    }
}

/// Explicit QoS between two regions, applied in both directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairQos {
    pub a: String,
    pub b: String,
    pub latency_s: f64,
    pub bandwidth_mbps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkDefaults {
    /// Endpoints in the same availability zone.
    pub same_zone: QosSample,
    pub intra_region: QosSample,
    pub intra_continent: QosSample,
    pub inter_continent: QosSample,
    /// Capacity of an engine's network interface, shared by all its
    /// concurrent transfers in each direction.
    #[serde(default = "default_nic")]
    pub nic_mbps: f64,
}

fn default_nic() -> f64 {
    200.0
}

impl Default for NetworkDefaults {
    fn default() -> Self {
        Self {
            same_zone: QosSample {
                latency_s: 0.002,
                bandwidth_mbps: 200.0,
            },
            intra_region: QosSample {
                latency_s: 0.005,
                bandwidth_mbps: 100.0,
            },
            intra_continent: QosSample {
                latency_s: 0.040,
                bandwidth_mbps: 25.0,
            },
            inter_continent: QosSample {
                latency_s: 0.120,
                bandwidth_mbps: 8.0,
            },
            nic_mbps: default_nic(),
        }
    }
}

/// Multiplicative jitter on transfer times, uniform in `[1 - spread, 1 + spread]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub spread: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Roles {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centralized_local: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centralized_remote: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centralized: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initiator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributed: Option<Vec<String>>,
}

/// On-disk topology description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub regions: Vec<Region>,
    pub engines: Vec<EngineSpec>,
    pub services: Vec<ServiceSpec>,
    /// When present, the only source of QoS: every region pair in use must be listed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_qos: Option<Vec<PairQos>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults: Option<NetworkDefaults>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    #[serde(default)]
    pub roles: Roles,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    continents: BTreeMap<String, String>,
    pub defaults: NetworkDefaults,
    explicit: Option<BTreeMap<(String, String), QosSample>>,
}

impl NetworkModel {
    pub fn qos(&self, a: &Location, b: &Location) -> Result<QosSample, HarnessError> {
        for loc in [a, b] {
            if !self.continents.contains_key(&loc.region) {
                return Err(HarnessError::UnknownRegion(loc.region.clone()));
            }
        }
        let same_zone = a.region == b.region && a.zone.is_some() && a.zone == b.zone;
        if same_zone {
            return Ok(self.defaults.same_zone);
        }
        if let Some(table) = &self.explicit {
            return table
                .get(&(a.region.clone(), b.region.clone()))
                .or_else(|| table.get(&(b.region.clone(), a.region.clone())))
                .copied()
                .ok_or_else(|| HarnessError::MissingQos {
                    a: a.region.clone(),
                    b: b.region.clone(),
                });
        }
        Ok(if a.region == b.region {
            self.defaults.intra_region
        } else if self.continents[&a.region] == self.continents[&b.region] {
            self.defaults.intra_continent
        } else {
            self.defaults.inter_continent
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub regions: Vec<Region>,
    pub engines: Vec<EngineSpec>,
    pub services: Vec<ServiceSpec>,
    pub model: NetworkModel,
    pub roles: Roles,
    pub noise: Option<NoiseSpec>,
}

/// Validates a configuration and derives its network model.
pub fn build_topology(config: &TopologyConfig) -> Result<Topology, HarnessError> {
    let mut continents = BTreeMap::new();
    for r in &config.regions {
        if continents.insert(r.name.clone(), r.continent.clone()).is_some() {
            return Err(HarnessError::Config(format!("region {} declared twice", r.name)));
        }
    }
    let mut ids = BTreeSet::new();
    for (id, region) in config
        .engines
        .iter()
        .map(|e| (&e.id, &e.region))
        .chain(config.services.iter().map(|s| (&s.id, &s.region)))
    {
        if !continents.contains_key(region) {
            return Err(HarnessError::UnknownRegion(region.clone()));
        }
        if !ids.insert(id.clone()) {
            return Err(HarnessError::Config(format!("id {id} declared twice")));
        }
    }
    let explicit = match &config.pair_qos {
        None => None,
        Some(pairs) => {
            let mut table = BTreeMap::new();
            for p in pairs {
                for r in [&p.a, &p.b] {
                    if !continents.contains_key(r) {
                        return Err(HarnessError::UnknownRegion(r.clone()));
                    }
                }
                let q = QosSample::new(p.latency_s, p.bandwidth_mbps)?;
                table.insert((p.a.clone(), p.b.clone()), q);
            }
            Some(table)
        }
    };
    let topo = Topology {
        regions: config.regions.clone(),
        engines: config.engines.clone(),
        services: config.services.clone(),
        model: NetworkModel {
            continents,
            defaults: config.defaults.unwrap_or_default(),
            explicit,
        },
        roles: config.roles.clone(),
        noise: config.noise,
    };
    for role in [
        &topo.roles.centralized_local,
        &topo.roles.centralized_remote,
        &topo.roles.centralized,
        &topo.roles.initiator,
    ]
    .into_iter()
    .flatten()
    .chain(topo.roles.distributed.iter().flatten())
    {
        topo.engine(role)?;
    }
    Ok(topo)
}

impl Topology {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: TopologyConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("topology: {e}")))?;
        build_topology(&config)
    }

    pub fn engine(&self, id: &str) -> Result<&EngineSpec, HarnessError> {
        self.engines
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| HarnessError::Config(format!("unknown engine {id}")))
    }

    pub fn service(&self, id: &str) -> Result<&ServiceSpec, HarnessError> {
        self.services
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| HarnessError::Config(format!("unknown service {id}")))
    }

    pub fn engine_info(&self, id: &str) -> Result<EngineInfo, HarnessError> {
        let e = self.engine(id)?;
        Ok(EngineInfo {
            id: e.id.clone(),
            endpoint: e.endpoint(),
            region: e.region.clone(),
        })
    }

    pub fn engine_infos(&self, ids: &[String]) -> Result<Vec<EngineInfo>, HarnessError> {
        ids.iter().map(|id| self.engine_info(id)).collect()
    }

    pub fn all_engine_ids(&self) -> Vec<String> {
        self.engines.iter().map(|e| e.id.clone()).collect()
    }

    pub fn centralized_local(&self) -> Option<&str> {
        self.roles.centralized_local.as_deref()
    }

    pub fn centralized_remote(&self) -> Option<&str> {
        self.roles.centralized_remote.as_deref()
    }

    pub fn centralized(&self) -> Option<&str> {
        self.roles
            .centralized
            .as_deref()
            .or(self.roles.centralized_local.as_deref())
    }

    /// Engine holding workflow inputs and partitioning in distributed runs.
    pub fn initiator(&self) -> &str {
        self.roles
            .initiator
            .as_deref()
            .or(self.centralized())
            .unwrap_or(&self.engines[0].id)
    }

    pub fn distributed_engines(&self) -> Vec<String> {
        self.roles
            .distributed
            .clone()
            .unwrap_or_else(|| self.all_engine_ids())
    }

    /// sample(engine, service) = model(region(engine), region(service)).
    pub fn qos_matrix(&self, engines: &[String]) -> Result<QosMatrix, HarnessError> {
        let mut m = QosMatrix::new(0.0);
        for e in engines {
            let loc = self.engine(e)?.location();
            for s in &self.services {
                m.insert(e, &s.id, self.model.qos(&loc, &s.location())?);
            }
        }
        Ok(m)
    }
}

fn region(name: &str, continent: &str) -> Region {
    Region {
        name: name.into(),
        continent: continent.into(),
    }
}

fn engine(id: &str, region: &str, zone: Option<&str>) -> EngineSpec {
    EngineSpec {
        id: id.into(),
        region: region.into(),
        zone: zone.map(String::from),
        url: None,
    }
}

const ZONES: [&str; 4] = ["a", "b", "c", "d"];

/// One region's four zones host the services in consecutive blocks, one
/// engine per zone. The local central engine sits in the same region
/// outside any zone; the remote one in another region of the continent.
pub fn continental(services: usize) -> TopologyConfig {
    let per = services.div_ceil(4).max(1);
    TopologyConfig {
        regions: vec![region("us-east-1", "north-america"), region("us-west-1", "north-america")],
        engines: [
            engine("e0", "us-east-1", None),
            engine("er", "us-west-1", None),
        ]
        .into_iter()
        .chain(ZONES.iter().map(|z| engine(&format!("e{z}"), "us-east-1", Some(z))))
        .collect(),
        services: (1..=services)
            .map(|i| ServiceSpec {
                id: format!("s{i}"),
                region: "us-east-1".into(),
                zone: Some(ZONES[((i - 1) / per).min(3)].into()),
            })
            .collect(),
        pair_qos: None,
        defaults: None,
        noise: None,
        roles: Roles {
            centralized_local: Some("e0".into()),
            centralized_remote: Some("er".into()),
            centralized: None,
            initiator: Some("e0".into()),
            distributed: Some(ZONES.iter().map(|z| format!("e{z}")).collect()),
        },
    }
}

pub const INTERCONTINENTAL_REGIONS: [(&str, &str); 4] = [
    ("us-east-1", "north-america"),
    ("us-west-1", "north-america"),
    ("us-west-2", "north-america"),
    ("eu-west-1", "europe"),
];

/// Four regions on two continents, services in consecutive blocks, one
/// engine co-located with each block and a central engine in the first region.
pub fn intercontinental(services: usize) -> TopologyConfig {
    let per = services.div_ceil(4).max(1);
    TopologyConfig {
        regions: INTERCONTINENTAL_REGIONS.iter().map(|(n, c)| region(n, c)).collect(),
        engines: std::iter::once(engine("e0", "us-east-1", None))
            .chain(
                INTERCONTINENTAL_REGIONS
                    .iter()
                    .enumerate()
                    .map(|(i, (r, _))| engine(&format!("e{}", i + 1), r, Some("a"))),
            )
            .collect(),
        services: (1..=services)
            .map(|i| ServiceSpec {
                id: format!("s{i}"),
                region: INTERCONTINENTAL_REGIONS[((i - 1) / per).min(3)].0.into(),
                zone: Some("a".into()),
            })
            .collect(),
        pair_qos: None,
        defaults: None,
        noise: None,
        roles: Roles {
            centralized_local: Some("e0".into()),
            centralized_remote: None,
            centralized: Some("e0".into()),
            initiator: Some("e0".into()),
            distributed: Some((1..=4).map(|i| format!("e{i}")).collect()),
        },
    }
}

/// A single engine and uniform QoS everywhere.
pub fn single_engine(services: usize, qos: QosSample) -> TopologyConfig {
    TopologyConfig {
        regions: vec![region("r", "c")],
        engines: vec![engine("e0", "r", None)],
        services: (1..=services)
            .map(|i| ServiceSpec {
                id: format!("s{i}"),
                region: "r".into(),
                zone: None,
            })
            .collect(),
        pair_qos: Some(vec![PairQos {
            a: "r".into(),
            b: "r".into(),
            latency_s: qos.latency_s,
            bandwidth_mbps: qos.bandwidth_mbps,
        }]),
        defaults: None,
        noise: None,
        roles: Roles::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intercontinental_sixteen() {
        let t = build_topology(&intercontinental(16)).unwrap();
        assert_eq!(t.services.len(), 16);
        let per_region: BTreeSet<&str> = t.services.iter().map(|s| s.region.as_str()).collect();
        assert_eq!(per_region.len(), 4);
        let m = t.qos_matrix(&t.distributed_engines()).unwrap();
        assert_eq!(m.get("e1", "s1").unwrap(), NetworkDefaults::default().same_zone);
        assert_eq!(m.get("e1", "s16").unwrap(), NetworkDefaults::default().inter_continent);
        assert_eq!(m.get("e2", "s9").unwrap(), NetworkDefaults::default().intra_continent);
    }

    #[test]
    fn continental_local_fixture() {
        let t = build_topology(&continental(8)).unwrap();
        let m = t.qos_matrix(&["e0".to_string(), "er".to_string()]).unwrap();
        assert_eq!(m.get("e0", "s8").unwrap(), NetworkDefaults::default().intra_region);
        assert_eq!(m.get("er", "s1").unwrap(), NetworkDefaults::default().intra_continent);
        assert_eq!(t.service("s3").unwrap().zone.as_deref(), Some("b"));
    }

    #[test]
    fn undeclared_region_is_rejected() {
        let mut c = continental(4);
        c.engines.push(engine("x", "mars-1", None));
        assert_eq!(build_topology(&c).unwrap_err(), HarnessError::UnknownRegion("mars-1".into()));
    }

    #[test]
    fn explicit_table_names_missing_pair() {
        let mut c = single_engine(2, QosSample::new(0.01, 10.0).unwrap());
        c.regions.push(region("far", "c"));
        c.services[1].region = "far".into();
        let t = build_topology(&c).unwrap();
        assert_eq!(
            t.qos_matrix(&["e0".to_string()]).unwrap_err(),
            HarnessError::MissingQos {
                a: "r".into(),
                b: "far".into()
            }
        );
    }

    #[test]
    fn config_json_round_trip() {
        let c = intercontinental(8);
        let text = serde_json::to_string(&c).unwrap();
        let back: TopologyConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
