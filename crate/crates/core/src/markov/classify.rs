use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::geostats::haversine_km;
use crate::ingest::ContinentRules;
use crate::model::{
    Continent, Dataset, ParamTriple, Role, Satoshi, Side, UserGroup, GROUP_COUNT,
};

/// Role rule. Miner: some send of at least `val` and at most `tx_miner`
/// participations. Merchant: at least `tx_merch` participations. Otherwise
/// User. Miner wins when both apply.
pub fn role_for(max_sent: Option<Satoshi>, participations: u32, params: &ParamTriple) -> Role {
    if max_sent.is_some_and(|v| v >= params.val) && participations <= params.tx_miner {
        Role::Miner
    } else if participations >= params.tx_merch {
        Role::Merchant
    } else {
        Role::User
    }
}

/// Per-address facts that classification depends on, plus a compact view of
/// the records, computed once per dataset and reused for every parameter
/// triple.
#[derive(Debug, Clone)]
pub struct AddressProfiles {
    pub(crate) addresses: Vec<String>,
    /// Appearances as sender or receiver; a self-loop counts twice.
    pub(crate) participations: Vec<u32>,
    pub(crate) max_sent: Vec<Option<Satoshi>>,
    /// `None` for addresses whose modal location is in an unsupported region.
    pub(crate) continent: Vec<Option<Continent>>,
    /// `[sender, receiver]` address indices per record.
    pub(crate) ends: Vec<[u32; 2]>,
    pub(crate) distances: Vec<f64>,
    /// Record indices ordered by (distance, index).
    pub(crate) by_distance: Vec<u32>,
}

impl AddressProfiles {
    pub fn new(ds: &Dataset) -> Self {
        AddressProfiles::with_rules(ds, &ContinentRules::default())
    }

    pub fn with_rules(ds: &Dataset, rules: &ContinentRules) -> Self {
        let index = ds.address_index();
        let mut id_of: HashMap<&str, u32> = HashMap::with_capacity(index.len());
        let mut addresses = Vec::with_capacity(index.len());
        let mut participations = Vec::with_capacity(index.len());
        let mut max_sent = Vec::with_capacity(index.len());
        let mut continent = Vec::with_capacity(index.len());
        for (i, (addr, parts)) in index.iter().enumerate() {
            id_of.insert(addr.as_str(), i as u32);
            addresses.push(addr.clone());
            participations.push(parts.len() as u32);
            let mut sent: Option<Satoshi> = None;
            // (count, last appearance) per exact coordinate.
            let mut seen: HashMap<(u64, u64), (u32, usize)> = HashMap::new();
            let mut modal = None;
            let mut best = (0u32, 0usize);
            for (k, p) in parts.iter().enumerate() {
                let rec = &ds.records()[p.record];
                let ep = match p.side {
                    Side::Sender => {
                        sent = sent.max(Some(rec.value));
                        &rec.sender
                    }
                    Side::Receiver => &rec.receiver,
                };
                let e = seen.entry(ep.geo.key()).or_insert((0, 0));
                e.0 += 1;
                e.1 = k;
                if (e.0, e.1) >= best {
                    best = (e.0, e.1);
                    modal = Some(ep.geo);
                }
            }
            max_sent.push(sent);
            continent.push(modal.and_then(|g| rules.assign(&g).ok()));
        }
        let ends: Vec<[u32; 2]> = ds
            .records()
            .iter()
            .map(|r| {
                [
                    id_of[r.sender.address_id.as_str()],
                    id_of[r.receiver.address_id.as_str()],
                ]
            })
            .collect();
        let distances: Vec<f64> = ds
            .records()
            .iter()
            .map(|r| haversine_km(&r.sender.geo, &r.receiver.geo))
            .collect();
        let mut by_distance: Vec<u32> = (0..distances.len() as u32).collect();
        by_distance.sort_by(|&a, &b| {
            distances[a as usize]
                .total_cmp(&distances[b as usize])
                .then(a.cmp(&b))
        });
        AddressProfiles {
            addresses,
            participations,
            max_sent,
            continent,
            ends,
            distances,
            by_distance,
        }
    }

    pub fn address_count(&self) -> usize {
        self.addresses.len()
    }

    pub fn record_count(&self) -> usize {
        self.ends.len()
    }

    /// Group of every address (in address order) under `params`.
    pub fn groups(&self, params: &ParamTriple) -> Vec<Option<UserGroup>> {
        (0..self.addresses.len())
            .map(|i| {
                self.continent[i].map(|c| {
                    UserGroup::new(role_for(self.max_sent[i], self.participations[i], params), c)
                })
            })
            .collect()
    }

    /// All record distances, ascending.
    pub fn sorted_distances(&self) -> Vec<f64> {
        self.by_distance
            .iter()
            .map(|&i| self.distances[i as usize])
            .collect()
    }

    pub fn classify(&self, params: ParamTriple) -> Classification {
        let groups = self.groups(&params);
        let mut assignment = BTreeMap::new();
        let mut unassigned = Vec::new();
        for (addr, g) in self.addresses.iter().zip(groups) {
            match g {
                Some(g) => {
                    assignment.insert(addr.clone(), g);
                }
                None => unassigned.push(addr.clone()),
            }
        }
        Classification {
            params,
            assignment,
            unassigned,
        }
    }
}

/// Address to group map for one parameter triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub params: ParamTriple,
    pub assignment: BTreeMap<String, UserGroup>,
    /// Addresses located in an unsupported region, left out of the model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unassigned: Vec<String>,
}

impl Classification {
    pub fn group_of(&self, address: &str) -> Option<UserGroup> {
        self.assignment.get(address).copied()
    }

    /// Address count per group, in group order.
    pub fn group_sizes(&self) -> [usize; GROUP_COUNT] {
        let mut sizes = [0; GROUP_COUNT];
        for g in self.assignment.values() {
            sizes[g.index()] += 1;
        }
        sizes
    }

    pub fn role_count(&self, role: Role) -> usize {
        self.assignment.values().filter(|g| g.role == role).count()
    }
}

pub fn classify(ds: &Dataset, params: ParamTriple) -> Classification {
    AddressProfiles::new(ds).classify(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{endpoint, record, simple};

    fn params() -> ParamTriple {
        ParamTriple::from_btc(15.0, 50, 120).unwrap()
    }

    #[test]
    fn miner_merchant_user() {
        let p = params();
        assert_eq!(role_for(Some(Satoshi::from_btc(25.0).unwrap()), 3, &p), Role::Miner);
        assert_eq!(role_for(Some(Satoshi::from_btc(1.0).unwrap()), 200, &p), Role::Merchant);
        assert_eq!(role_for(None, 200, &p), Role::Merchant);
        assert_eq!(role_for(Some(Satoshi::from_btc(1.0).unwrap()), 10, &p), Role::User);
        assert_eq!(role_for(Some(Satoshi::from_btc(15.0).unwrap()), 50, &p), Role::Miner);
        assert_eq!(role_for(Some(Satoshi::from_btc(15.0).unwrap()), 51, &p), Role::User);
        // Overlapping thresholds: Miner takes precedence.
        let odd = ParamTriple::from_btc(15.0, 200, 100).unwrap();
        assert_eq!(role_for(Some(Satoshi::from_btc(20.0).unwrap()), 150, &odd), Role::Miner);
    }

    #[test]
    fn self_loop_counts_twice() {
        let ds = Dataset::build(vec![simple("t", 1, "a", "a")]).unwrap();
        let prof = AddressProfiles::new(&ds);
        assert_eq!(prof.participations, vec![2]);
    }

    #[test]
    fn modal_location_with_recent_tiebreak() {
        let ny = |a: &str| endpoint(a, 40.71, -74.01, Some("US"));
        let be = |a: &str| endpoint(a, 52.52, 13.40, Some("DE"));
        let ds = Dataset::build(vec![
            record("t1", 1, 1.0, ny("x"), ny("y")),
            record("t2", 2, 1.0, be("x"), ny("y")),
            record("t3", 3, 1.0, be("x"), ny("y")),
            record("t4", 4, 1.0, ny("z"), ny("y")),
            record("t5", 5, 1.0, be("z"), ny("y")),
        ])
        .unwrap();
        let cls = classify(&ds, params());
        assert_eq!(cls.group_of("x").unwrap().continent, Continent::Eu);
        assert_eq!(cls.group_of("z").unwrap().continent, Continent::Eu);
        assert_eq!(cls.group_of("y").unwrap().continent, Continent::Am);
    }

    #[test]
    fn unsupported_region_addresses_left_out() {
        let ds = Dataset::build(vec![record(
            "t",
            1,
            1.0,
            endpoint("k", -4.32, 15.31, Some("CD")),
            endpoint("n", 40.71, -74.01, None),
        )])
        .unwrap();
        let cls = classify(&ds, params());
        assert_eq!(cls.unassigned, vec!["k".to_string()]);
        assert_eq!(cls.assignment.len(), 1);
    }

    #[test]
    fn high_val_eliminates_miners() {
        let recs: Vec<_> = (0..30)
            .map(|i| {
                let mut r = simple(&format!("t{i}"), i, &format!("a{}", i % 4), &format!("b{}", i % 7));
                r.value = Satoshi::from_btc(f64::from(i as u32)).unwrap();
                r
            })
            .collect();
        let ds = Dataset::build(recs).unwrap();
        let prof = AddressProfiles::new(&ds);
        let low = prof.classify(ParamTriple::from_btc(1.0, 50, 120).unwrap());
        assert!(low.role_count(Role::Miner) > 0);
        let high = prof.classify(ParamTriple::from_btc(30.0, 50, 120).unwrap());
        assert_eq!(high.role_count(Role::Miner), 0);
    }
}
