use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Relation, Site, SiteId, SiteKind};

/// Where relations live and which cluster, if any, merges partial outputs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub sites: Vec<Site>,
    pub placement: BTreeMap<String, SiteId>,
    pub global_site: Option<SiteId>,
}

impl Topology {
    /// Each relation at its own home site, all of them user sites, plus one compute cluster.
    pub fn single_site<'a>(relations: impl IntoIterator<Item = &'a Relation>) -> Self {
        let mut sites: Vec<Site> = Vec::new();
        let mut placement = BTreeMap::new();
        for r in relations {
            if !sites.iter().any(|s| s.site_id == r.home_site()) {
                sites.push(Site::new(r.home_site(), SiteKind::User));
            }
            placement.insert(r.name().to_string(), r.home_site().to_string());
        }
        if !sites.iter().any(|s| s.site_id == "compute") {
            sites.push(Site::new("compute", SiteKind::ComputeCluster));
        }
        Self {
            sites,
            placement,
            global_site: None,
        }
    }

    /// One compute cluster per entry holding the listed relations; `global` merges.
    pub fn clusters(clusters: &[(&str, Vec<&str>)], global: &str) -> Self {
        let mut sites = Vec::new();
        let mut placement = BTreeMap::new();
        for (site, rels) in clusters {
            let kind = if *site == global {
                SiteKind::GlobalCluster
            } else {
                SiteKind::ComputeCluster
            };
            sites.push(Site::new(*site, kind));
            for r in rels {
                placement.insert(r.to_string(), site.to_string());
            }
        }
        Self {
            sites,
            placement,
            global_site: Some(global.to_string()),
        }
    }

    pub fn site_of(&self, relation: &str) -> Option<&str> {
        self.placement.get(relation).map(String::as_str)
    }

    pub fn validate<'a>(&self, relations: impl IntoIterator<Item = &'a Relation>) -> Result<()> {
        let mut ids = BTreeSet::new();
        for s in &self.sites {
            if !ids.insert(s.site_id.as_str()) {
                return Err(Error::Config(format!("site `{}` is declared twice", s.site_id)));
            }
        }
        for (rel, site) in &self.placement {
            if !ids.contains(site.as_str()) {
                return Err(Error::Config(format!("relation `{rel}` is placed at unknown site `{site}`")));
            }
        }
        if let Some(g) = &self.global_site {
            if !ids.contains(g.as_str()) {
                return Err(Error::Config(format!("global site `{g}` is not declared")));
            }
        }
        for r in relations {
            if !self.placement.contains_key(r.name()) {
                return Err(Error::Config(format!("relation `{}` has no placement", r.name())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unplaced_relation_is_rejected() {
        let r = Relation::from_rows("R", &["A"], "u", [["x"]]).unwrap();
        let t = Topology::clusters(&[("C1", vec!["S"])], "C1");
        assert!(t.validate([&r]).is_err());
        assert!(Topology::single_site([&r]).validate([&r]).is_ok());
    }

    #[test]
    fn duplicate_sites_are_rejected() {
        let mut t = Topology::clusters(&[("C1", vec![]), ("C2", vec![])], "C2");
        t.sites.push(Site::new("C1", SiteKind::User));
        assert!(t.validate([]).is_err());
    }
}
