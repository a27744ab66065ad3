//! Rows flowing between rounds and the table of tuples they refer to.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hashing::HashConfig;
use crate::model::{
    encode_digest, encode_literal, make_meta, AttributeValue, CostModel, KeyMaterial, MetaRecord,
    Origin, Relation, SiteId, Tuple,
};

use super::Mode;

/// Index into [`Registry::entries`]. Ordered like `(relation name, tuple id)`.
pub(crate) type Gid = u32;

pub(crate) struct Entry<'a> {
    pub origin: Origin,
    pub relation: &'a Relation,
    pub tuple: &'a Tuple,
    pub data_cost: u64,
    pub meta_cost: u64,
    pub meta: MetaRecord,
}

/// Every input tuple of a job, with its metadata record and prices.
pub(crate) struct Registry<'a> {
    pub entries: Vec<Entry<'a>>,
    relations: BTreeMap<String, (&'a Relation, Gid)>,
    pub key_attrs: BTreeMap<String, Vec<String>>,
    pub distinct_keys: u64,
}

impl<'a> Registry<'a> {
    /// `inputs` pairs each relation with the site its tuples live at.
    pub fn build(
        inputs: &[(&'a Relation, SiteId)],
        key_attrs: &BTreeMap<String, Vec<String>>,
        digester: Option<&HashConfig>,
        cost: &CostModel,
    ) -> Result<Self> {
        let mut sorted: Vec<&(&Relation, SiteId)> = inputs.iter().collect();
        sorted.sort_by(|a, b| a.0.name().cmp(b.0.name()));
        for pair in sorted.windows(2) {
            if pair[0].0.name() == pair[1].0.name() {
                return Err(Error::Schema(format!(
                    "relation `{}` appears twice",
                    pair[0].0.name()
                )));
            }
        }
        let mut entries = Vec::new();
        let mut relations = BTreeMap::new();
        let mut keys_used = BTreeMap::new();
        let mut distinct: BTreeSet<&AttributeValue> = BTreeSet::new();
        for (rel, site) in sorted {
            let keys: Vec<String> = key_attrs.get(rel.name()).cloned().unwrap_or_default();
            let key_refs: Vec<&str> = keys.iter().map(String::as_str).collect();
            let key_idx: Vec<usize> = key_refs
                .iter()
                .map(|k| rel.attribute_index(k))
                .collect::<Result<_>>()?;
            let first = u32::try_from(entries.len())
                .map_err(|_| Error::InvalidParameter("too many tuples".into()))?;
            relations.insert(rel.name().to_string(), (*rel, first));
            for t in rel.tuples() {
                let mut meta = make_meta(t, rel, &key_refs, digester, cost.size_field_bits())?;
                meta.origin.site = site.clone();
                for &i in &key_idx {
                    distinct.insert(&t.values[i]);
                }
                entries.push(Entry {
                    origin: meta.origin.clone(),
                    relation: rel,
                    tuple: t,
                    data_cost: cost.tuple_cost(t),
                    meta_cost: cost.meta_cost(&meta),
                    meta,
                });
            }
            keys_used.insert(rel.name().to_string(), keys);
        }
        Ok(Self {
            entries,
            relations,
            key_attrs: keys_used,
            distinct_keys: distinct.len() as u64,
        })
    }

    pub fn relation(&self, name: &str) -> Result<(&'a Relation, Gid)> {
        self.relations
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("unknown relation `{name}`")))
    }

    pub fn relations(&self) -> impl Iterator<Item = &'a Relation> + '_ {
        self.relations.values().map(|(r, _)| *r)
    }

    pub fn entry(&self, gid: Gid) -> &Entry<'a> {
        &self.entries[gid as usize]
    }

    /// Rows of a base relation, one per tuple, in tuple-id order.
    pub fn base_dataset(&self, name: &str, mode: Mode, site: &str) -> Result<Dataset> {
        let (rel, first) = self.relation(name)?;
        let attributes: Vec<Attr> = rel.attributes().iter().map(|a| Attr::from(a.as_str())).collect();
        let mut rows = Vec::with_capacity(rel.len());
        for (i, t) in rel.tuples().iter().enumerate() {
            let gid = first + i as Gid;
            let meta = &self.entry(gid).meta;
            let fields = rel
                .attributes()
                .iter()
                .enumerate()
                .map(|(col, attr)| Field {
                    source: gid,
                    key: match mode {
                        Mode::Classic => {
                            let mut b = Vec::new();
                            encode_literal(&mut b, &t.values[col]);
                            Some(Arc::from(b))
                        }
                        Mode::Meta => meta_key_bytes(meta, attr).map(Arc::from),
                    },
                })
                .collect();
            rows.push(Row {
                constituents: vec![gid],
                fields,
            });
        }
        Ok(Dataset {
            attributes,
            rows,
            site: site.to_string(),
        })
    }
}

fn meta_key_bytes(meta: &MetaRecord, attr: &str) -> Option<Vec<u8>> {
    let pos = meta.key_attrs.iter().position(|a| a == attr)?;
    let mut b = Vec::new();
    match &meta.key_material {
        KeyMaterial::Literal(vs) => encode_literal(&mut b, &vs[pos]),
        KeyMaterial::Digest(ds) => encode_digest(&mut b, &ds[pos]),
    }
    Some(b)
}

pub(crate) type Attr = Arc<str>;

/// One attribute of a row: the tuple it comes from and, when the pipeline
/// can see it, its matching bytes (a literal or a digest encoding).
#[derive(Clone, Debug)]
pub(crate) struct Field {
    pub source: Gid,
    pub key: Option<Arc<[u8]>>,
}

/// A base tuple or an intermediate join result, referring to the tuples it was built from.
#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub constituents: Vec<Gid>,
    pub fields: Vec<Field>,
}

#[derive(Clone, Debug)]
pub(crate) struct Dataset {
    pub attributes: Vec<Attr>,
    pub rows: Vec<Row>,
    pub site: SiteId,
}

impl Dataset {
    pub fn column(&self, attr: &str) -> Option<usize> {
        self.attributes.iter().position(|a| &**a == attr)
    }

    /// Distinct tuples referenced by any row.
    pub fn distinct_constituents(&self) -> Vec<Gid> {
        let mut all: Vec<Gid> = self.rows.iter().flat_map(|r| r.constituents.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}
