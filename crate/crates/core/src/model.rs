//! Relations, tuples, sites, and per-tuple metadata.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::{digest, Digest, HashConfig};

pub type TupleId = usize;
pub type SiteId = String;

/// An opaque attribute payload together with the size it is charged at.
///
/// Equality, ordering and hashing look at the payload bytes only; the size
/// is accounting information.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttributeValue {
    payload: Vec<u8>,
    size_bits: u64,
}

impl AttributeValue {
    pub fn new(payload: impl Into<Vec<u8>>) -> Self {
        let payload = payload.into();
        let size_bits = 8 * payload.len() as u64;
        Self { payload, size_bits }
    }

    /// A value whose charged size differs from its literal byte length.
    pub fn with_size_bits(payload: impl Into<Vec<u8>>, size_bits: u64) -> Self {
        Self {
            payload: payload.into(),
            size_bits,
        }
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn size_bits(&self) -> u64 {
        self.size_bits
    }

    pub fn as_text(&self) -> std::borrow::Cow<'_, str> {
        String::from_utf8_lossy(&self.payload)
    }
}

impl PartialEq for AttributeValue {
    fn eq(&self, other: &Self) -> bool {
        self.payload == other.payload
    }
}

impl Eq for AttributeValue {}

impl Hash for AttributeValue {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.payload.hash(state);
    }
}

impl PartialOrd for AttributeValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AttributeValue {
    fn cmp(&self, other: &Self) -> Ordering {
        self.payload.cmp(&other.payload)
    }
}

impl From<&str> for AttributeValue {
    fn from(s: &str) -> Self {
        Self::new(s.as_bytes())
    }
}

impl From<String> for AttributeValue {
    fn from(s: String) -> Self {
        Self::new(s.into_bytes())
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_text())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tuple {
    pub tuple_id: TupleId,
    pub values: Vec<AttributeValue>,
}

/// Sum of the charged sizes of every value in the tuple.
pub fn tuple_size_bits(t: &Tuple) -> u64 {
    t.values.iter().map(AttributeValue::size_bits).sum()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    name: String,
    attributes: Vec<String>,
    tuples: Vec<Tuple>,
    home_site: SiteId,
}

impl Relation {
    pub fn new(
        name: impl Into<String>,
        attributes: Vec<String>,
        home_site: impl Into<SiteId>,
    ) -> Result<Self> {
        let name = name.into();
        let mut seen = BTreeSet::new();
        for a in &attributes {
            if !seen.insert(a.as_str()) {
                return Err(Error::Schema(format!(
                    "attribute `{a}` repeated in relation `{name}`"
                )));
            }
        }
        Ok(Self {
            name,
            attributes,
            tuples: Vec::new(),
            home_site: home_site.into(),
        })
    }

    /// Builds a relation from rows of values, assigning tuple ids densely from 0.
    pub fn from_rows<I, R>(
        name: impl Into<String>,
        attributes: &[&str],
        home_site: impl Into<SiteId>,
        rows: I,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: Into<AttributeValue>,
    {
        let mut rel = Self::new(
            name,
            attributes.iter().map(|a| a.to_string()).collect(),
            home_site,
        )?;
        for row in rows {
            rel.push(row.into_iter().map(Into::into).collect())?;
        }
        Ok(rel)
    }

    pub fn push(&mut self, values: Vec<AttributeValue>) -> Result<TupleId> {
        if values.len() != self.attributes.len() {
            return Err(Error::Schema(format!(
                "relation `{}` has arity {} but a row has {} values",
                self.name,
                self.attributes.len(),
                values.len()
            )));
        }
        let tuple_id = self.tuples.len();
        self.tuples.push(Tuple { tuple_id, values });
        Ok(tuple_id)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn attributes(&self) -> &[String] {
        &self.attributes
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn home_site(&self) -> &str {
        &self.home_site
    }

    pub fn with_home_site(mut self, site: impl Into<SiteId>) -> Self {
        self.home_site = site.into();
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn tuple(&self, id: TupleId) -> Option<&Tuple> {
        self.tuples.get(id)
    }

    pub fn has_attribute(&self, attr: &str) -> bool {
        self.attributes.iter().any(|a| a == attr)
    }

    pub fn attribute_index(&self, attr: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| Error::UnknownAttribute {
                relation: self.name.clone(),
                attribute: attr.to_string(),
            })
    }

    pub fn value<'a>(&self, t: &'a Tuple, attr: &str) -> Result<&'a AttributeValue> {
        Ok(&t.values[self.attribute_index(attr)?])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteKind {
    User,
    ComputeCluster,
    GlobalCluster,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub site_id: SiteId,
    pub kind: SiteKind,
}

impl Site {
    pub fn new(site_id: impl Into<SiteId>, kind: SiteKind) -> Self {
        Self {
            site_id: site_id.into(),
            kind,
        }
    }
}

/// Where a tuple lives: the relation, its id within the relation, and the owning site.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Origin {
    pub relation: String,
    pub tuple_id: TupleId,
    pub site: SiteId,
}

impl Origin {
    pub fn key(&self) -> (String, TupleId) {
        (self.relation.clone(), self.tuple_id)
    }
}

/// The join-key part of a metadata record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeyMaterial {
    Literal(Vec<AttributeValue>),
    Digest(Vec<Digest>),
}

impl KeyMaterial {
    pub fn bits(&self) -> u64 {
        match self {
            KeyMaterial::Literal(vs) => vs.iter().map(AttributeValue::size_bits).sum(),
            KeyMaterial::Digest(ds) => ds.iter().map(|d| d.bits() as u64).sum(),
        }
    }

    pub fn is_digest(&self) -> bool {
        matches!(self, KeyMaterial::Digest(_))
    }

    /// Canonical byte encoding used for grouping and sorting.
    pub fn sort_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            KeyMaterial::Literal(vs) => {
                for v in vs {
                    encode_literal(&mut out, v);
                }
            }
            KeyMaterial::Digest(ds) => {
                for d in ds {
                    encode_digest(&mut out, d);
                }
            }
        }
        out
    }
}

pub(crate) fn encode_literal(out: &mut Vec<u8>, v: &AttributeValue) {
    out.push(0);
    out.extend_from_slice(&(v.payload().len() as u64).to_be_bytes());
    out.extend_from_slice(v.payload());
}

pub(crate) fn encode_digest(out: &mut Vec<u8>, d: &Digest) {
    out.push(1);
    out.extend_from_slice(&d.bits().to_be_bytes());
    out.extend_from_slice(&d.value().to_be_bytes());
}

/// The wire-level stand-in for a tuple: key material plus the sizes of the
/// non-key attributes. It never carries a non-key payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaRecord {
    pub origin: Origin,
    /// Key attribute names, in relation order, aligned with `key_material`.
    pub key_attrs: Vec<String>,
    pub key_material: KeyMaterial,
    pub size_descriptors: Vec<(String, u64)>,
    /// Size of the original tuple. Reducer capacity is enforced against it.
    pub original_bits: u64,
    pub wire_bits: u64,
}

/// Builds the metadata record for `t`.
///
/// With a digester the key attributes are replaced by digests; the original
/// key sizes then travel as extra size fields so that capacity can still be
/// checked in original bits. Every size field is charged `size_field_bits`.
pub fn make_meta(
    t: &Tuple,
    rel: &Relation,
    key_attrs: &[&str],
    digester: Option<&HashConfig>,
    size_field_bits: u64,
) -> Result<MetaRecord> {
    if rel.tuple(t.tuple_id).map(|own| own != t).unwrap_or(true) {
        return Err(Error::Schema(format!(
            "tuple {} does not belong to relation `{}`",
            t.tuple_id,
            rel.name()
        )));
    }
    let mut key_idx = Vec::with_capacity(key_attrs.len());
    for k in key_attrs {
        key_idx.push(rel.attribute_index(k)?);
    }
    key_idx.sort_unstable();
    key_idx.dedup();

    let key_attr_names: Vec<String> = key_idx.iter().map(|&i| rel.attributes()[i].clone()).collect();
    let key_values: Vec<AttributeValue> = key_idx.iter().map(|&i| t.values[i].clone()).collect();
    let key_material = match digester {
        None => KeyMaterial::Literal(key_values),
        Some(cfg) => KeyMaterial::Digest(key_values.iter().map(|v| digest(v, cfg)).collect()),
    };
    let size_descriptors: Vec<(String, u64)> = rel
        .attributes()
        .iter()
        .enumerate()
        .filter(|(i, _)| !key_idx.contains(i))
        .map(|(i, a)| (a.clone(), t.values[i].size_bits()))
        .collect();
    let size_fields = size_descriptors.len()
        + if key_material.is_digest() {
            key_idx.len()
        } else {
            0
        };
    let wire_bits = key_material.bits() + size_field_bits * size_fields as u64;
    Ok(MetaRecord {
        origin: Origin {
            relation: rel.name().to_string(),
            tuple_id: t.tuple_id,
            site: rel.home_site().to_string(),
        },
        key_attrs: key_attr_names,
        key_material,
        size_descriptors,
        original_bits: tuple_size_bits(t),
        wire_bits,
    })
}

/// How transfers are priced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostModel {
    /// Exact bit accounting. Each size descriptor costs `size_field_bits`.
    Bits { size_field_bits: u64 },
    /// Worked-example accounting: every tuple costs `per_tuple` units while
    /// metadata and call signals cost nothing.
    Units { per_tuple: u64 },
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::Bits { size_field_bits: 0 }
    }
}

impl CostModel {
    pub fn tuple_cost(&self, t: &Tuple) -> u64 {
        match *self {
            CostModel::Bits { .. } => tuple_size_bits(t),
            CostModel::Units { per_tuple } => per_tuple,
        }
    }

    pub fn meta_cost(&self, m: &MetaRecord) -> u64 {
        match self {
            CostModel::Bits { .. } => m.wire_bits,
            CostModel::Units { .. } => 0,
        }
    }

    pub fn signal_cost(&self) -> u64 {
        match self {
            CostModel::Bits { .. } => 1,
            CostModel::Units { .. } => 0,
        }
    }

    pub fn size_field_bits(&self) -> u64 {
        match *self {
            CostModel::Bits { size_field_bits } => size_field_bits,
            CostModel::Units { .. } => 0,
        }
    }

    pub fn unit_name(&self) -> &'static str {
        match self {
            CostModel::Bits { .. } => "bits",
            CostModel::Units { .. } => "units",
        }
    }
}

/// User-site index from an attribute value to the ids of tuples holding it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserIndex {
    relation: String,
    attribute: String,
    entries: BTreeMap<AttributeValue, Vec<TupleId>>,
}

impl UserIndex {
    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn attribute(&self) -> &str {
        &self.attribute
    }

    pub fn lookup(&self, key: &AttributeValue) -> &[TupleId] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, key: &AttributeValue, id: TupleId) -> bool {
        self.lookup(key).binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Removes one tuple from the index. Only useful for exercising integrity checks.
    pub fn forget(&mut self, key: &AttributeValue, id: TupleId) {
        if let Some(ids) = self.entries.get_mut(key) {
            ids.retain(|&x| x != id);
        }
    }
}

pub fn build_index(rel: &Relation, attr: &str) -> Result<UserIndex> {
    let idx = rel.attribute_index(attr)?;
    let mut entries: BTreeMap<AttributeValue, Vec<TupleId>> = BTreeMap::new();
    for t in rel.tuples() {
        entries.entry(t.values[idx].clone()).or_default().push(t.tuple_id);
    }
    Ok(UserIndex {
        relation: rel.name().to_string(),
        attribute: attr.to_string(),
        entries,
    })
}
