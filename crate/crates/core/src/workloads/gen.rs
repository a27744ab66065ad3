//! Seeded synthetic relations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AttributeValue, Relation};

const ALPHABET: &[u8] = b"0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// X(A, B) and Y(B, C) joined on B, keys drawn from a shared pool.
    #[default]
    Random,
    /// The three-tuple pair of relations of the small equijoin example.
    Figure2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    /// Tuples per relation.
    pub n: usize,
    /// Key size in bits.
    pub c_bits: u64,
    /// Tuple size in bits; each tuple has one non-key value of `w - c` bits.
    pub w_bits: u64,
    pub distinct_keys: usize,
    /// Zipf exponent of key frequencies; 0 is uniform.
    pub zipf_exponent: f64,
    /// Number of keys that take an extra half of all draws.
    pub heavy_hitters: usize,
    pub seed: u64,
    #[serde(default)]
    pub shape: Shape,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            n: 100,
            c_bits: 16,
            w_bits: 256,
            distinct_keys: 50,
            zipf_exponent: 0.0,
            heavy_hitters: 0,
            seed: 0,
            shape: Shape::Random,
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.shape == Shape::Figure2 {
            return if self.n == 3 {
                Ok(())
            } else {
                bad(format!("the figure-2 shape has exactly 3 tuples per relation, not {}", self.n))
            };
        }
        if self.c_bits == 0 || self.c_bits > self.w_bits {
            return bad(format!("need 0 < c <= w, got c = {}, w = {}", self.c_bits, self.w_bits));
        }
        if self.n > 0 && self.distinct_keys == 0 {
            return bad("at least one key is needed".into());
        }
        if self.heavy_hitters > self.distinct_keys {
            return bad("more heavy hitters than keys".into());
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad(format!("bad zipf exponent {}", self.zipf_exponent));
        }
        let len = key_len(self.c_bits);
        let room = (ALPHABET.len() as f64).powi(len as i32);
        if (self.distinct_keys as f64) > room {
            return bad(format!(
                "{} keys do not fit in {} characters",
                self.distinct_keys, len
            ));
        }
        Ok(())
    }
}

fn key_len(c_bits: u64) -> usize {
    c_bits.div_ceil(8).max(1) as usize
}

/// Fixed-width base-62 rendering of `i`.
fn key_text(mut i: usize, len: usize) -> String {
    let mut out = vec![ALPHABET[0]; len];
    for slot in out.iter_mut().rev() {
        *slot = ALPHABET[i % ALPHABET.len()];
        i /= ALPHABET.len();
    }
    String::from_utf8(out).expect("ascii")
}

/// Key indices drawn for `n` tuples.
pub fn draw_keys(spec: &GenSpec, rng: &mut impl Rng, n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let zipf = Zipf::new(spec.distinct_keys as f64, spec.zipf_exponent)
        .map_err(|e| Error::InvalidParameter(format!("zipf: {e}")))?;
    Ok((0..n)
        .map(|_| {
            if spec.heavy_hitters > 0 && rng.random_bool(0.5) {
                rng.random_range(0..spec.heavy_hitters)
            } else {
                (zipf.sample(rng) as usize).clamp(1, spec.distinct_keys) - 1
            }
        })
        .collect())
}

fn payload(rng: &mut impl Rng, bits: u64, tag: &str) -> AttributeValue {
    let len = bits.div_ceil(8) as usize;
    let mut text: Vec<u8> = tag.bytes().take(len).collect();
    while text.len() < len {
        text.push(ALPHABET[rng.random_range(0..ALPHABET.len())]);
    }
    AttributeValue::with_size_bits(text, bits)
}

/// Relations X(A, B) and Y(B, C) per `spec`, both at site `user`.
pub fn gen_relations(spec: &GenSpec) -> Result<Vec<Relation>> {
    spec.validate()?;
    if spec.shape == Shape::Figure2 {
        return figure2();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = key_len(spec.c_bits);
    let rest = spec.w_bits - spec.c_bits;
    let mut x = Relation::new("X", vec!["A".into(), "B".into()], "user")?;
    let mut y = Relation::new("Y", vec!["B".into(), "C".into()], "user")?;
    for (rel, tag, key_first) in [(&mut x, "a", false), (&mut y, "c", true)] {
        let keys = draw_keys(spec, &mut rng, spec.n)?;
        for (i, k) in keys.into_iter().enumerate() {
            let key = AttributeValue::with_size_bits(key_text(k, len), spec.c_bits);
            let other = payload(&mut rng, rest, &format!("{tag}{i}-"));
            rel.push(if key_first { vec![key, other] } else { vec![other, key] })?;
        }
    }
    Ok(vec![x, y])
}

/// Two keys shared by the relations, the first twice on each side, plus
/// one key on each side that finds no partner.
fn figure2() -> Result<Vec<Relation>> {
    let x_keys = [1, 1, 2];
    let y_keys = [1, 1, 3];
    let x = Relation::from_rows(
        "X",
        &["A", "B"],
        "user",
        x_keys.iter().enumerate().map(|(i, k)| [format!("a{}", i + 1), format!("b{k}")]),
    )?;
    let y = Relation::from_rows(
        "Y",
        &["B", "C"],
        "user",
        y_keys.iter().enumerate().map(|(i, k)| [format!("b{k}"), format!("c{}", i + 1)]),
    )?;
    Ok(vec![x, y])
}

/// A chain of `k` relations R1(K1, K2, P1), R2(K2, K3, P2), ... whose
/// neighbours share one key attribute; keys come from `distinct_keys`
/// values, each `c_bits` wide, and P holds the remaining `w - 2c` bits.
pub fn gen_chain(spec: &GenSpec, k: usize) -> Result<Vec<Relation>> {
    spec.validate()?;
    if spec.w_bits < 2 * spec.c_bits {
        return Err(Error::InvalidParameter("a chain tuple needs w >= 2c".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = key_len(spec.c_bits);
    let mut out = Vec::with_capacity(k);
    for i in 1..=k {
        let attrs = vec![format!("K{i}"), format!("K{}", i + 1), format!("P{i}")];
        let mut rel = Relation::new(format!("R{i}"), attrs, "user")?;
        let left = draw_keys(spec, &mut rng, spec.n)?;
        let right = draw_keys(spec, &mut rng, spec.n)?;
        for (j, (a, b)) in left.into_iter().zip(right).enumerate() {
            rel.push(vec![
                AttributeValue::with_size_bits(key_text(a, len), spec.c_bits),
                AttributeValue::with_size_bits(key_text(b, len), spec.c_bits),
                payload(&mut rng, spec.w_bits - 2 * spec.c_bits, &format!("p{i}.{j}-")),
            ])?;
        }
        out.push(rel);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tuple_size_bits;

    #[test]
    fn sizes_are_exact() {
        let spec = GenSpec {
            n: 20,
            c_bits: 12,
            w_bits: 100,
            ..Default::default()
        };
        for rel in gen_relations(&spec).unwrap() {
            for t in rel.tuples() {
                assert_eq!(tuple_size_bits(t), 100);
                assert_eq!(rel.value(t, "B").unwrap().size_bits(), 12);
            }
        }
    }

    #[test]
    fn same_seed_same_relations() {
        let spec = GenSpec {
            zipf_exponent: 1.2,
            heavy_hitters: 2,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(gen_relations(&spec).unwrap(), gen_relations(&spec).unwrap());
        let other = GenSpec { seed: 10, ..spec };
        assert_ne!(gen_relations(&other).unwrap(), gen_relations(&GenSpec { seed: 9, ..other.clone() }).unwrap());
    }

    #[test]
    fn empty_spec_gives_empty_relations() {
        let spec = GenSpec {
            n: 0,
            ..Default::default()
        };
        assert!(gen_relations(&spec).unwrap().iter().all(Relation::is_empty));
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let bad = [
            GenSpec { c_bits: 300, ..Default::default() },
            GenSpec { distinct_keys: 0, ..Default::default() },
            GenSpec { c_bits: 8, distinct_keys: 100, ..Default::default() },
            GenSpec { zipf_exponent: -1.0, ..Default::default() },
            GenSpec { shape: Shape::Figure2, n: 4, ..Default::default() },
        ];
        for s in bad {
            assert!(gen_relations(&s).is_err(), "{s:?}");
        }
    }

    #[test]
    fn key_text_is_fixed_width() {
        assert_eq!(key_text(0, 2), "00");
        assert_eq!(key_text(61, 2), "0z");
        assert_eq!(key_text(62, 2), "10");
    }
}
