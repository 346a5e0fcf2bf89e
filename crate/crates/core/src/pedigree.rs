//! Pedigree ingestion and synthetic pedigree generation.
//!
//! File format: UTF-8 CSV with header `id,sire,dam`, one record per line,
//! unknown parent encoded as `0`. File order is processing order, and every
//! named parent must appear before its offspring.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Topologically ordered parent records. Positions are 0-based; ids are the
/// positive integers from the source file.
#[derive(Debug, Clone)]
pub struct Pedigree {
    ids: Vec<u32>,
    /// Parent positions (sire, dam); `None` = unknown.
    parents: Vec<[Option<usize>; 2]>,
    index: HashMap<u32, usize>,
}

impl Pedigree {
    /// Number of individuals `Z`.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Parent positions of the individual at `pos`.
    pub fn parents(&self) -> &[[Option<usize>; 2]] {
        &self.parents
    }

    /// Position of an id, if present.
    pub fn position(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Number of individuals with no known parent.
    pub fn founder_count(&self) -> usize {
        self.parents.iter().filter(|p| p[0].is_none() && p[1].is_none()).count()
    }

    /// Parse from CSV text. See the module docs for the format.
    pub fn parse(text: &str) -> Result<Pedigree> {
        let mut ids = Vec::new();
        let mut parents = Vec::new();
        let mut index = HashMap::new();
        let mut lines = text.lines().enumerate();

        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let header = header.trim_start_matches('\u{feff}').trim();
        if header != "id,sire,dam" {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `id,sire,dam`, got `{header}`"),
            });
        }

        for (lineno, raw) in lines {
            let line = lineno + 1; // 1-based for messages
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            let mut fields = row.split(',').map(str::trim);
            let mut next_u32 = |name: &str| -> Result<u32> {
                let f = fields.next().ok_or(Error::Parse {
                    line,
                    msg: format!("missing field `{name}`"),
                })?;
                f.parse::<u32>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("field `{name}`: `{f}` is not a nonnegative integer"),
                })
            };
            let id = next_u32("id")?;
            let sire = next_u32("sire")?;
            let dam = next_u32("dam")?;
            if fields.next().is_some() {
                return Err(Error::Parse {
                    line,
                    msg: "expected exactly three fields".into(),
                });
            }
            if id == 0 {
                return Err(Error::Parse {
                    line,
                    msg: "id must be positive (0 is the unknown-parent marker)".into(),
                });
            }
            if index.contains_key(&id) {
                return Err(Error::DuplicateId(id));
            }
            let resolve = |pid: u32| -> Result<Option<usize>> {
                if pid == 0 {
                    return Ok(None);
                }
                match index.get(&pid) {
                    Some(&pos) => Ok(Some(pos)),
                    None => Err(Error::Order {
                        child: id,
                        parent: pid,
                    }),
                }
            };
            let sp = resolve(sire)?;
            let dp = resolve(dam)?;
            index.insert(id, ids.len());
            ids.push(id);
            parents.push([sp, dp]);
        }

        Ok(Pedigree { ids, parents, index })
    }

    /// Serialize back to the CSV format written by `gen`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,sire,dam\n");
        for (pos, ps) in self.parents.iter().enumerate() {
            let sid = ps[0].map_or(0, |p| self.ids[p]);
            let did = ps[1].map_or(0, |p| self.ids[p]);
            out.push_str(&format!("{},{},{}\n", self.ids[pos], sid, did));
        }
        out
    }
}

/// Load and validate a pedigree file.
pub fn load_pedigree<P: AsRef<Path>>(path: P) -> Result<Pedigree> {
    let text = std::fs::read_to_string(path)?;
    Pedigree::parse(&text)
}

/// Generate a synthetic pedigree: `founders` unrelated individuals, then
/// `generations` rounds in which `floor(prev/2)` crosses of two parents from
/// the previous generation each produce `offspring_per_cross` children.
/// Deterministic for a fixed seed.
pub fn generate_pedigree(
    founders: usize,
    generations: usize,
    offspring_per_cross: usize,
    seed: u64,
) -> Pedigree {
    assert!(founders >= 2, "need at least two founders");
    assert!(offspring_per_cross >= 1, "need at least one offspring per cross");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut parents: Vec<[Option<usize>; 2]> = vec![[None, None]; founders];
    let mut prev: Vec<usize> = (0..founders).collect();

    for _ in 0..generations {
        let crosses = (prev.len() / 2).max(1);
        let mut current = Vec::new();
        for _ in 0..crosses {
            let (sire, dam) = if prev.len() >= 2 {
                let picks: Vec<usize> = prev.choose_multiple(&mut rng, 2).copied().collect();
                (picks[0], picks[1])
            } else {
                // single survivor: selfing
                (prev[0], prev[0])
            };
            for _ in 0..offspring_per_cross {
                current.push(parents.len());
                parents.push([Some(sire), Some(dam)]);
            }
        }
        prev = current;
    }

    let ids: Vec<u32> = (1..=parents.len() as u32).collect();
    let index = ids.iter().enumerate().map(|(pos, &id)| (id, pos)).collect();
    Pedigree { ids, parents, index }
}
