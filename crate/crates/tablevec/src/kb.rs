//! Knowledge-base-backed entity similarity and candidate selection.
//!
//! Three scorers over a loaded knowledge base: relation-set similarity
//! (mean Jaccard of RDF relation keys against the seeds), the Wikipedia
//! Link-based Measure over outgoing links, and plain Jaccard of outgoing
//! links. All three return values in `[0, 1]` on every input.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::corpus::{CorpusIndex, EntityId};
use crate::error::{Error, Result};

/// Outgoing-link sets and RDF relation-key sets per entity, plus the global
/// entity count `N` used by the link-based measure.
///
/// Relation keys are opaque strings; the conventional encoding is one key per
/// triple predicate plus one `predicate|object` key.
pub struct KnowledgeBase {
    outlinks: HashMap<EntityId, BTreeSet<EntityId>>,
    relations: HashMap<EntityId, BTreeSet<String>>,
    n_entities: usize,
    /// Reverse of `outlinks`, for the candidate fallback path.
    inlinks: HashMap<EntityId, Vec<EntityId>>,
    skipped_lines: u64,
}

impl KnowledgeBase {
    pub fn from_parts(
        outlinks: HashMap<EntityId, BTreeSet<EntityId>>,
        relations: HashMap<EntityId, BTreeSet<String>>,
        n_entities: usize,
    ) -> Result<KnowledgeBase> {
        if n_entities < outlinks.len() {
            return Err(Error::Invalid(format!(
                "N = {n_entities} smaller than {} entities with outlinks",
                outlinks.len()
            )));
        }
        let mut inlinks: HashMap<EntityId, Vec<EntityId>> = HashMap::new();
        let mut sources: Vec<&EntityId> = outlinks.keys().collect();
        sources.sort();
        for source in sources {
            for target in &outlinks[source] {
                inlinks.entry(target.clone()).or_default().push(source.clone());
            }
        }
        Ok(KnowledgeBase {
            outlinks,
            relations,
            n_entities,
            inlinks,
            skipped_lines: 0,
        })
    }

    pub fn outlinks(&self, e: &EntityId) -> Option<&BTreeSet<EntityId>> {
        self.outlinks.get(e)
    }

    pub fn relations(&self, e: &EntityId) -> Option<&BTreeSet<String>> {
        self.relations.get(e)
    }

    /// Total number of distinct entities seen anywhere in the KB.
    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    /// Entities whose outlinks contain `target`, sorted.
    pub fn linking_to(&self, target: &EntityId) -> &[EntityId] {
        self.inlinks.get(target).map_or(&[], Vec::as_slice)
    }

    /// Non-blank lines that were not `entity<TAB>value` and had to be skipped.
    pub fn skipped_lines(&self) -> u64 {
        self.skipped_lines
    }

    /// Every entity id this KB has seen: link sources, link targets, and
    /// relation subjects.
    pub fn known_entities(&self) -> impl Iterator<Item = &EntityId> {
        self.outlinks
            .keys()
            .chain(self.inlinks.keys())
            .chain(self.relations.keys())
    }
}

fn load_pairs(
    path: &Path,
    mut consume: impl FnMut(EntityId, &str),
) -> Result<u64> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut skipped = 0u64;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match trimmed.split_once('\t') {
            Some((subject, value)) if !subject.is_empty() && !value.is_empty() => {
                let id = EntityId::new(subject).expect("checked non-empty");
                consume(id, value);
            }
            _ => skipped += 1,
        }
    }
    Ok(skipped)
}

/// Loads a knowledge base from two TSV files: `entity<TAB>target` per
/// outgoing link and `entity<TAB>relation_key` per relation. Blank lines are
/// skipped; `N` counts the distinct entities seen anywhere.
pub fn load_kb(outlinks_path: &Path, relations_path: &Path) -> Result<KnowledgeBase> {
    let mut outlinks: HashMap<EntityId, BTreeSet<EntityId>> = HashMap::new();
    let mut relations: HashMap<EntityId, BTreeSet<String>> = HashMap::new();
    let mut entities: HashSet<EntityId> = HashSet::new();

    let mut skipped = load_pairs(outlinks_path, |subject, target| {
        if let Some(target) = EntityId::new(target) {
            entities.insert(subject.clone());
            entities.insert(target.clone());
            outlinks.entry(subject).or_default().insert(target);
        }
    })?;
    skipped += load_pairs(relations_path, |subject, key| {
        entities.insert(subject.clone());
        relations.entry(subject).or_default().insert(key.to_string());
    })?;

    let mut kb = KnowledgeBase::from_parts(outlinks, relations, entities.len())?;
    kb.skipped_lines = skipped;
    Ok(kb)
}

fn intersection_size<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> usize {
    if a.len() > b.len() {
        return intersection_size(b, a);
    }
    a.iter().filter(|x| b.contains(x)).count()
}

fn jaccard<T: Ord>(a: Option<&BTreeSet<T>>, b: Option<&BTreeSet<T>>) -> f64 {
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => return 0.0,
    };
    let inter = intersection_size(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Wikipedia Link-based Measure: relatedness of two entities from the
/// overlap of their outgoing link sets,
/// `1 - (log max(|A|,|B|) - log |A∩B|) / (log N - log min(|A|,|B|))`,
/// clamped to `[0, 1]`. Degenerate cases (either set empty, no overlap,
/// `N <= min`) return 0.
pub fn wlm(a: &EntityId, b: &EntityId, kb: &KnowledgeBase) -> f64 {
    let (la, lb) = match (kb.outlinks(a), kb.outlinks(b)) {
        (Some(la), Some(lb)) if !la.is_empty() && !lb.is_empty() => (la, lb),
        _ => return 0.0,
    };
    let inter = intersection_size(la, lb);
    if inter == 0 {
        return 0.0;
    }
    let max = la.len().max(lb.len()) as f64;
    let min = la.len().min(lb.len()) as f64;
    let n = kb.n_entities() as f64;
    let denom = n.ln() - min.ln();
    if denom <= 0.0 {
        return 0.0;
    }
    let r = 1.0 - (max.ln() - (inter as f64).ln()) / denom;
    r.clamp(0.0, 1.0)
}

/// Jaccard similarity of the two entities' outgoing link sets.
pub fn jaccard_outlinks(a: &EntityId, b: &EntityId, kb: &KnowledgeBase) -> f64 {
    jaccard(kb.outlinks(a), kb.outlinks(b))
}

/// Mean Jaccard similarity between the relation keys of `e` and those of
/// each seed. Entities missing from the KB contribute 0.
pub fn relation_sim(e: &EntityId, seeds: &[EntityId], kb: &KnowledgeBase) -> f64 {
    if seeds.is_empty() {
        return 0.0;
    }
    let sum: f64 = seeds
        .iter()
        .map(|s| jaccard(kb.relations(e), kb.relations(s)))
        .sum();
    sum / seeds.len() as f64
}

/// Where a candidate entity came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Shares a table core column with at least one seed.
    TableCooccurrence,
    /// Shares at least one outgoing link with a seed (used only when the
    /// corpus yields nothing).
    KbFallback,
}

/// Candidate entities for row population; never contains a seed.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    entities: Vec<(EntityId, Provenance)>,
}

impl CandidateSet {
    pub fn entities(&self) -> impl Iterator<Item = &EntityId> {
        self.entities.iter().map(|(e, _)| e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(EntityId, Provenance)> {
        self.entities.iter()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Collects candidate entities for a seed set: the core-column entities of
/// every corpus table whose core column contains a seed; if that yields
/// nothing, entities sharing an outgoing link with a seed. Seeds are removed
/// and the result is truncated to `limit` by descending corpus frequency
/// (ties by entity id).
pub fn candidate_entities(
    seeds: &[EntityId],
    index: &CorpusIndex,
    kb: &KnowledgeBase,
    limit: usize,
) -> CandidateSet {
    let seed_set: HashSet<&EntityId> = seeds.iter().collect();

    let mut pool: BTreeMap<EntityId, Provenance> = BTreeMap::new();
    let mut table_ids: BTreeSet<usize> = BTreeSet::new();
    for seed in seeds {
        table_ids.extend(index.tables_with_core_entity(seed));
    }
    for idx in table_ids {
        for e in index.tables()[idx].core_entities() {
            if !seed_set.contains(e) {
                pool.entry(e.clone()).or_insert(Provenance::TableCooccurrence);
            }
        }
    }

    if pool.is_empty() {
        for seed in seeds {
            let Some(links) = kb.outlinks(seed) else { continue };
            for target in links {
                for e in kb.linking_to(target) {
                    if !seed_set.contains(e) {
                        pool.entry(e.clone()).or_insert(Provenance::KbFallback);
                    }
                }
            }
        }
    }

    let mut entities: Vec<(EntityId, Provenance)> = pool.into_iter().collect();
    entities.sort_by(|(a, _), (b, _)| {
        index
            .entity_frequency(b)
            .cmp(&index.entity_frequency(a))
            .then_with(|| a.cmp(b))
    });
    entities.truncate(limit);
    CandidateSet { entities }
}
