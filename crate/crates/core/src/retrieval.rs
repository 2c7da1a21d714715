//! Exhaustive cross-modal retrieval and NDCG@k scoring against
//! ontology relevance.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ontology::{Ontology, RelevanceConfig, RelevanceScorer};
use crate::store::{EmbeddingMatrix, EmbeddingStore};
use crate::translation::cosine_distance;

/// Retrieved list length.
pub const DEFAULT_K: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// The `k` candidates closest to `query` by cosine distance, ascending;
/// equal distances keep the lower index first. `k` is clamped to the pool.
pub fn retrieve_top_k(query: &[f32], candidates: &EmbeddingMatrix, k: usize) -> Result<Vec<Neighbor>> {
    if query.len() != candidates.dim() {
        return Err(Error::DimMismatch {
            expected: candidates.dim(),
            actual: query.len(),
        });
    }
    let mut all: Vec<Neighbor> = candidates
        .rows()
        .enumerate()
        .map(|(index, row)| Neighbor {
            index,
            distance: cosine_distance(query, row),
        })
        .collect();
    let order = |a: &Neighbor, b: &Neighbor| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index));
    let k = k.min(all.len());
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, order);
        all.truncate(k);
    }
    all.sort_unstable_by(order);
    Ok(all)
}

fn dcg(relevances: impl Iterator<Item = i64>) -> f64 {
    relevances
        .enumerate()
        .map(|(i, rel)| rel as f64 / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG over the first `k` ranked relevances, normalized by the best
/// achievable ordering of `ideal_pool`. `None` when the pool has no gain.
pub fn ndcg_at_k(ranked: &[i64], ideal_pool: &[i64], k: usize) -> Result<Option<f64>> {
    if let Some(bad) = ranked.iter().chain(ideal_pool).find(|&&r| r < 0) {
        return Err(Error::Domain(format!("negative relevance {bad}")));
    }
    let mut ideal = ideal_pool.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(ideal.into_iter().take(k));
    if idcg == 0.0 {
        return Ok(None);
    }
    Ok(Some(dcg(ranked.iter().copied().take(k)) / idcg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    AudioToImage,
    ImageToAudio,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::AudioToImage => "audio_to_image",
            Direction::ImageToAudio => "image_to_audio",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub candidate_ids: Vec<String>,
    pub distances: Vec<f64>,
    pub relevances: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub query_id: String,
    /// `None` for skipped queries (no relevant candidate in the pool).
    pub ndcg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgReport {
    pub direction: Direction,
    pub queries: Vec<QueryScore>,
    /// Mean over non-skipped queries; 0 when every query was skipped.
    pub mean_ndcg: f64,
    pub skipped: usize,
}

impl NdcgReport {
    fn from_scores(direction: Direction, queries: Vec<QueryScore>) -> Self {
        let (mut sum, mut scored) = (0.0, 0usize);
        for q in &queries {
            if let Some(v) = q.ndcg {
                sum += v;
                scored += 1;
            }
        }
        let skipped = queries.len() - scored;
        Self {
            direction,
            queries,
            mean_ndcg: if scored == 0 { 0.0 } else { sum / scored as f64 },
            skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossModalReport {
    pub audio_to_image: NdcgReport,
    pub image_to_audio: NdcgReport,
}

impl CrossModalReport {
    pub fn reports(&self) -> [&NdcgReport; 2] {
        [&self.audio_to_image, &self.image_to_audio]
    }
}

/// Interned label sets, so relevance is computed once per distinct pair.
struct LabelSets {
    ids: Vec<usize>,
    sets: Vec<Vec<String>>,
}

impl LabelSets {
    fn new(store: &EmbeddingStore) -> Self {
        let mut index: HashMap<Vec<String>, usize> = HashMap::new();
        let mut sets = Vec::new();
        let ids = store
            .metas()
            .iter()
            .map(|m| {
                let mut key = m.labels.clone();
                key.sort();
                key.dedup();
                *index.entry(key.clone()).or_insert_with(|| {
                    sets.push(key);
                    sets.len() - 1
                })
            })
            .collect();
        Self { ids, sets }
    }
}

/// Relevance of every distinct query label set against every distinct candidate set.
fn relevance_table(scorer: &RelevanceScorer<'_>, queries: &LabelSets, pool: &LabelSets) -> Result<Vec<Vec<u32>>> {
    queries
        .sets
        .iter()
        .map(|q| pool.sets.iter().map(|c| scorer.score(q, c)).collect())
        .collect()
}

enum Ranking {
    Nearest,
    Shuffled(u64),
}

fn evaluate_direction(
    direction: Direction,
    source: &EmbeddingStore,
    target: &EmbeddingStore,
    scorer: &RelevanceScorer<'_>,
    k: usize,
    ranking: &Ranking,
) -> Result<NdcgReport> {
    let source_sets = LabelSets::new(source);
    let target_sets = LabelSets::new(target);
    let table = relevance_table(scorer, &source_sets, &target_sets)?;

    let scores: Vec<QueryScore> = (0..source.len())
        .into_par_iter()
        .map(|q| -> Result<QueryScore> {
            let rel_row = &table[source_sets.ids[q]];
            let pool: Vec<i64> = target_sets.ids.iter().map(|&s| rel_row[s] as i64).collect();
            let ranked: Vec<i64> = match ranking {
                Ranking::Nearest => retrieve_top_k(source.row(q), target.matrix(), k)?
                    .iter()
                    .map(|n| pool[n.index])
                    .collect(),
                Ranking::Shuffled(seed) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(q as u64));
                    let mut order: Vec<usize> = (0..target.len()).collect();
                    order.shuffle(&mut rng);
                    order.iter().take(k).map(|&i| pool[i]).collect()
                }
            };
            Ok(QueryScore {
                query_id: source.meta(q).sample_id.clone(),
                ndcg: ndcg_at_k(&ranked, &pool, k)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(NdcgReport::from_scores(direction, scores))
}

fn evaluate_both(
    audio: &EmbeddingStore,
    image: &EmbeddingStore,
    ontology: &Ontology,
    cfg: &RelevanceConfig,
    k: usize,
    ranking: Ranking,
) -> Result<CrossModalReport> {
    // A random ranking never compares vectors.
    if matches!(ranking, Ranking::Nearest) && audio.dim() != image.dim() {
        return Err(Error::DimMismatch {
            expected: audio.dim(),
            actual: image.dim(),
        });
    }
    let scorer = RelevanceScorer::new(ontology, cfg)?;
    Ok(CrossModalReport {
        audio_to_image: evaluate_direction(Direction::AudioToImage, audio, image, &scorer, k, &ranking)?,
        image_to_audio: evaluate_direction(Direction::ImageToAudio, image, audio, &scorer, k, &ranking)?,
    })
}

/// Every record of each store queries the whole other store.
pub fn cross_modal_eval(
    audio: &EmbeddingStore,
    image: &EmbeddingStore,
    ontology: &Ontology,
    cfg: &RelevanceConfig,
    k: usize,
) -> Result<CrossModalReport> {
    evaluate_both(audio, image, ontology, cfg, k, Ranking::Nearest)
}

/// Same scoring, but each query's list is the first `k` items of a seeded
/// random permutation of the pool.
pub fn random_baseline_eval(
    audio: &EmbeddingStore,
    image: &EmbeddingStore,
    ontology: &Ontology,
    cfg: &RelevanceConfig,
    k: usize,
    seed: u64,
) -> Result<CrossModalReport> {
    evaluate_both(audio, image, ontology, cfg, k, Ranking::Shuffled(seed))
}

/// Full ranked list for one query, with relevances.
pub fn ranked_list(
    query: usize,
    source: &EmbeddingStore,
    target: &EmbeddingStore,
    scorer: &RelevanceScorer<'_>,
    k: usize,
) -> Result<RankedList> {
    let hits = retrieve_top_k(source.row(query), target.matrix(), k)?;
    let labels = &source.meta(query).labels;
    let mut relevances = Vec::with_capacity(hits.len());
    for hit in &hits {
        relevances.push(scorer.score(labels, &target.meta(hit.index).labels)?);
    }
    Ok(RankedList {
        query_id: source.meta(query).sample_id.clone(),
        candidate_ids: hits.iter().map(|h| target.meta(h.index).sample_id.clone()).collect(),
        distances: hits.iter().map(|h| h.distance).collect(),
        relevances,
    })
}

#[derive(Serialize)]
struct ReportRow<'a> {
    direction: &'a str,
    query_id: &'a str,
    ndcg: Option<f64>,
    skipped: usize,
}

/// `direction,query_id,ndcg,skipped`; each direction ends with a `__mean__`
/// row holding the mean NDCG and the skipped count.
pub fn write_report_csv(reports: &[&NdcgReport], path: impl AsRef<Path>) -> Result<()> {
    let mut out = csv::Writer::from_path(path)?;
    for report in reports {
        for q in &report.queries {
            out.serialize(ReportRow {
                direction: report.direction.as_str(),
                query_id: &q.query_id,
                ndcg: q.ndcg,
                skipped: usize::from(q.ndcg.is_none()),
            })?;
        }
        out.serialize(ReportRow {
            direction: report.direction.as_str(),
            query_id: "__mean__",
            ndcg: Some(report.mean_ndcg),
            skipped: report.skipped,
        })?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
