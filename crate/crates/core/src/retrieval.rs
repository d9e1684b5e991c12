//! Matching subplots to sampled frames by embedding similarity, under the
//! spacing, temporal-partition and no-text constraints.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{AdapterClient, DetectText, EmbedImages, EmbedTexts};
use crate::mediaio::{FrameRecord, Interval};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConstraints {
    pub min_sep_s: f64,
    /// Fraction of subplots (and of the timeline) given to the early partition.
    pub partition_frac: f64,
    pub ocr_conf_threshold: f64,
    /// Minimum region area, as a fraction of the frame, that counts as text.
    pub ocr_min_area_frac: f64,
}

impl SelectionConstraints {
    pub fn for_duration(duration_s: f64) -> Self {
        SelectionConstraints {
            min_sep_s: 0.015 * duration_s,
            partition_frac: 0.4,
            ocr_conf_threshold: 0.4,
            ocr_min_area_frac: 0.002,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_sep_s > 0.0) {
            return Err(Error::config("min_sep_s", "min_sep_s must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.partition_frac) {
            return Err(Error::config("partition_frac", "partition_frac must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Number of leading subplots searched in the early partition.
    pub fn early_count(&self, n_subplots: usize) -> usize {
        // ceil without float drift on exact products such as 0.4 * 10
        let x = self.partition_frac * n_subplots as f64;
        let r = x.round();
        if (x - r).abs() < 1e-9 { r as usize } else { x.ceil() as usize }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubplotAssignment {
    pub subplot_index: usize,
    pub frame: FrameRecord,
    pub similarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooClose,
    HasText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub frame_index: usize,
    pub timestamp_s: f64,
    pub similarity: f64,
    pub reason: RejectReason,
}

/// Per-subplot trail of what was tried before the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubplotAudit {
    pub subplot_index: usize,
    pub early_partition: bool,
    pub chosen: Option<SubplotAssignment>,
    pub rejected: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Selection {
    pub assignments: Vec<SubplotAssignment>,
    pub audits: Vec<SubplotAudit>,
}

pub trait TextDetector {
    fn has_text(&self, frame: &FrameRecord) -> Result<bool>;
}

/// Text detection through an `ocr` adapter.
pub struct OcrDetector<'a> {
    pub client: &'a AdapterClient,
    pub conf_threshold: f64,
    pub min_area_frac: f64,
}

impl TextDetector for OcrDetector<'_> {
    fn has_text(&self, frame: &FrameRecord) -> Result<bool> {
        let r = self.client.call(&DetectText {
            image: frame.image_path.clone(),
        })?;
        Ok(r.regions
            .iter()
            .any(|g| g.confidence >= self.conf_threshold && g.area_frac >= self.min_area_frac))
    }
}

pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        dot += x as f64 * y as f64;
        na += x as f64 * x as f64;
        nb += y as f64 * y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Scales `v` to unit length; zero vectors are left alone.
pub fn normalize(v: &mut [f32]) {
    let n = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x = (*x as f64 / n) as f32);
    }
}

/// Keywords joined by ", ", or the subplot itself when there are none.
pub fn query_text(keywords: &[String], subplot: &str) -> String {
    let kws: Vec<&str> = keywords.iter().map(|k| k.trim()).filter(|k| !k.is_empty()).collect();
    if kws.is_empty() {
        subplot.trim().to_string()
    } else {
        kws.join(", ")
    }
}

fn rank_where(query: &[f32], frames: &[FrameRecord], keep: impl Fn(&FrameRecord) -> bool) -> Result<Vec<(usize, f64)>> {
    let mut ranked = Vec::new();
    for (i, f) in frames.iter().enumerate().filter(|(_, f)| keep(f)) {
        let emb = f
            .embedding
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("frame {} has no embedding", f.index)))?;
        if emb.len() != query.len() {
            return Err(Error::invalid(format!(
                "embedding dimension mismatch: query {} vs frame {} ({})",
                query.len(),
                f.index,
                emb.len()
            )));
        }
        ranked.push((i, cosine(query, emb)));
    }
    ranked.sort_by(|&(ia, sa), &(ib, sb)| {
        sb.partial_cmp(&sa)
            .unwrap_or(Ordering::Equal)
            .then(frames[ia].timestamp_s.total_cmp(&frames[ib].timestamp_s))
    });
    Ok(ranked)
}

/// Frames with timestamps inside `window`, best match first. Ties go to the
/// earlier frame. Returns `(position in frames, similarity)`.
pub fn rank_frames(query: &[f32], frames: &[FrameRecord], window: Interval) -> Result<Vec<(usize, f64)>> {
    rank_where(query, frames, |f| window.contains(f.timestamp_s))
}

/// Greedy per-subplot selection in subplot order.
///
/// Text detection runs lazily on the frames actually considered; results
/// are cached in `FrameRecord::has_text`.
pub fn select_frames(
    queries: &[Vec<f32>],
    frames: &mut [FrameRecord],
    duration_s: f64,
    constraints: &SelectionConstraints,
    detector: &dyn TextDetector,
) -> Result<Selection> {
    constraints.validate()?;
    let cut = constraints.partition_frac * duration_s;
    let early_n = constraints.early_count(queries.len());
    let early = |f: &FrameRecord| f.timestamp_s <= cut;
    if early_n > 0 && !frames.iter().any(early) {
        return Err(Error::config("frames", "no frames in the early partition of the timeline"));
    }
    if early_n < queries.len() && !frames.iter().any(|f| !early(f)) {
        return Err(Error::config("frames", "no frames in the late partition of the timeline"));
    }
    let mut sel = Selection::default();
    for (si, q) in queries.iter().enumerate() {
        let in_early = si < early_n;
        let ranked = rank_where(q, frames, |f| early(f) == in_early)?;
        let mut audit = SubplotAudit {
            subplot_index: si,
            early_partition: in_early,
            chosen: None,
            rejected: Vec::new(),
        };
        for (pos, sim) in ranked {
            let (ts, frame_index) = (frames[pos].timestamp_s, frames[pos].index);
            let reject = |reason| Rejection {
                frame_index,
                timestamp_s: ts,
                similarity: sim,
                reason,
            };
            if sel
                .assignments
                .iter()
                .any(|a| (a.frame.timestamp_s - ts).abs() < constraints.min_sep_s)
            {
                audit.rejected.push(reject(RejectReason::TooClose));
                continue;
            }
            let has_text = match frames[pos].has_text {
                Some(t) => t,
                None => {
                    let t = detector.has_text(&frames[pos])?;
                    frames[pos].has_text = Some(t);
                    t
                }
            };
            if has_text {
                audit.rejected.push(reject(RejectReason::HasText));
                continue;
            }
            let a = SubplotAssignment {
                subplot_index: si,
                frame: frames[pos].clone(),
                similarity: sim,
            };
            audit.chosen = Some(a.clone());
            sel.assignments.push(a);
            break;
        }
        if audit.chosen.is_none() {
            tracing::warn!(subplot = si, "no admissible frame left; subplot skipped");
        }
        sel.audits.push(audit);
    }
    Ok(sel)
}

/// Unit-length query vectors for `texts` from a `text-embed` adapter.
pub fn embed_queries(client: &AdapterClient, texts: &[String]) -> Result<Vec<Vec<f32>>> {
    let mut v = client.call(&EmbedTexts { texts: texts.to_vec() })?.vectors;
    v.iter_mut().for_each(|x| normalize(x));
    Ok(v)
}

/// Fills in missing frame embeddings from an `image-embed` adapter, in
/// batches, normalizing each vector.
pub fn embed_frames(client: &AdapterClient, frames: &mut [FrameRecord], batch: usize) -> Result<()> {
    let todo: Vec<usize> = (0..frames.len()).filter(|&i| frames[i].embedding.is_none()).collect();
    for chunk in todo.chunks(batch.max(1)) {
        let images: Vec<PathBuf> = chunk.iter().map(|&i| frames[i].image_path.clone()).collect();
        let vectors = client.call(&EmbedImages { images })?.vectors;
        for (&i, mut v) in chunk.iter().zip(vectors) {
            normalize(&mut v);
            frames[i].embedding = Some(v);
        }
    }
    Ok(())
}

/// Writes `subplots/<idx>/` with subplot.txt, keywords.json and frame.json.
pub fn write_subplot_artifacts(
    root: &Path,
    subplot: &str,
    keywords: &[String],
    audit: &SubplotAudit,
) -> Result<PathBuf> {
    let dir = root.join("subplots").join(audit.subplot_index.to_string());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("subplot.txt", format!("{subplot}\n"))?;
    write("keywords.json", serde_json::to_string_pretty(keywords)?)?;
    write("frame.json", serde_json::to_string_pretty(audit)?)?;
    Ok(dir)
}
