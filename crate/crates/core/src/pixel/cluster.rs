//! Spatiotemporal clustering of pixel hits and ToT-weighted centroiding.

use rayon::prelude::*;

use crate::sim::PhotonEvent;
use crate::units::SENSOR_PIXELS;

/// Width of the cluster time window, 300 ns in ticks.
pub const CLUSTER_WINDOW_TICKS: u64 = 192;

/// One pixel firing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PixelHit {
    pub col: u16,
    pub row: u16,
    pub toa_ticks: u64,
    /// Time over threshold in 25 ns units.
    pub tot: u16,
}

impl PixelHit {
    /// Total order used wherever hits must be processed canonically.
    #[inline]
    pub fn key(&self) -> (u64, u16, u16, u16) {
        (self.toa_ticks, self.row, self.col, self.tot)
    }

    #[inline]
    fn pixel_index(&self) -> usize {
        self.row as usize * SENSOR_PIXELS as usize + self.col as usize
    }
}

/// Hits attributed to one photon flash.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Sorted by [`PixelHit::key`].
    pub hits: Vec<PixelHit>,
    pub centroid_x: f64,
    pub centroid_y: f64,
    /// ToA of the largest-ToT pixel.
    pub toa_ticks: u64,
    /// Equal to `toa_ticks` until time-walk correction is applied.
    pub corrected_toa_ticks: u64,
}

impl Cluster {
    /// Builds a cluster from a non-empty set of hits.
    pub fn from_hits(mut hits: Vec<PixelHit>) -> Self {
        assert!(!hits.is_empty(), "cluster without hits");
        hits.sort_unstable_by_key(PixelHit::key);
        let mut wsum = 0.0;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for h in &hits {
            let w = h.tot as f64;
            wsum += w;
            sx += w * h.col as f64;
            sy += w * h.row as f64;
        }
        let (cx, cy) = if wsum > 0.0 {
            (sx / wsum, sy / wsum)
        } else {
            let n = hits.len() as f64;
            (
                hits.iter().map(|h| h.col as f64).sum::<f64>() / n,
                hits.iter().map(|h| h.row as f64).sum::<f64>() / n,
            )
        };
        let toa = timing_hit(&hits).toa_ticks;
        Self {
            hits,
            centroid_x: cx,
            centroid_y: cy,
            toa_ticks: toa,
            corrected_toa_ticks: toa,
        }
    }

    /// The hit that times the cluster: largest ToT, then lowest ToA, row and
    /// column.
    pub fn timing_hit(&self) -> &PixelHit {
        timing_hit(&self.hits)
    }

    pub fn max_tot(&self) -> u16 {
        self.timing_hit().tot
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

fn timing_hit(hits: &[PixelHit]) -> &PixelHit {
    hits.iter()
        .min_by_key(|h| (std::cmp::Reverse(h.tot), h.toa_ticks, h.row, h.col))
        .expect("non-empty")
}

/// Photon reconstructed from a cluster: ToT-weighted position and the
/// (corrected) time of its timing pixel.
pub fn centroid_cluster(cluster: &Cluster) -> PhotonEvent {
    PhotonEvent {
        t_ticks: cluster.corrected_toa_ticks,
        x: cluster.centroid_x as f32,
        y: cluster.centroid_y as f32,
        truth: None,
    }
}

struct Forest {
    parent: Vec<u32>,
    seed: Vec<u64>,
}

impl Forest {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }
}

/// Groups hits into clusters.
///
/// Hits are taken in canonical order. A hit joins every open cluster that
/// already owns one of its eight neighbours (or its own pixel); a cluster is
/// open while the hit lies within [`CLUSTER_WINDOW_TICKS`] of the cluster's
/// earliest hit. Joining several clusters merges them. The result does not
/// depend on the input order and is sorted by cluster ToA.
pub fn cluster_hits(hits: &[PixelHit]) -> Vec<Cluster> {
    let mut sorted = hits.to_vec();
    sorted.sort_unstable_by_key(PixelHit::key);
    cluster_sorted(&sorted)
}

/// Same result as [`cluster_hits`], computed in parallel over time chunks.
///
/// Chunks are cut only at quiet gaps longer than the cluster window, where no
/// cluster can span the cut, and hold at least `min_chunk` hits.
pub fn cluster_hits_chunked(hits: &[PixelHit], min_chunk: usize) -> Vec<Cluster> {
    let mut sorted = hits.to_vec();
    sorted.sort_unstable_by_key(PixelHit::key);
    let bounds = quiet_chunks(&sorted, min_chunk.max(1));
    let parts: Vec<Vec<Cluster>> = bounds
        .par_iter()
        .map(|&(a, b)| cluster_sorted(&sorted[a..b]))
        .collect();
    parts.into_iter().flatten().collect()
}

/// Half-open index ranges of canonically sorted hits, split at quiet gaps.
pub fn quiet_chunks(sorted: &[PixelHit], min_chunk: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..sorted.len() {
        if i - start >= min_chunk
            && sorted[i].toa_ticks - sorted[i - 1].toa_ticks > CLUSTER_WINDOW_TICKS
        {
            out.push((start, i));
            start = i;
        }
    }
    if start < sorted.len() {
        out.push((start, sorted.len()));
    }
    out
}

fn cluster_sorted(sorted: &[PixelHit]) -> Vec<Cluster> {
    let n_pix = SENSOR_PIXELS as usize * SENSOR_PIXELS as usize;
    let mut by_pixel: Vec<Vec<u32>> = vec![Vec::new(); n_pix];
    let mut forest = Forest {
        parent: Vec::new(),
        seed: Vec::new(),
    };
    let mut owner = Vec::with_capacity(sorted.len());
    let mut roots: Vec<u32> = Vec::with_capacity(9);
    let side = SENSOR_PIXELS as i32;

    for h in sorted {
        roots.clear();
        let (c, r) = (h.col as i32, h.row as i32);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let (cc, rr) = (c + dc, r + dr);
                if cc < 0 || rr < 0 || cc >= side || rr >= side {
                    continue;
                }
                let list = &mut by_pixel[rr as usize * side as usize + cc as usize];
                list.retain(|&id| {
                    let root = forest.find(id);
                    forest.seed[root as usize] + CLUSTER_WINDOW_TICKS >= h.toa_ticks
                });
                for &id in list.iter() {
                    let root = forest.find(id);
                    if !roots.contains(&root) {
                        roots.push(root);
                    }
                }
            }
        }
        let id = match roots.iter().min_by_key(|&&r| (forest.seed[r as usize], r)) {
            None => {
                let id = forest.parent.len() as u32;
                forest.parent.push(id);
                forest.seed.push(h.toa_ticks);
                id
            }
            Some(&rep) => {
                for &other in &roots {
                    if other != rep {
                        forest.parent[other as usize] = rep;
                    }
                }
                rep
            }
        };
        owner.push(id);
        by_pixel[h.pixel_index()].push(id);
    }

    let mut slot = vec![u32::MAX; forest.parent.len()];
    let mut groups: Vec<Vec<PixelHit>> = Vec::new();
    for (h, &id) in sorted.iter().zip(&owner) {
        let root = forest.find(id) as usize;
        if slot[root] == u32::MAX {
            slot[root] = groups.len() as u32;
            groups.push(Vec::with_capacity(4));
        }
        groups[slot[root] as usize].push(*h);
    }
    let mut clusters: Vec<Cluster> = groups.into_iter().map(Cluster::from_hits).collect();
    clusters.sort_by_key(|c| (c.toa_ticks, c.hits[0].key()));
    clusters
}
