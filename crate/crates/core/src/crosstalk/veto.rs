use crate::units::TICK_NS;

/// Default full veto window.
pub const VETO_WINDOW_NS: f64 = 50.0;

/// Full window width in ticks, rounded to the nearest even tick count so
/// the window is symmetric about the vetoing photon.
pub fn veto_window_ticks(window_ns: f64) -> u64 {
    2 * (window_ns / TICK_NS / 2.0).round() as u64
}

/// Drops every event of `target` within ±`window_ticks`/2 of an event in
/// `veto`. Both inputs must be sorted; output stays sorted.
pub fn veto_filter(target: &[u64], veto: &[u64], window_ticks: u64) -> (Vec<u64>, usize) {
    let half = window_ticks / 2;
    let mut kept = Vec::with_capacity(target.len());
    let mut j = 0;
    for &t in target {
        while j < veto.len() && veto[j] + half < t {
            j += 1;
        }
        let hit = j < veto.len() && veto[j] <= t + half;
        if !hit {
            kept.push(t);
        }
    }
    let removed = target.len() - kept.len();
    (kept, removed)
}

fn vetoed_mask(target: &[u64], veto: &[u64], half: u64, mask: &mut [bool]) {
    let mut j = 0;
    for (t, m) in target.iter().zip(mask) {
        while j < veto.len() && veto[j] + half < *t {
            j += 1;
        }
        if j < veto.len() && veto[j] <= t + half {
            *m = true;
        }
    }
}

/// Applies [`veto_filter`] in place to each ROI stream against both
/// neighbours, using the unfiltered neighbour streams as vetoes. Returns the
/// number of events removed from each stream.
pub fn veto_neighbors(per_ion: &mut [Vec<u64>], window_ticks: u64) -> Vec<usize> {
    let half = window_ticks / 2;
    let n = per_ion.len();
    let masks: Vec<Vec<bool>> = (0..n)
        .map(|i| {
            let mut mask = vec![false; per_ion[i].len()];
            for j in [i.wrapping_sub(1), i + 1] {
                if j < n {
                    vetoed_mask(&per_ion[i], &per_ion[j], half, &mut mask);
                }
            }
            mask
        })
        .collect();
    per_ion
        .iter_mut()
        .zip(masks)
        .map(|(v, mask)| {
            let before = v.len();
            let mut it = mask.iter();
            v.retain(|_| !*it.next().unwrap());
            before - v.len()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifty_ns_is_thirty_two_ticks() {
        assert_eq!(veto_window_ticks(50.0), 32);
    }

    #[test]
    fn disjoint_supports_unchanged() {
        let a: Vec<u64> = (0..50).map(|i| i * 1000).collect();
        let b: Vec<u64> = (0..50).map(|i| 1_000_000 + i * 1000).collect();
        let (kept, removed) = veto_filter(&a, &b, 32);
        assert_eq!(kept, a);
        assert_eq!(removed, 0);
    }

    #[test]
    fn close_followers_removed() {
        let bright: Vec<u64> = (0..50).map(|i| i * 1000).collect();
        let dark: Vec<u64> = bright.iter().map(|t| t + 6).collect();
        let (kept, removed) = veto_filter(&dark, &bright, 32);
        assert!(kept.is_empty());
        assert_eq!(removed, 50);
    }

    #[test]
    fn window_edges_inclusive() {
        let (kept, _) = veto_filter(&[84, 100, 116, 117], &[100], 32);
        assert_eq!(kept, vec![117]);
        let (kept, _) = veto_filter(&[83, 84], &[100], 32);
        assert_eq!(kept, vec![83]);
    }

    #[test]
    fn neighbours_only() {
        let mut out = vec![vec![100], vec![105], vec![110], vec![5000]];
        let removed = veto_neighbors(&mut out, 32);
        assert!(out[0].is_empty() && out[1].is_empty() && out[2].is_empty());
        assert_eq!(out[3], vec![5000]);
        assert_eq!(removed, vec![1, 1, 1, 0]);
    }
}
