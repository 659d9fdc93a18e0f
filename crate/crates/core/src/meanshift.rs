//! Flat-kernel mean shift over 2D points.

/// Mode estimates stop moving once a step is shorter than this (pixels).
const CONVERGENCE: f64 = 1e-3;
const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Mean of the member points.
    pub center: [f64; 2],
    /// Indices into the input slice, ascending.
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn mean_of(points: &[[f64; 2]], idx: impl Iterator<Item = usize>) -> Option<[f64; 2]> {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for i in idx {
        sx += points[i][0];
        sy += points[i][1];
        n += 1;
    }
    (n > 0).then(|| [sx / n as f64, sy / n as f64])
}

fn seek_mode(points: &[[f64; 2]], start: [f64; 2], bw2: f64) -> [f64; 2] {
    let mut mode = start;
    for _ in 0..MAX_ITERATIONS {
        let inside = (0..points.len()).filter(|&i| dist2(points[i], mode) <= bw2);
        let Some(next) = mean_of(points, inside) else { break };
        let shift = dist2(next, mode).sqrt();
        mode = next;
        if shift < CONVERGENCE {
            break;
        }
    }
    mode
}

/// Clusters `points` with a flat kernel of radius `bandwidth`.
///
/// Every point seeds a mode search. Modes closer than `bandwidth / 2` are
/// merged, keeping the one with the most support, and each point joins its
/// nearest surviving mode. A member ending up farther than `bandwidth` from
/// its cluster mean is split off into its own cluster, so every returned
/// cluster satisfies that bound. Clusters are ordered by size, largest
/// first, then by lowest member index.
///
/// # Panics
/// If `bandwidth` is not positive.
pub fn mean_shift(points: &[[f64; 2]], bandwidth: f64) -> Vec<Cluster> {
    assert!(bandwidth > 0.0, "bandwidth must be positive");
    if points.is_empty() {
        return Vec::new();
    }
    let bw2 = bandwidth * bandwidth;
    let modes: Vec<[f64; 2]> = points.iter().map(|&p| seek_mode(points, p, bw2)).collect();
    let support: Vec<usize> = modes
        .iter()
        .map(|&m| points.iter().filter(|&&p| dist2(p, m) <= bw2).count())
        .collect();

    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| support[b].cmp(&support[a]).then(a.cmp(&b)));
    let merge2 = bw2 / 4.0;
    let mut kept: Vec<[f64; 2]> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| dist2(k, modes[i]) >= merge2) {
            kept.push(modes[i]);
        }
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); kept.len()];
    for (i, &p) in points.iter().enumerate() {
        let nearest = (0..kept.len())
            .min_by(|&a, &b| dist2(p, kept[a]).total_cmp(&dist2(p, kept[b])).then(a.cmp(&b)))
            .expect("at least one mode");
        groups[nearest].push(i);
    }
    groups.retain(|g| !g.is_empty());

    // split off members that violate the radius bound, farthest first
    let mut g = 0;
    while g < groups.len() {
        let center = mean_of(points, groups[g].iter().copied()).expect("non-empty group");
        let farthest = groups[g]
            .iter()
            .enumerate()
            .map(|(pos, &i)| (pos, dist2(points[i], center)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match farthest {
            Some((pos, d2)) if d2 > bw2 => {
                let i = groups[g].remove(pos);
                groups.push(vec![i]);
            }
            _ => g += 1,
        }
    }

    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|mut members| {
            members.sort_unstable();
            let center = mean_of(points, members.iter().copied()).expect("non-empty group");
            Cluster { center, members }
        })
        .collect();
    clusters.sort_by(|a, b| b.size().cmp(&a.size()).then(a.members[0].cmp(&b.members[0])));
    clusters
}
