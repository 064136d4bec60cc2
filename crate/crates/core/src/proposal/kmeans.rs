use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    /// Cluster index of every input point.
    pub assignment: Vec<usize>,
    pub centers: Vec<(f64, f64)>,
    /// Within-cluster sum of squared distances after each assignment step.
    pub sse_history: Vec<f64>,
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Lloyd's algorithm with deterministic farthest-point seeding from `points[0]`.
///
/// Callers put the most valuable point first. Ties go to the lowest point or center
/// index. `k > points.len()` yields one singleton cluster per point. `_seed` is unused
/// because nothing here is random.
pub fn kmeans(points: &[(f64, f64)], k: usize, iters: usize, _seed: u64) -> Result<KMeans> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("k-means needs at least one point".into()));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k-means needs k >= 1".into()));
    }
    if k >= points.len() {
        return Ok(KMeans {
            assignment: (0..points.len()).collect(),
            centers: points.to_vec(),
            sse_history: vec![0.0],
        });
    }

    let mut centers = vec![points[0]];
    let mut nearest: Vec<f64> = points.iter().map(|&p| sq_dist(p, points[0])).collect();
    while centers.len() < k {
        let (far, _) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        centers.push(points[far]);
        for (n, &p) in nearest.iter_mut().zip(points) {
            *n = n.min(sq_dist(p, points[far]));
        }
    }

    let assign = |centers: &[(f64, f64)]| -> Vec<usize> {
        points
            .iter()
            .map(|&p| {
                let mut best = 0;
                for (c, &center) in centers.iter().enumerate().skip(1) {
                    if sq_dist(p, center) < sq_dist(p, centers[best]) {
                        best = c;
                    }
                }
                best
            })
            .collect()
    };
    let sse = |assignment: &[usize], centers: &[(f64, f64)]| -> f64 {
        points.iter().zip(assignment).map(|(&p, &c)| sq_dist(p, centers[c])).sum()
    };

    let mut assignment = assign(&centers);
    let mut sse_history = vec![sse(&assignment, &centers)];
    for _ in 0..iters {
        let mut sums = vec![(0.0, 0.0, 0usize); k];
        for (&p, &c) in points.iter().zip(&assignment) {
            sums[c].0 += p.0;
            sums[c].1 += p.1;
            sums[c].2 += 1;
        }
        let mut next_centers = centers.clone();
        for (c, &(su, sv, n)) in sums.iter().enumerate() {
            if n > 0 {
                next_centers[c] = (su / n as f64, sv / n as f64);
            }
        }
        for c in 0..k {
            if sums[c].2 == 0 {
                // Re-seed at the point farthest from its own center.
                let (far, _) = points.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                    let d = sq_dist(p, next_centers[assignment[i]]);
                    if d > best.1 {
                        (i, d)
                    } else {
                        best
                    }
                });
                next_centers[c] = points[far];
                assignment[far] = c;
            }
        }
        let next = assign(&next_centers);
        centers = next_centers;
        let converged = next == assignment;
        assignment = next;
        sse_history.push(sse(&assignment, &centers));
        if converged {
            break;
        }
    }
    Ok(KMeans {
        assignment,
        centers,
        sse_history,
    })
}
