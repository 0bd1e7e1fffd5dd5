//! Cluster cohesion, single-linkage separation and the pairwise silhouette
//! score over index sets, for any symmetric distance.

/// Mean distance over ordered pairs of distinct members. A singleton (or
/// empty) cluster has cohesion 0.
pub fn cohesion(members: &[usize], dist: &impl Fn(usize, usize) -> f64) -> f64 {
    let m = members.len();
    if m < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for (a, &i) in members.iter().enumerate() {
        for &j in &members[a + 1..] {
            sum += dist(i, j);
        }
    }
    // each unordered pair stands for two ordered pairs
    2.0 * sum / (m * (m - 1)) as f64
}

/// Minimum distance across the two clusters.
pub fn separation(ck: &[usize], cl: &[usize], dist: &impl Fn(usize, usize) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    for &i in ck {
        for &j in cl {
            best = best.min(dist(i, j));
        }
    }
    best
}

/// One half of the pair score, `(b - a) / max(a, b)`, with 0 when both
/// vanish.
pub fn silhouette_term(a: f64, b: f64) -> f64 {
    let denom = a.max(b);
    if denom == 0.0 {
        0.0
    } else {
        (b - a) / denom
    }
}

/// Score from precomputed cohesions and separation.
pub fn silhouette_from_parts(a_k: f64, a_l: f64, b_kl: f64) -> f64 {
    0.5 * (silhouette_term(a_k, b_kl) + silhouette_term(a_l, b_kl))
}

pub fn silhouette_pair(ck: &[usize], cl: &[usize], dist: &impl Fn(usize, usize) -> f64) -> f64 {
    silhouette_from_parts(cohesion(ck, dist), cohesion(cl, dist), separation(ck, cl, dist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(points: &[f64]) -> impl Fn(usize, usize) -> f64 + '_ {
        move |i, j| (points[i] - points[j]).abs()
    }

    #[test]
    fn cohesion_examples() {
        let pts = [0.0, 2.0];
        assert_eq!(cohesion(&[0, 1], &line(&pts)), 2.0);
        assert_eq!(cohesion(&[1], &line(&pts)), 0.0);
    }

    #[test]
    fn separation_examples() {
        let pts = [0.0, 1.0, 5.0, 9.0];
        assert_eq!(separation(&[0, 1], &[2, 3], &line(&pts)), 4.0);
        let shared = [3.0, 7.0, 3.0];
        assert_eq!(separation(&[0, 1], &[2], &line(&shared)), 0.0);
    }

    #[test]
    fn silhouette_examples() {
        let far = [0.0, 100.0];
        assert_eq!(silhouette_pair(&[0], &[1], &line(&far)), 1.0);
        // a_k = a_l = b_kl = 1
        let pts = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(silhouette_pair(&[0, 1], &[2, 3], &line(&pts)), 0.0);
        // both terms degenerate
        let same = [4.0, 4.0];
        assert_eq!(silhouette_pair(&[0], &[1], &line(&same)), 0.0);
    }

    proptest! {
        #[test]
        fn bounded_and_symmetric(pts in prop::collection::vec(-50.0f64..50.0, 2..16), split in 1usize..15) {
            let split = split.min(pts.len() - 1);
            let ck: Vec<usize> = (0..split).collect();
            let cl: Vec<usize> = (split..pts.len()).collect();
            let d = line(&pts);
            let s = silhouette_pair(&ck, &cl, &d);
            prop_assert!((-1.0..=1.0).contains(&s));
            prop_assert_eq!(s, silhouette_pair(&cl, &ck, &d));
            prop_assert!(cohesion(&ck, &d) >= 0.0 && separation(&ck, &cl, &d) >= 0.0);
        }

        #[test]
        fn positive_scaling_preserves_sign(pts in prop::collection::vec(-50.0f64..50.0, 3..12), c in 0.01f64..100.0) {
            let ck: Vec<usize> = (0..pts.len() / 2).collect();
            let cl: Vec<usize> = (pts.len() / 2..pts.len()).collect();
            let scaled: Vec<f64> = pts.iter().map(|p| p * c).collect();
            let (a, b) = (silhouette_pair(&ck, &cl, &line(&pts)), silhouette_pair(&ck, &cl, &line(&scaled)));
            prop_assert!((a - b).abs() < 1e-9);
            prop_assert_eq!(a > 1e-9, b > 1e-9);
        }
    }
}
