//! Exact brute-force nearest-neighbor selection shared by SMOTE and kNN.

#[inline]
pub(crate) fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Indices of the `k` candidates closest to `query`, nearest first; ties go to
/// the lower index. `skip` is excluded from the candidates.
pub(crate) fn k_nearest<'a, I>(candidates: I, query: &[f64], k: usize, skip: Option<usize>) -> Vec<usize>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut scored: Vec<(f64, usize)> = candidates
        .into_iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != skip)
        .map(|(i, row)| (sq_euclidean(row, query), i))
        .collect();
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, by_dist);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_dist);
    scored.into_iter().map(|(_, i)| i).collect()
}
