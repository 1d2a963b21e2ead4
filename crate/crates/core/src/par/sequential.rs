pub(super) fn map_indices<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

pub(super) fn fill<T, F: Fn(usize) -> T>(out: &mut [T], f: F) {
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = f(i);
    }
}
