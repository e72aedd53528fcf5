//! Dense vector helpers. Accumulation is done in `f64`; stored vectors are `f32`.

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, 0 when either vector is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let denom = norm(a) * norm(b);
    if denom <= 1e-300 {
        return 0.0;
    }
    (dot(a, b) / denom).clamp(-1.0, 1.0)
}

/// Component-wise mean in `f64`.
pub fn mean<'a, I>(vectors: I, dim: usize) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    let mut acc = vec![0.0f64; dim];
    let mut n = 0usize;
    for v in vectors {
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += x as f64;
        }
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
    }
    acc
}

/// Scales to unit length. Returns `None` for a (numerically) zero vector.
pub fn normalize_f64(v: &[f64]) -> Option<Vec<f32>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n <= 1e-12 {
        return None;
    }
    Some(v.iter().map(|x| (x / n) as f32).collect())
}

pub fn normalize(v: &[f32]) -> Option<Vec<f32>> {
    let as_f64: Vec<f64> = v.iter().map(|&x| x as f64).collect();
    normalize_f64(&as_f64)
}

/// Normalized mean of a set of vectors.
pub fn mean_direction<'a, I>(vectors: I, dim: usize) -> Option<Vec<f32>>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    normalize_f64(&mean(vectors, dim))
}
