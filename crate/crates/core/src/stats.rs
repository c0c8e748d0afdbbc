//! Sample statistics and moment/cumulant conversions.

/// Joint cumulant of `r` variables from mixed moments `moment(mask)`, where
/// bit `i` of `mask` selects variable `i`.
pub fn cumulant_from_moments(r: usize, moment: impl Fn(u32) -> f64) -> f64 {
    let full: u32 = (1 << r) - 1;
    let mut total = 0.0;
    for_each_set_partition(full, &mut Vec::new(), &mut |blocks| {
        let b = blocks.len();
        let sign = if b % 2 == 1 { 1.0 } else { -1.0 };
        let fact: f64 = (1..b).map(|x| x as f64).product();
        total += sign * fact * blocks.iter().map(|&m| moment(m)).product::<f64>();
    });
    total
}

fn for_each_set_partition(rest: u32, blocks: &mut Vec<u32>, f: &mut impl FnMut(&[u32])) {
    if rest == 0 {
        f(blocks);
        return;
    }
    // The lowest remaining element opens a new block.
    let low = rest & rest.wrapping_neg();
    let others = rest & !low;
    let mut sub = others;
    loop {
        blocks.push(low | sub);
        for_each_set_partition(others & !sub, blocks, f);
        blocks.pop();
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & others;
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample covariance.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

/// Sample skewness `m3 / m2^{3/2}` with central moments.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Excess kurtosis `m4 / m2² - 3`.
pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

/// Standard error of the mean with batch means over `batches` contiguous blocks.
pub fn batch_means_stderr(xs: &[f64], batches: usize) -> f64 {
    let b = batches.max(2).min(xs.len());
    let size = xs.len() / b;
    let means: Vec<f64> = (0..b).map(|i| mean(&xs[i * size..(i + 1) * size])).collect();
    (variance(&means) / b as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partitions_counted_by_bell_numbers() {
        for (r, bell) in [(1, 1), (2, 2), (3, 5), (4, 15)] {
            let mut n = 0;
            for_each_set_partition((1 << r) - 1, &mut Vec::new(), &mut |_| n += 1);
            assert_eq!(n, bell);
        }
    }

    #[test]
    fn cumulants_of_a_point_mass_vanish() {
        // X = 2 almost surely
        let k = cumulant_from_moments(3, |m| 2f64.powi(m.count_ones() as i32));
        assert!(k.abs() < 1e-12);
        assert!((cumulant_from_moments(1, |_| 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn second_cumulant_is_covariance() {
        // E X = 1, E Y = 2, E XY = 5
        let k = cumulant_from_moments(2, |m| match m {
            1 => 1.0,
            2 => 2.0,
            _ => 5.0,
        });
        assert!((k - 3.0).abs() < 1e-12);
    }

    #[test]
    fn sample_moments() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((mean(&xs) - 2.5).abs() < 1e-15);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert!(skewness(&xs).abs() < 1e-15);
    }
}
