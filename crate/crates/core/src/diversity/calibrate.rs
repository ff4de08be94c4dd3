use super::{DiversityError, DiversityReport, DiversityWeights};

/// Grid resolution: weights are multiples of `1 / GRID_STEPS` (step 0.05).
pub const GRID_STEPS: u32 = 20;

const TIE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub weights: DiversityWeights,
    /// Pearson correlation between combined scores and ratings under `weights`.
    pub pearson: f64,
}

/// Searches the 8-weight simplex on a 0.05 grid for the weights whose combined
/// score correlates best with the ratings.
pub fn calibrate_weights(samples: &[(DiversityReport, f64)]) -> Result<DiversityWeights, DiversityError> {
    calibrate_weights_scored(samples).map(|c| c.weights)
}

pub fn calibrate_weights_scored(samples: &[(DiversityReport, f64)]) -> Result<Calibration, DiversityError> {
    if samples.len() < 3 {
        return Err(DiversityError::InsufficientData(samples.len()));
    }
    for (_, rating) in samples {
        if !rating.is_finite() || !(1.0..=10.0).contains(rating) {
            return Err(DiversityError::InvalidParameter(format!("rating {rating} outside [1, 10]")));
        }
    }
    let n = samples.len() as f64;
    let ratings: Vec<f64> = samples.iter().map(|(_, r)| *r).collect();
    let mean_rating = ratings.iter().sum::<f64>() / n;
    let syy: f64 = ratings.iter().map(|r| (r - mean_rating).powi(2)).sum();
    if syy == 0.0 {
        return Err(DiversityError::DegenerateRatings);
    }

    // Pearson(Xw, y) = w.c / sqrt(w'Sw * syy), with c and S the centered
    // cross- and auto-moments. Both are invariant to the scale of w, so the
    // integer grid counts are used directly.
    let features: Vec<[f64; 8]> = samples.iter().map(|(r, _)| r.sub_scores()).collect();
    let means: [f64; 8] = std::array::from_fn(|k| features.iter().map(|f| f[k]).sum::<f64>() / n);
    // exact-constant signals contribute nothing; zero them so rounding in the
    // mean cannot fake a tiny variance
    let constant: [bool; 8] = std::array::from_fn(|k| features.iter().all(|f| f[k] == features[0][k]));
    let mut cross = [0.0; 8];
    let mut auto = [[0.0; 8]; 8];
    for (f, r) in features.iter().zip(&ratings) {
        let d: [f64; 8] = std::array::from_fn(|k| if constant[k] { 0.0 } else { f[k] - means[k] });
        for k in 0..8 {
            cross[k] += d[k] * (r - mean_rating);
            for l in 0..8 {
                auto[k][l] += d[k] * d[l];
            }
        }
    }

    let mut best: Option<([u32; 8], f64)> = None;
    let mut counts = [0u32; 8];
    enumerate(&mut counts, 0, GRID_STEPS, &mut |m| {
        let w = m.map(f64::from);
        let num: f64 = (0..8).map(|k| w[k] * cross[k]).sum();
        let mut var = 0.0;
        for k in 0..8 {
            if w[k] == 0.0 {
                continue;
            }
            for l in 0..8 {
                var += w[k] * auto[k][l] * w[l];
            }
        }
        if var <= 0.0 {
            return;
        }
        let r = num / (var.sqrt() * syy.sqrt());
        // lexicographic enumeration + strict improvement keeps the smallest tied vector
        if best.is_none_or(|(_, b)| r > b + TIE_EPSILON) {
            best = Some((*m, r));
        }
    });

    let (m, r) = best.ok_or(DiversityError::DegenerateScores)?;
    let weights = DiversityWeights::from_array(m.map(|c| f64::from(c) / f64::from(GRID_STEPS)))?;
    Ok(Calibration {
        weights,
        pearson: r.clamp(-1.0, 1.0),
    })
}

/// Visits every composition of `remaining` into the slots `pos..8` in
/// lexicographic order of the full vector.
fn enumerate(counts: &mut [u32; 8], pos: usize, remaining: u32, visit: &mut impl FnMut(&[u32; 8])) {
    if pos == 7 {
        counts[7] = remaining;
        visit(counts);
        return;
    }
    for c in 0..=remaining {
        counts[pos] = c;
        enumerate(counts, pos + 1, remaining - c, visit);
    }
}
