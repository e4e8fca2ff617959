use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    /// Height above the higher of the two bases reached before a taller
    /// point on either side.
    pub prominence: f64,
}

/// Local maxima with positive prominence of at least `min_prominence`, in
/// index order. End points are never peaks; plateaus report their first
/// sample.
pub fn find_peaks(values: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        // extent of a plateau starting at i
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i > 0 && values[i - 1] < values[i];
        let right_lower = j + 1 < n && values[j + 1] < values[i];
        if left_lower && right_lower {
            let h = values[i];
            let mut left_min = h;
            let mut k = i;
            while k > 0 && values[k - 1] <= h {
                k -= 1;
                left_min = left_min.min(values[k]);
            }
            let mut right_min = h;
            let mut k = j;
            while k + 1 < n && values[k + 1] <= h {
                k += 1;
                right_min = right_min.min(values[k]);
            }
            let prominence = h - left_min.max(right_min);
            if prominence > 0.0 && prominence >= min_prominence {
                out.push(Peak {
                    index: i,
                    height: h,
                    prominence,
                });
            }
        }
        i = j + 1;
    }
    out
}
