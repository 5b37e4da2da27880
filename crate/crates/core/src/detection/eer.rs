use crate::error::{Error, Result};

/// Equal error rate of `scores`, where higher means "machine" and
/// `is_machine[i]` gives the truth.
///
/// Thresholds are −∞, every midpoint between adjacent distinct scores, and
/// +∞; a text is flagged as machine when its score exceeds the threshold.
/// The false-accept rate (humans flagged) falls and the false-reject rate
/// (machines missed) rises along the sweep; the EER is read off where they
/// cross, interpolating linearly between the two straddling thresholds.
/// Scores are never flipped, so a detector pointing the wrong way reports
/// an EER above 0.5.
pub fn eer(scores: &[f64], is_machine: &[bool]) -> Result<f64> {
    if scores.len() != is_machine.len() {
        return Err(Error::Argument(format!("{} scores but {} labels", scores.len(), is_machine.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Argument("scores contain NaN".into()));
    }
    let machines = is_machine.iter().filter(|&&m| m).count();
    let humans = scores.len() - machines;
    if machines == 0 || humans == 0 {
        return Err(Error::Argument("equal error rate needs both human and machine samples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // (false accept, false reject) at successive thresholds
    let (h, m) = (humans as f64, machines as f64);
    let mut humans_above = humans;
    let mut machines_below = 0;
    let mut prev = (1.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if is_machine[order[i]] {
                machines_below += 1;
            } else {
                humans_above -= 1;
            }
            i += 1;
        }
        let cur = (humans_above as f64 / h, machines_below as f64 / m);
        let (d0, d1) = (prev.0 - prev.1, cur.0 - cur.1);
        if d1 <= 0.0 {
            if d1 == 0.0 {
                return Ok(cur.0);
            }
            let t = d0 / (d0 - d1);
            return Ok(prev.0 + t * (cur.0 - prev.0));
        }
        prev = cur;
    }
    unreachable!("the +inf threshold always has false accept 0 and false reject 1")
}
