use super::{Box7, IouKind};
use crate::error::{Error, Result};

/// Greedy 3D-IoU non-maximum suppression. See [`nms_with`].
pub fn nms(boxes: &[Box7], scores: &[f64], iou_threshold: f64) -> Result<Vec<usize>> {
    nms_with(boxes, scores, iou_threshold, IouKind::ThreeD)
}

/// Keeps the highest-scoring remaining box and drops every other box whose
/// IoU with it is `>= iou_threshold`, until nothing remains. Returns kept
/// indices in descending score order; equal scores prefer the lower index.
pub fn nms_with(
    boxes: &[Box7],
    scores: &[f64],
    iou_threshold: f64,
    kind: IouKind,
) -> Result<Vec<usize>> {
    if boxes.len() != scores.len() {
        return Err(Error::LengthMismatch {
            what: "boxes vs scores",
            left: boxes.len(),
            right: scores.len(),
        });
    }
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut suppressed = vec![false; boxes.len()];
    let mut kept = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(i);
        for &j in &order[rank + 1..] {
            if !suppressed[j] && kind.iou(&boxes[i], &boxes[j]) >= iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    fn cube(x: f64) -> Box7 {
        Box7::new(Point3::new(x, 0.0, 0.0), 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn single_box_kept() {
        assert_eq!(nms(&[cube(0.0)], &[0.3], 0.5).unwrap(), vec![0]);
    }

    #[test]
    fn identical_boxes_keep_best() {
        assert_eq!(nms(&[cube(0.0), cube(0.0)], &[0.8, 0.9], 0.5).unwrap(), vec![1]);
    }

    #[test]
    fn ties_prefer_lower_index() {
        assert_eq!(nms(&[cube(0.0), cube(0.0)], &[0.5, 0.5], 0.5).unwrap(), vec![0]);
    }

    #[test]
    fn chain_keeps_ends() {
        // IoU(A,B) = IoU(B,C) = 1/3, IoU(A,C) = 0.
        let boxes = [cube(0.0), cube(0.5), cube(1.0)];
        assert_eq!(nms(&boxes, &[0.9, 0.8, 0.7], 0.3).unwrap(), vec![0, 2]);
    }

    #[test]
    fn mismatched_lengths() {
        assert!(nms(&[cube(0.0)], &[], 0.5).is_err());
    }
}
