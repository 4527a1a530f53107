//! Tracking-by-detection, per-track shape registration and amodal boxes.

mod amodal;
mod assignment;
mod kalman;

pub use amodal::{
    amodalize, cleanup_labels, label_score, register_track, AmodalParams, CleanupParams, LabeledBox,
    RegisteredShape, RegistrationInit, RegistrationParams,
};
pub use assignment::min_cost_assignment;
pub use kalman::{kf_predict, kf_update, position_gain, KalmanState};

use crate::error::{Error, Result};
use crate::geometry::Vector3;
use crate::proposals::Proposal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerParams {
    /// Proposals farther than this (BEV, m) from a predicted track are never associated.
    pub max_association_dist: f64,
    /// Frames a track may coast without a detection before it terminates.
    pub max_misses: usize,
    pub dt: f64,
    /// White-acceleration spectral density (m²/s³).
    pub process_noise: f64,
    /// Center measurement variance (m²).
    pub measurement_noise: f64,
    pub init_position_var: f64,
    pub init_velocity_var: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            max_association_dist: 3.0,
            max_misses: 2,
            dt: 0.1,
            process_noise: 4.0,
            measurement_noise: 0.05,
            init_position_var: 0.25,
            init_velocity_var: 4.0,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_association_dist > 0.0
            && self.dt > 0.0
            && self.process_noise >= 0.0
            && self.measurement_noise >= 0.0
            && self.init_position_var >= 0.0
            && self.init_velocity_var >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("tracker parameters out of range".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frame: usize,
    pub proposal: Proposal,
    /// Posterior center after this observation's update.
    pub filtered: Vector3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    pub observations: Vec<Observation>,
    pub state: KalmanState,
    pub misses: usize,
}

impl Track {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.observations.iter().map(|o| o.frame)
    }
}

const GATED: f64 = 1e9;

/// Links per-frame proposals (`per_frame[f]` holds frame `f`) into tracks.
///
/// Track ids follow creation order. Returns every track, finished or not,
/// sorted by id.
pub fn track_proposals(per_frame: &[Vec<Proposal>], params: &TrackerParams) -> Result<Vec<Track>> {
    params.validate()?;
    let mut live: Vec<Track> = Vec::new();
    let mut done: Vec<Track> = Vec::new();
    let mut next_id = 0;

    for (frame, proposals) in per_frame.iter().enumerate() {
        for t in &mut live {
            t.state = kf_predict(&t.state, params.dt, params.process_noise)?;
        }
        let cost: Vec<Vec<f64>> = live
            .iter()
            .map(|t| {
                let p = t.state.position();
                proposals
                    .iter()
                    .map(|q| {
                        let d = (p.x - q.bbox.cx).hypot(p.y - q.bbox.cy);
                        if d <= params.max_association_dist {
                            d
                        } else {
                            GATED
                        }
                    })
                    .collect()
            })
            .collect();
        let assignment = min_cost_assignment(&cost);

        let mut taken = vec![false; proposals.len()];
        let mut still_live = Vec::with_capacity(live.len());
        for (mut track, slot) in live.into_iter().zip(assignment) {
            let matched = slot.filter(|&j| {
                let p = track.state.position();
                let q = &proposals[j].bbox;
                (p.x - q.cx).hypot(p.y - q.cy) <= params.max_association_dist
            });
            match matched {
                Some(j) => {
                    taken[j] = true;
                    let z = proposals[j].bbox.center().coords;
                    track.state = kf_update(&track.state, &z, params.measurement_noise)?;
                    track.misses = 0;
                    track.observations.push(Observation {
                        frame,
                        proposal: proposals[j].clone(),
                        filtered: track.state.position(),
                    });
                    still_live.push(track);
                }
                None => {
                    track.misses += 1;
                    if track.misses > params.max_misses {
                        done.push(track);
                    } else {
                        still_live.push(track);
                    }
                }
            }
        }
        live = still_live;

        for (j, q) in proposals.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let c = q.bbox.center().coords;
            let state = KalmanState::new(c, q.mean_flow, params.init_position_var, params.init_velocity_var);
            live.push(Track {
                id: next_id,
                observations: vec![Observation {
                    frame,
                    proposal: q.clone(),
                    filtered: c,
                }],
                state,
                misses: 0,
            });
            next_id += 1;
        }
    }
    done.extend(live);
    done.sort_by_key(|t| t.id);
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Box7, Point3};

    fn prop(x: f64, y: f64, vx: f64) -> Proposal {
        Proposal {
            bbox: Box7::new(Point3::new(x, y, 1.0), 4.0, 2.0, 1.5, 0.0).unwrap(),
            point_indices: vec![0],
            mean_flow: Vector3::new(vx, 0.0, 0.0),
            bg_ratio: 0.0,
        }
    }

    #[test]
    fn straight_line_one_track() {
        let frames: Vec<Vec<Proposal>> = (0..10).map(|f| vec![prop(f as f64 * 1.0, 0.0, 10.0)]).collect();
        let tracks = track_proposals(&frames, &TrackerParams::default()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 10);
    }

    #[test]
    fn parallel_objects_keep_identity() {
        let frames: Vec<Vec<Proposal>> = (0..10)
            .map(|f| {
                let x = f as f64;
                // Order flips each frame to catch index-based association.
                if f % 2 == 0 {
                    vec![prop(x, 0.0, 10.0), prop(x, 10.0, 10.0)]
                } else {
                    vec![prop(x, 10.0, 10.0), prop(x, 0.0, 10.0)]
                }
            })
            .collect();
        let tracks = track_proposals(&frames, &TrackerParams::default()).unwrap();
        assert_eq!(tracks.len(), 2);
        for t in &tracks {
            assert_eq!(t.len(), 10);
            let y0 = t.observations[0].proposal.bbox.cy;
            assert!(t.observations.iter().all(|o| o.proposal.bbox.cy == y0));
        }
    }

    #[test]
    fn one_frame_gap_is_bridged() {
        let frames: Vec<Vec<Proposal>> = (0..10)
            .map(|f| if f == 5 { vec![] } else { vec![prop(f as f64, 0.0, 10.0)] })
            .collect();
        let tracks = track_proposals(&frames, &TrackerParams::default()).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 9);
        let frames_seen: Vec<usize> = tracks[0].frames().collect();
        assert!(frames_seen.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn long_gap_splits() {
        let frames: Vec<Vec<Proposal>> = (0..10)
            .map(|f| if (3..6).contains(&f) { vec![] } else { vec![prop(0.0, 0.0, 0.0)] })
            .collect();
        let tracks = track_proposals(&frames, &TrackerParams::default()).unwrap();
        assert_eq!(tracks.len(), 2);
    }

    #[test]
    fn far_proposal_starts_new_track() {
        let frames = vec![vec![prop(0.0, 0.0, 0.0)], vec![prop(5.0, 0.0, 0.0)]];
        let tracks = track_proposals(&frames, &TrackerParams::default()).unwrap();
        assert_eq!(tracks.len(), 2);
    }
}
