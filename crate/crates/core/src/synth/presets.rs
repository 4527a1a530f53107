use std::f64::consts::PI;

use super::{background_index, BackgroundElement, ObjectSpec, SceneSpec, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{Box7, Point3};

pub const PRESET_NAMES: [&str; 6] = ["urban-mini", "drive-by", "follow", "crowd", "dropout", "empty"];

const VEHICLE: usize = 0;
const VRU: usize = 1;

fn car(trajectory: Trajectory) -> ObjectSpec {
    ObjectSpec {
        category: VEHICLE,
        dims: [4.5, 1.9, 1.6],
        trajectory,
        density: 30.0,
        hidden_frames: None,
    }
}

/// Taller than the sensor, so its roof is never seen.
fn van(trajectory: Trajectory) -> ObjectSpec {
    ObjectSpec {
        dims: [4.8, 1.9, 2.0],
        ..car(trajectory)
    }
}

fn pedestrian(trajectory: Trajectory) -> ObjectSpec {
    ObjectSpec {
        category: VRU,
        dims: [0.7, 0.7, 1.75],
        trajectory,
        density: 60.0,
        hidden_frames: None,
    }
}

fn cyclist(trajectory: Trajectory) -> ObjectSpec {
    ObjectSpec {
        category: VRU,
        dims: [1.8, 0.7, 1.7],
        trajectory,
        density: 50.0,
        hidden_frames: None,
    }
}

fn block(cx: f64, cy: f64, length: f64, width: f64, height: f64, tag: &str, density: f64) -> BackgroundElement {
    BackgroundElement {
        shape: Box7::new(Point3::new(cx, cy, 0.5 * height), length, width, height, 0.0).expect("valid block"),
        tag: background_index(tag),
        density,
    }
}

/// Buildings and trees lining a street along +x.
fn street_scenery() -> Vec<BackgroundElement> {
    let mut v = vec![
        block(10.0, 15.0, 20.0, 6.0, 8.0, "building", 1.0),
        block(35.0, 15.0, 16.0, 6.0, 12.0, "building", 1.0),
        block(15.0, -16.0, 30.0, 8.0, 10.0, "house", 1.0),
    ];
    for x in [0.0, 8.0, 28.0] {
        v.push(block(x, 10.0, 1.0, 1.0, 4.0, "tree", 8.0));
    }
    v.push(block(30.0, -10.5, 12.0, 0.3, 1.2, "fence", 4.0));
    v
}

/// Any named scene, including the non-occlusion ones.
pub fn preset(name: &str) -> Result<SceneSpec> {
    match name {
        "urban-mini" => Ok(urban_mini()),
        "empty" => Ok(empty()),
        _ => occlusion_scenario(name),
    }
}

/// Canned partial-visibility scenes.
pub fn occlusion_scenario(name: &str) -> Result<SceneSpec> {
    match name {
        "drive-by" => Ok(drive_by()),
        "follow" => Ok(follow()),
        "crowd" => Ok(crowd()),
        "dropout" => Ok(dropout()),
        _ => Err(Error::UnknownPreset(name.to_string())),
    }
}

/// Two moving and two static road users on a street, 20 frames.
fn urban_mini() -> SceneSpec {
    let mut s = SceneSpec::base(20);
    s.ego = Trajectory::straight(0.0, 0.0, 0.0, 5.0);
    s.objects = vec![
        car(Trajectory::straight(32.0, 3.5, PI, 8.0)),
        cyclist(Trajectory::straight(8.0, -3.5, 0.0, 4.0)),
        car(Trajectory::stationary(20.0, 7.0, 0.0)),
        pedestrian(Trajectory::stationary(6.0, -7.0, 0.0)),
    ];
    s.background = street_scenery();
    s
}

fn empty() -> SceneSpec {
    let mut s = SceneSpec::base(5);
    s.background = street_scenery();
    s
}

/// The ego passes a parked van behind a wall and sees it only through a
/// narrow gap, so the visible part slides from the front to the rear.
fn drive_by() -> SceneSpec {
    let mut s = SceneSpec::base(20);
    s.ego = Trajectory::straight(-4.5, 0.0, 0.0, 4.5);
    // Near side of the van at y = 7, wall face at y = 4, gap 1.2 m wide.
    s.objects = vec![van(Trajectory::stationary(0.0, 7.95, 0.0))];
    let (gap, thick, height) = (1.2, 0.2, 3.0);
    let seg = 24.0;
    for sign in [-1.0, 1.0] {
        s.background.push(block(
            sign * (0.5 * gap + 0.5 * seg),
            4.0 + 0.5 * thick,
            seg,
            thick,
            height,
            "wall",
            2.0,
        ));
    }
    s
}

/// The ego follows a van at its own speed and only ever sees its rear.
fn follow() -> SceneSpec {
    let mut s = SceneSpec::base(20);
    s.ego = Trajectory::straight(0.0, 0.0, 0.0, 8.0);
    s.objects = vec![van(Trajectory::straight(12.0, 0.0, 0.0, 8.0))];
    s.background = street_scenery();
    s
}

/// Two pedestrians walking right next to a parked car.
fn crowd() -> SceneSpec {
    let mut s = SceneSpec::base(20);
    s.ego = Trajectory::straight(0.0, 0.0, 0.0, 3.0);
    s.objects = vec![
        car(Trajectory::stationary(16.0, 4.5, 0.0)),
        pedestrian(Trajectory::straight(12.5, 2.6, 0.0, 1.2)),
        pedestrian(Trajectory::straight(19.5, 2.7, PI, 1.0)),
    ];
    s.background = street_scenery();
    s
}

/// A moving car that yields no points in frames 8 and 9.
fn dropout() -> SceneSpec {
    let mut s = SceneSpec::base(20);
    s.ego = Trajectory::straight(0.0, 0.0, 0.0, 5.0);
    s.objects = vec![ObjectSpec {
        hidden_frames: Some(8..10),
        ..car(Trajectory::straight(10.0, -3.5, 0.0, 6.0))
    }];
    s.background = street_scenery();
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_valid() {
        for name in PRESET_NAMES {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
        assert!(occlusion_scenario("urban-mini").is_err());
    }

    #[test]
    fn dropout_frames_are_empty() {
        let spec = preset("dropout").unwrap();
        let ds = super::super::generate(&spec, 1).unwrap();
        assert!(ds.object_points(8, 0).is_empty());
        assert!(ds.object_points(9, 0).is_empty());
        assert!(!ds.object_points(7, 0).is_empty());
        assert!(!ds.object_points(10, 0).is_empty());
    }
}
