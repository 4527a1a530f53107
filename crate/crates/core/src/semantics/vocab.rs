//! Default prompt lists.

pub const BACKGROUND_CATEGORIES: [&str; 11] = [
    "vegetation",
    "road",
    "street",
    "sky",
    "tree",
    "building",
    "house",
    "skyscraper",
    "wall",
    "fence",
    "sidewalk",
];

pub const VEHICLE_PROMPTS: [&str; 12] = [
    "car",
    "vehicle",
    "parked vehicle",
    "sedan",
    "truck",
    "bus",
    "van",
    "minivan",
    "school bus",
    "pickup truck",
    "ambulance",
    "fire truck",
];

pub const VRU_PROMPTS: [&str; 5] = ["cyclist", "human", "person", "pedestrian", "bicycle"];

/// Object query sets as `(category, prompts)`.
pub fn default_query_sets() -> Vec<(String, Vec<String>)> {
    let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect();
    vec![
        ("vehicle".to_string(), owned(&VEHICLE_PROMPTS)),
        ("vru".to_string(), owned(&VRU_PROMPTS)),
    ]
}
