//! Scenario documents bundled with the crate: clean examples plus one seeded
//! defect per validation rule.

pub const SEPSIS: &str = include_str!("../fixtures/sepsis.rvs.json");
pub const TWO_STATE: &str = include_str!("../fixtures/two_state.rvs.json");
pub const TIMEOUT_LOOP: &str = include_str!("../fixtures/timeout_loop.rvs.json");

/// `(expected error code, document)` for each seeded defect.
pub const DEFECTS: [(&str, &str); 7] = [
    ("E1", include_str!("../fixtures/defects/e1_dangling_target.rvs.json")),
    ("E2", include_str!("../fixtures/defects/e2_unknown_action.rvs.json")),
    ("E3", include_str!("../fixtures/defects/e3_unreachable.rvs.json")),
    ("E4", include_str!("../fixtures/defects/e4_missing_timeout.rvs.json")),
    ("E5", include_str!("../fixtures/defects/e5_timeout_self_loop.rvs.json")),
    ("E6", include_str!("../fixtures/defects/e6_dead_end.rvs.json")),
    ("E7", include_str!("../fixtures/defects/e7_terminal_transitions.rvs.json")),
];

/// Clean scenarios, by name.
pub const CLEAN: [(&str, &str); 3] =
    [("sepsis", SEPSIS), ("two_state", TWO_STATE), ("timeout_loop", TIMEOUT_LOOP)];

/// Parses a bundled document.
pub fn load(doc: &str) -> crate::scenario::Scenario {
    crate::scenario::parse_scenario(doc.as_bytes()).expect("bundled fixtures parse")
}
