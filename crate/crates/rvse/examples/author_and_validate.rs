//! Build a small scenario document by hand, validate it, break it, and
//! validate again.
//!
//! cargo run -p rvse --example author_and_validate

use rvse::scenario::{checksum, parse_scenario, validate};
use serde_json::json;

fn main() {
    let mut doc = json!({
        "id": "chest-pain",
        "version": 1,
        "meta": {
            "title": "Chest pain in the ED",
            "author": "ward-educator",
            "tags": ["cardiology"],
            "learning_objectives": ["Recognise a STEMI", "Start the reperfusion pathway"],
            "created_at": "2025-03-01T09:00:00Z"
        },
        "initial_state": "arrival",
        "states": {
            "arrival": {
                "id": "arrival",
                "vitals": {"hr": 104, "sbp": 138, "spo2": 96},
                "drift_to": {"hr": 130, "sbp": 100, "spo2": 90},
                "representation": {"kind": "text", "content": "55-year-old, crushing chest pain."},
                "goal": {"mode": "all", "action_ids": ["ecg", "aspirin"]},
                "duration_ms": 60000,
                "on_timeout": "arrest",
                "on_goal": "cath_lab",
                "effects": {"discharge": {"transition": "arrest"}}
            },
            "cath_lab": {
                "id": "cath_lab",
                "vitals": {"hr": 90, "sbp": 130, "spo2": 97},
                "representation": {"kind": "text", "content": "Transferred for PCI."},
                "terminal": "stabilized"
            },
            "arrest": {
                "id": "arrest",
                "vitals": {"hr": 0, "sbp": 0, "spo2": 70},
                "representation": {"kind": "text", "content": "VF arrest."},
                "terminal": "deceased"
            }
        },
        "actions": {
            "ecg": {"id": "ecg", "label": "12-lead ECG", "category": "diagnostic"},
            "aspirin": {"id": "aspirin", "label": "Give aspirin", "category": "therapeutic"},
            "discharge": {"id": "discharge", "label": "Discharge home", "category": "other"}
        }
    });

    let scenario = parse_scenario(doc.to_string().as_bytes()).expect("document parses");
    let report = validate(&scenario);
    println!("clean: {} errors, {} warnings", report.errors.len(), report.warnings.len());
    for w in &report.warnings {
        println!("  {} {:?}: {}", w.code, w.state_or_action_id, w.message);
    }
    println!("checksum {}", checksum(&scenario));

    // Point the timeout somewhere that does not exist.
    doc["states"]["arrival"]["on_timeout"] = json!("nowhere");
    let broken = parse_scenario(doc.to_string().as_bytes()).unwrap();
    let report = validate(&broken);
    println!("broken: deployable = {}", report.is_deployable());
    for e in &report.errors {
        println!("  {} {:?}: {}", e.code, e.state_or_action_id, e.message);
    }

    // Structural problems surface at parse time with a path.
    doc["states"]["arrival"]["duration_ms"] = json!(-5);
    match parse_scenario(doc.to_string().as_bytes()) {
        Ok(_) => println!("unexpectedly parsed"),
        Err(e) => println!("parse error: {e}"),
    }
}
