//! Round-trip identities: printing a design and parsing it back, converting
//! a machine to its process view and back, and agreement between a machine's
//! path language and its process trace language.

mod common;

use common::rt;

#[test]
fn printed_designs_reparse_identically() {
    rt::run_swarm_roundtrip(128).unwrap();
}

#[test]
fn machines_survive_the_process_view_and_back() {
    rt::run_fsm_roundtrip(128).unwrap();
}

#[test]
fn machine_paths_equal_process_traces() {
    rt::run_language_agreement(64).unwrap();
}
