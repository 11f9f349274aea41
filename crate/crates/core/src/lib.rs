//! Voice-assistant core: a table-driven state machine, the assistant's
//! dialogue states, an audio front-end, a letter-level transcriber, the
//! intent engine, the brain's skill router and a deterministic simulator.
pub mod assistant;
pub mod audio;
pub mod brain;
pub mod fsm;
pub mod intent;
pub mod media;
pub mod sim;
pub mod transcriber;
