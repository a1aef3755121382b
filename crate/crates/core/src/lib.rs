pub mod bundling;
pub mod cli;
pub mod division;
pub mod envy;
pub mod matching;
pub mod model;
pub mod solver;
pub mod verify;
