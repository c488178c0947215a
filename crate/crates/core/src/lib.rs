pub mod assignment;
pub mod baseline;
pub mod benders;
pub mod cli;
pub mod design;
pub mod kernel;
pub mod manifest;
pub mod network;
pub mod synthetic;
pub mod waittime;
