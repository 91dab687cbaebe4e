pub mod model;
pub mod lp;
pub mod admission;
pub mod ospf;
pub mod sim;
pub mod scenario;
pub mod gen;
pub mod io;
pub mod experiment;
