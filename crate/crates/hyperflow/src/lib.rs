pub mod attack;
pub mod corpus;
pub mod golden;
pub mod initspec;
pub mod lang;
pub mod lp;
pub mod matrix;
pub mod measures;
pub mod probcore;
pub mod refine;
pub mod semantics;
