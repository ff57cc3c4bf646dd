pub mod arith;
pub mod exec;
pub mod group;
pub mod halfplane;
pub mod congruence;
pub mod adelic;
pub mod hecke;
pub mod numeric;
pub mod cm;
pub mod axioms;
