//! Joint induction of recursive logic programs and perception models.
//!
//! A program is induced by an abductive meta-interpreter that instantiates
//! second-order metarules while abducing constraints or relational facts about
//! the latent labels of raw inputs. Those labels are scored by a neural
//! perception model, which is in turn retrained on the best abduced labels in an
//! expectation-maximisation loop.

pub mod bench;
pub mod em;
pub mod fd;
pub mod logic;
pub mod mil;
pub mod perception;
pub mod tasks;
